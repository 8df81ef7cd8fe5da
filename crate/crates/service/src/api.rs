use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use coughpoc_core::classifier::ModelBundle;
use coughpoc_core::detect::DetectorConfig;
use coughpoc_core::dsp::{
    decode_wav_bytes, log_mel_spectrogram, resample, FrameSpec, CANONICAL_RATE_HZ, DEFAULT_MEL_FILTERS,
};
use coughpoc_core::pipeline::{analyze_clip, diagnose};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::ApiError;
use crate::record::{new_record_id, AnalysisRecord, ReportStatus, UploadMeta, MAX_REGION_LEN};
use crate::store::{sha256_hex, RecordStore};

pub const DEFAULT_MAX_CLIP_SECONDS: f64 = 60.0;
/// Request body cap; large enough that over-long clips reach the duration check.
pub const MAX_BODY_BYTES: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub max_clip_seconds: f64,
    pub detector: DetectorConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            max_clip_seconds: DEFAULT_MAX_CLIP_SECONDS,
            detector: DetectorConfig::default(),
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<RecordStore>,
    pub model: Option<Arc<ModelBundle>>,
    pub config: Arc<ServiceConfig>,
}

impl AppState {
    pub fn new(store: RecordStore, model: Option<ModelBundle>, config: ServiceConfig) -> Self {
        Self {
            store: Arc::new(store),
            model: model.map(Arc::new),
            config: Arc::new(config),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/clips", post(upload))
        .route("/v1/reports", get(list_reports))
        .route("/v1/reports/{id}", get(get_report))
        .route("/v1/reports/{id}/submit", post(submit_report))
        .route("/v1/reports/{id}/spectrogram", get(spectrogram))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .layer(middleware::from_fn(cors))
        .with_state(state)
}

/// Lets a browser client on another origin call the API; answers preflight
/// requests directly.
async fn cors(req: Request, next: Next) -> Response {
    let mut resp = if req.method() == Method::OPTIONS {
        StatusCode::NO_CONTENT.into_response()
    } else {
        next.run(req).await
    };
    let h = resp.headers_mut();
    h.insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, HeaderValue::from_static("*"));
    h.insert(header::ACCESS_CONTROL_ALLOW_METHODS, HeaderValue::from_static("GET, POST, OPTIONS"));
    h.insert(header::ACCESS_CONTROL_ALLOW_HEADERS, HeaderValue::from_static("content-type"));
    resp
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model_version: Option<String>,
    pub record_count: usize,
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    Json(Health {
        status: if state.model.is_some() { "ok" } else { "degraded" }.to_string(),
        model_version: state.model.as_ref().map(|m| m.version()),
        record_count: state.store.len(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct UploadResponse {
    pub record_id: String,
    pub report: AnalysisRecord,
}

fn upload_key(clip_ref: &str, meta: &UploadMeta) -> String {
    let canonical = serde_json::to_string(meta).expect("meta serializes");
    sha256_hex(format!("{clip_ref}\n{canonical}").as_bytes())
}

fn upload_response(record: AnalysisRecord, created: bool) -> Response {
    if record.diagnosis.is_none() {
        let body = json!({ "detail": "no cough detected", "record_id": record.record_id });
        return (StatusCode::UNPROCESSABLE_ENTITY, Json(body)).into_response();
    }
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    let body = UploadResponse {
        record_id: record.record_id.clone(),
        report: record,
    };
    (status, Json(body)).into_response()
}

async fn upload(State(state): State<AppState>, mut multipart: Multipart) -> Result<Response, ApiError> {
    let Some(model) = state.model.clone() else {
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "model not loaded"));
    };
    let mut audio: Option<Vec<u8>> = None;
    let mut meta: Option<UploadMeta> = None;
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| ApiError::new(e.status(), e.body_text()))?
    {
        match field.name() {
            Some("audio") => {
                let bytes = field
                    .bytes()
                    .await
                    .map_err(|e| ApiError::new(e.status(), e.body_text()))?;
                audio = Some(bytes.to_vec());
            }
            Some("meta") => {
                let text = field
                    .text()
                    .await
                    .map_err(|e| ApiError::new(e.status(), e.body_text()))?;
                let parsed: UploadMeta =
                    serde_json::from_str(&text).map_err(|e| ApiError::bad_request(format!("invalid meta: {e}")))?;
                meta = Some(parsed);
            }
            Some(other) => return Err(ApiError::bad_request(format!("unexpected multipart field {other:?}"))),
            None => return Err(ApiError::bad_request("multipart field without a name")),
        }
    }
    let audio = audio.ok_or_else(|| ApiError::bad_request("missing \"audio\" part"))?;
    let meta = meta.unwrap_or_default();
    let sensor = meta.sensor();
    sensor.validate().map_err(|e| ApiError::bad_request(e.to_string()))?;
    if meta.region.as_ref().is_some_and(|r| r.chars().count() > MAX_REGION_LEN) {
        return Err(ApiError::bad_request(format!(
            "region longer than {MAX_REGION_LEN} characters"
        )));
    }
    let clip = decode_wav_bytes(&audio).map_err(|e| ApiError::bad_request(format!("invalid WAV: {e}")))?;
    if clip.duration_secs() > state.config.max_clip_seconds {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!(
                "clip lasts {:.1} s, above the {} s limit",
                clip.duration_secs(),
                state.config.max_clip_seconds
            ),
        ));
    }

    let clip_ref = sha256_hex(&audio);
    let key = upload_key(&clip_ref, &meta);
    if let Some(existing) = state.store.find_by_upload_key(&key) {
        return Ok(upload_response(existing, false));
    }

    let store = state.store.clone();
    let config = state.config.clone();
    let (record, created) = tokio::task::spawn_blocking(move || -> Result<_, ApiError> {
        let analysis = analyze_clip(&clip, &config.detector).map_err(ApiError::internal)?;
        let diagnosis = diagnose(&model, &analysis, &sensor).map_err(ApiError::internal)?;
        let clip_ref = store.put_blob(&audio)?;
        let record = AnalysisRecord {
            record_id: new_record_id(),
            created_at: Utc::now(),
            clip_ref,
            clip_duration_s: clip.duration_secs(),
            sensor,
            segments: analysis.reports(),
            memberships: diagnosis.as_ref().map(|d| {
                model
                    .classes
                    .iter()
                    .cloned()
                    .zip(d.memberships.0.iter().copied())
                    .collect::<BTreeMap<_, _>>()
            }),
            diagnosis: diagnosis.map(|d| d.diagnosis),
            status: ReportStatus::Draft,
            submitted_at: None,
            consent_location: meta.consented_region(),
            model_version: Some(model.version()),
            upload_key: key,
        };
        Ok(store.insert_or_get(record)?)
    })
    .await
    .map_err(ApiError::internal)??;
    if created {
        log::info!("record {} stored ({:?})", record.record_id, record.diagnosis);
    }
    Ok(upload_response(record, created))
}

async fn get_report(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<AnalysisRecord>, ApiError> {
    state.store.get(&id).map(Json).ok_or_else(ApiError::not_found)
}

async fn submit_report(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<AnalysisRecord>, ApiError> {
    let store = state.store.clone();
    let updated = tokio::task::spawn_blocking(move || store.submit(&id))
        .await
        .map_err(ApiError::internal)??;
    updated.map(Json).ok_or_else(ApiError::not_found)
}

#[derive(Debug, Deserialize)]
struct ListQuery {
    status: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportList {
    pub records: Vec<AnalysisRecord>,
}

async fn list_reports(
    State(state): State<AppState>,
    Query(query): Query<ListQuery>,
) -> Result<Json<ReportList>, ApiError> {
    let status = match query.status.as_deref() {
        None => None,
        Some(s) => Some(ReportStatus::parse(s).ok_or_else(|| ApiError::bad_request(format!("unknown status {s:?}")))?),
    };
    Ok(Json(ReportList {
        records: state.store.list(status),
    }))
}

/// Log-mel matrix of a stored clip for client-side rendering.
#[derive(Debug, Serialize, Deserialize)]
pub struct SpectrogramView {
    pub record_id: String,
    pub sample_rate_hz: u32,
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub n_mels: usize,
    /// `frames[t][m]`, natural-log filterbank energy.
    pub frames: Vec<Vec<f64>>,
}

async fn spectrogram(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SpectrogramView>, ApiError> {
    let record = state.store.get(&id).ok_or_else(ApiError::not_found)?;
    let store = state.store.clone();
    let view = tokio::task::spawn_blocking(move || -> Result<_, ApiError> {
        let bytes = store.get_blob(&record.clip_ref)?;
        let clip = decode_wav_bytes(&bytes).map_err(ApiError::internal)?;
        let clip = if clip.sample_rate_hz() == CANONICAL_RATE_HZ {
            clip
        } else {
            resample(&clip, CANONICAL_RATE_HZ).map_err(ApiError::internal)?
        };
        let spec = FrameSpec::default();
        let frames = if clip.len() >= spec.frame_len_samples(CANONICAL_RATE_HZ) {
            log_mel_spectrogram(&clip, &spec, DEFAULT_MEL_FILTERS).map_err(ApiError::internal)?
        } else {
            Vec::new()
        };
        Ok(SpectrogramView {
            record_id: record.record_id,
            sample_rate_hz: CANONICAL_RATE_HZ,
            frame_ms: spec.frame_len_ms,
            hop_ms: spec.hop_len_ms,
            n_mels: DEFAULT_MEL_FILTERS,
            frames,
        })
    })
    .await
    .map_err(ApiError::internal)??;
    Ok(Json(view))
}
