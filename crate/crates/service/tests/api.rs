use std::collections::HashSet;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use coughpoc_core::classifier::{MlpModel, Model, ModelBundle, DEFAULT_HIDDEN};
use coughpoc_core::dsp::{encode_wav_bytes, AudioClip, CANONICAL_RATE_HZ};
use coughpoc_core::features::FUSED_LEN;
use coughpoc_core::synth::{synth_clip, ClassProfile};
use coughpoc_service::api::{Health, ReportList, SpectrogramView, UploadResponse};
use coughpoc_service::{router, AppState, RecordStore, ServiceConfig};
use http_body_util::BodyExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;
use tower::ServiceExt;

const BOUNDARY: &str = "coughpoc-test-boundary";

fn bundle() -> ModelBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut sizes = vec![FUSED_LEN];
    sizes.extend(DEFAULT_HIDDEN);
    sizes.push(3);
    let model = Model::Mlp(MlpModel::new(&sizes, &mut rng).unwrap());
    let classes = ["covid_like", "flu_like", "healthy"].map(String::from).to_vec();
    ModelBundle::new(model, classes, None).unwrap()
}

fn app(dir: &TempDir, with_model: bool) -> Router {
    let store = RecordStore::open(dir.path()).unwrap();
    router(AppState::new(store, with_model.then(bundle), ServiceConfig::default()))
}

fn cough_wav(index: usize) -> Vec<u8> {
    let clip = synth_clip(&ClassProfile::defaults(), index, 20.0, 11).unwrap();
    encode_wav_bytes(&clip.clip).unwrap()
}

fn silence_wav() -> Vec<u8> {
    encode_wav_bytes(&AudioClip::new(vec![0.0; CANONICAL_RATE_HZ as usize], CANONICAL_RATE_HZ).unwrap()).unwrap()
}

fn multipart(audio: Option<&[u8]>, meta: Option<&str>) -> Request<Body> {
    let mut body = Vec::new();
    if let Some(audio) = audio {
        body.extend_from_slice(
            format!(
                "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"audio\"; filename=\"clip.wav\"\r\nContent-Type: audio/wav\r\n\r\n"
            )
            .as_bytes(),
        );
        body.extend_from_slice(audio);
        body.extend_from_slice(b"\r\n");
    }
    if let Some(meta) = meta {
        body.extend_from_slice(
            format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"meta\"\r\nContent-Type: application/json\r\n\r\n{meta}\r\n")
                .as_bytes(),
        );
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    Request::post("/v1/clips")
        .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(body))
        .unwrap()
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or(Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post(uri: &str) -> Request<Body> {
    Request::post(uri).body(Body::empty()).unwrap()
}

#[tokio::test]
async fn upload_returns_normalized_memberships() {
    let dir = TempDir::new().unwrap();
    let app = app(&dir, true);
    let meta = r#"{"temp_c": 38.6, "airflow_peak_lps": 5.0}"#;
    let (status, body) = send(&app, multipart(Some(&cough_wav(0)), Some(meta))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let resp: UploadResponse = serde_json::from_value(body).unwrap();
    let memberships = resp.report.memberships.as_ref().unwrap();
    assert_eq!(memberships.len(), 3);
    let sum: f64 = memberships.values().sum();
    assert!((sum - 1.0).abs() < 1e-6);
    assert!(!resp.report.segments.is_empty());
    assert_eq!(resp.report.sensor.body_temp_c, Some(38.6));
    assert!(resp.report.model_version.as_deref().unwrap().starts_with("mlp-"));

    let (status, fetched) = send(&app, get(&format!("/v1/reports/{}", resp.record_id))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(fetched["record_id"], resp.record_id.as_str());
    assert_eq!(fetched["status"], "draft");
}

#[tokio::test]
async fn duplicate_upload_is_idempotent() {
    let dir = TempDir::new().unwrap();
    let app = app(&dir, true);
    let wav = cough_wav(1);
    let (s1, b1) = send(&app, multipart(Some(&wav), None)).await;
    let (s2, b2) = send(&app, multipart(Some(&wav), None)).await;
    assert_eq!(s1, StatusCode::CREATED);
    assert_eq!(s2, StatusCode::OK);
    assert_eq!(b1["record_id"], b2["record_id"]);
    let (_, health) = send(&app, get("/v1/health")).await;
    assert_eq!(health["record_count"], 1);

    // Different meta is a different upload.
    let (s3, b3) = send(&app, multipart(Some(&wav), Some(r#"{"temp_c": 37.0}"#))).await;
    assert_eq!(s3, StatusCode::CREATED);
    assert_ne!(b1["record_id"], b3["record_id"]);
}

#[tokio::test]
async fn concurrent_uploads_all_stored_and_replayed() {
    let dir = TempDir::new().unwrap();
    let app = app(&dir, true);
    let mut handles = Vec::new();
    for i in 0..10 {
        let app = app.clone();
        let wav = cough_wav(i);
        handles.push(tokio::spawn(
            async move { send(&app, multipart(Some(&wav), None)).await },
        ));
    }
    let mut ids = HashSet::new();
    for h in handles {
        let (status, body) = h.await.unwrap();
        assert_eq!(status, StatusCode::CREATED, "{body}");
        let resp: UploadResponse = serde_json::from_value(body).unwrap();
        let sum: f64 = resp.report.memberships.unwrap().values().sum();
        assert!((sum - 1.0).abs() < 1e-6);
        ids.insert(resp.record_id);
    }
    assert_eq!(ids.len(), 10);
    drop(app);

    let reopened = self::app(&dir, true);
    let (_, list) = send(&reopened, get("/v1/reports")).await;
    let list: ReportList = serde_json::from_value(list).unwrap();
    let replayed: HashSet<_> = list.records.into_iter().map(|r| r.record_id).collect();
    assert_eq!(replayed, ids);
}

#[tokio::test]
async fn silence_is_unprocessable_but_recorded() {
    let dir = TempDir::new().unwrap();
    let app = app(&dir, true);
    let (status, body) = send(&app, multipart(Some(&silence_wav()), None)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["detail"], "no cough detected");
    let id = body["record_id"].as_str().unwrap();
    let (status, rec) = send(&app, get(&format!("/v1/reports/{id}"))).await;
    assert_eq!(status, StatusCode::OK);
    assert!(rec["diagnosis"].is_null());
    assert_eq!(rec["segments"].as_array().unwrap().len(), 0);
}

#[tokio::test]
async fn rejects_bad_requests() {
    let dir = TempDir::new().unwrap();
    let app = app(&dir, true);
    let wav = cough_wav(2);

    let (status, body) = send(&app, multipart(Some(&wav), Some(r#"{"name": "Jane"}"#))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["detail"].as_str().unwrap().contains("meta"));

    let (status, _) = send(&app, multipart(Some(b"RIFF not a wav"), None)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = send(&app, multipart(None, Some("{}"))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = send(&app, multipart(Some(&wav), Some(r#"{"temp_c": 55.0}"#))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let long = "x".repeat(100);
    let (status, _) = send(
        &app,
        multipart(
            Some(&wav),
            Some(&format!(r#"{{"region": "{long}", "consent_location": true}}"#)),
        ),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = send(&app, get("/v1/reports?status=lost")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (_, health) = send(&app, get("/v1/health")).await;
    assert_eq!(health["record_count"], 0);
}

#[tokio::test]
async fn overlong_clip_is_too_large() {
    let dir = TempDir::new().unwrap();
    let store = RecordStore::open(dir.path()).unwrap();
    let config = ServiceConfig {
        max_clip_seconds: 1.0,
        ..ServiceConfig::default()
    };
    let app = router(AppState::new(store, Some(bundle()), config));
    let clip = AudioClip::new(vec![0.0; 2 * CANONICAL_RATE_HZ as usize], CANONICAL_RATE_HZ).unwrap();
    let (status, _) = send(&app, multipart(Some(&encode_wav_bytes(&clip).unwrap()), None)).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
}

#[tokio::test]
async fn unknown_record_is_404() {
    let dir = TempDir::new().unwrap();
    let app = app(&dir, true);
    assert_eq!(send(&app, get("/v1/reports/deadbeef")).await.0, StatusCode::NOT_FOUND);
    assert_eq!(
        send(&app, post("/v1/reports/deadbeef/submit")).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        send(&app, get("/v1/reports/deadbeef/spectrogram")).await.0,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn region_kept_only_with_consent() {
    let dir = TempDir::new().unwrap();
    let app = app(&dir, true);
    let wav = cough_wav(3);
    let (_, a) = send(
        &app,
        multipart(Some(&wav), Some(r#"{"region": "Lagos", "consent_location": false}"#)),
    )
    .await;
    let (_, b) = send(
        &app,
        multipart(Some(&wav), Some(r#"{"region": "Lagos", "consent_location": true}"#)),
    )
    .await;
    assert!(a["report"]["consent_location"].is_null());
    assert_eq!(b["report"]["consent_location"], "Lagos");
    let log = std::fs::read_to_string(dir.path().join("records.jsonl")).unwrap();
    assert_eq!(log.matches("Lagos").count(), 1);
}

#[tokio::test]
async fn submit_flow_and_status_filter() {
    let dir = TempDir::new().unwrap();
    let app = app(&dir, true);
    let (_, a) = send(&app, multipart(Some(&cough_wav(4)), None)).await;
    let (_, _b) = send(&app, multipart(Some(&cough_wav(5)), None)).await;
    let id = a["record_id"].as_str().unwrap().to_string();

    let (status, rec) = send(&app, post(&format!("/v1/reports/{id}/submit"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(rec["status"], "submitted");
    let first_time = rec["submitted_at"].clone();
    assert!(!first_time.is_null());
    let (_, again) = send(&app, post(&format!("/v1/reports/{id}/submit"))).await;
    assert_eq!(again["submitted_at"], first_time);

    let (_, submitted) = send(&app, get("/v1/reports?status=submitted")).await;
    let submitted: ReportList = serde_json::from_value(submitted).unwrap();
    assert_eq!(submitted.records.len(), 1);
    assert_eq!(submitted.records[0].record_id, id);
    let (_, drafts) = send(&app, get("/v1/reports?status=draft")).await;
    assert_eq!(drafts["records"].as_array().unwrap().len(), 1);

    drop(app);
    let reopened = self::app(&dir, true);
    let (_, rec) = send(&reopened, get(&format!("/v1/reports/{id}"))).await;
    assert_eq!(rec["status"], "submitted");
}

#[tokio::test]
async fn health_reports_model_state() {
    let dir = TempDir::new().unwrap();
    let (_, body) = send(&app(&dir, false), get("/v1/health")).await;
    let health: Health = serde_json::from_value(body).unwrap();
    assert_eq!(health.status, "degraded");
    assert!(health.model_version.is_none());

    let (status, _) = send(&app(&dir, false), multipart(Some(&cough_wav(0)), None)).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);

    let (_, body) = send(&app(&dir, true), get("/v1/health")).await;
    assert_eq!(body["status"], "ok");
    assert_eq!(body["model_version"], bundle().version());
}

#[tokio::test]
async fn spectrogram_of_stored_clip() {
    let dir = TempDir::new().unwrap();
    let app = app(&dir, true);
    let (_, up) = send(&app, multipart(Some(&cough_wav(6)), None)).await;
    let id = up["record_id"].as_str().unwrap();
    let (status, body) = send(&app, get(&format!("/v1/reports/{id}/spectrogram"))).await;
    assert_eq!(status, StatusCode::OK);
    let view: SpectrogramView = serde_json::from_value(body).unwrap();
    assert_eq!(view.n_mels, 26);
    assert!(view.frames.len() > 50);
    assert!(view
        .frames
        .iter()
        .all(|f| f.len() == 26 && f.iter().all(|v| v.is_finite())));
}

#[tokio::test]
async fn cors_preflight_and_headers() {
    let dir = TempDir::new().unwrap();
    let app = app(&dir, true);
    let resp = app
        .clone()
        .oneshot(Request::options("/v1/clips").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::NO_CONTENT);
    assert_eq!(resp.headers()["access-control-allow-origin"], "*");
    let resp = app.oneshot(get("/v1/health")).await.unwrap();
    assert_eq!(resp.headers()["access-control-allow-origin"], "*");
}

#[tokio::test]
async fn trained_model_recognizes_covid_like_clip() {
    use coughpoc_core::classifier::TrainConfig;
    use coughpoc_core::detect::DetectorConfig;
    use coughpoc_core::pipeline::{train_from_manifest, ArchChoice};
    use coughpoc_core::synth::synth_corpus;

    let corpus = TempDir::new().unwrap();
    let summary = synth_corpus(&ClassProfile::defaults(), 120, 10.0, 3, corpus.path()).unwrap();
    let cfg = TrainConfig {
        seed: 3,
        ..TrainConfig::default()
    };
    let arch = ArchChoice::Mlp {
        hidden: DEFAULT_HIDDEN.to_vec(),
    };
    let outcome = train_from_manifest(&summary.manifest, &arch, &cfg, &DetectorConfig::default()).unwrap();

    let dir = TempDir::new().unwrap();
    let store = RecordStore::open(dir.path()).unwrap();
    let app = router(AppState::new(store, Some(outcome.bundle), ServiceConfig::default()));
    // Index 0 maps to the first profile, covid_like; a different seed keeps it out of training.
    let clip = synth_clip(&ClassProfile::defaults(), 0, 10.0, 777).unwrap();
    assert_eq!(clip.label, "covid_like");
    let meta = format!(
        r#"{{"temp_c": 38.9, "airflow_peak_lps": {}, "airflow_volume_l": {}}}"#,
        clip.sensor.airflow_peak_lps.unwrap(),
        clip.sensor.airflow_volume_l.unwrap()
    );
    let (status, body) = send(&app, multipart(Some(&encode_wav_bytes(&clip.clip).unwrap()), Some(&meta))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(body["report"]["diagnosis"], "covid_like", "{body}");
    let id = body["record_id"].as_str().unwrap();
    let (_, fetched) = send(&app, get(&format!("/v1/reports/{id}"))).await;
    assert_eq!(fetched["memberships"], body["report"]["memberships"]);
}
