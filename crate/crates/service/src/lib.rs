//! HTTP ingestion and report service: accepts a cough clip with optional
//! sensor readings, runs the analysis pipeline with a loaded model, and keeps
//! anonymized records in an append-only log.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/v1/clips` | multipart `audio` (WAV) and `meta` (JSON) |
//! | GET | `/v1/reports/{id}` | one record |
//! | POST | `/v1/reports/{id}/submit` | draft to submitted |
//! | GET | `/v1/reports?status=submitted` | physician export |
//! | GET | `/v1/reports/{id}/spectrogram` | log-mel matrix of the clip |
//! | GET | `/v1/health` | status, model version, record count |

pub mod api;
pub mod error;
pub mod record;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;

use coughpoc_core::classifier::ModelBundle;

pub use api::{router, AppState, ServiceConfig};
pub use error::{ApiError, ServiceError, StoreError};
pub use record::{AnalysisRecord, ReportStatus, UploadMeta};
pub use store::RecordStore;

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub listen: SocketAddr,
    pub model: Option<PathBuf>,
    pub store: PathBuf,
    pub config: ServiceConfig,
}

/// Loads the model and store, then serves until Ctrl-C.
pub async fn serve(options: ServeOptions) -> Result<(), ServiceError> {
    let model = match &options.model {
        Some(path) => {
            let bundle = ModelBundle::load(path)?;
            log::info!("loaded model {} from {}", bundle.version(), path.display());
            Some(bundle)
        }
        None => {
            log::warn!("no model given; uploads will answer 503");
            None
        }
    };
    let store = RecordStore::open(&options.store)?;
    let app = router(AppState::new(store, model, options.config));
    let listener = tokio::net::TcpListener::bind(options.listen)
        .await
        .map_err(|source| ServiceError::Bind {
            addr: options.listen.to_string(),
            source,
        })?;
    log::info!("listening on {}", options.listen);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServiceError::Serve)
}
