//! HTTP JSON API over the segmentation, classification and styling
//! pipeline, holding one in-memory review session.
//!
//! Mutating operations on a mesh (or a thing) are queued behind a
//! per-object lock; readers always see the last complete state. Compute
//! runs on a bounded blocking pool, and anything slower than
//! [`ServiceConfig::long_operation`] answers `202` with a job to poll.

pub mod api;
mod error;
mod handlers;
mod jobs;
mod store;

use std::io;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::DefaultBodyLimit;
use axum::http::HeaderValue;
use axum::routing::{delete, get, patch, post};
use axum::Router;
use fabseg_core::corpus::CorpusIndex;
use fabseg_core::spectral::SegmentParams;
use tokio::net::TcpListener;
use tokio::sync::Semaphore;
use tower_http::cors::{Any, CorsLayer};

pub use error::ApiError;

pub const DEFAULT_PORT: u16 = 8787;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Without a corpus, classification answers 409.
    pub corpus: Option<Arc<CorpusIndex>>,
    /// Write-through persistence of meshes and things.
    pub persist_dir: Option<PathBuf>,
    pub idle_expiry: Duration,
    /// Operations still running after this answer 202 with a job id.
    pub long_operation: Duration,
    /// Concurrent compute jobs.
    pub workers: usize,
    /// `None` allows any origin.
    pub cors_origin: Option<String>,
    pub segment: SegmentParams,
    pub default_resolution: usize,
    pub max_upload_bytes: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            persist_dir: None,
            idle_expiry: Duration::from_secs(24 * 3600),
            long_operation: Duration::from_secs(10),
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            cors_origin: None,
            segment: SegmentParams::default(),
            default_resolution: fabseg_core::mesh::DEFAULT_TARGET_FACES,
            max_upload_bytes: 512 << 20,
        }
    }
}

pub(crate) struct Inner {
    pub config: ServiceConfig,
    pub store: store::Store,
    pub jobs: jobs::Jobs,
    pub pool: Arc<Semaphore>,
}

#[derive(Clone)]
pub struct AppState {
    pub(crate) inner: Arc<Inner>,
}

impl AppState {
    /// Loads any persisted session from `config.persist_dir`.
    pub fn new(config: ServiceConfig) -> io::Result<Self> {
        let store = store::Store::open(config.persist_dir.as_deref())?;
        Ok(Self {
            inner: Arc::new(Inner {
                pool: Arc::new(Semaphore::new(config.workers.max(1))),
                config,
                store,
                jobs: jobs::Jobs::default(),
            }),
        })
    }

    /// Expire idle meshes, things and finished jobs now.
    pub fn expire_idle(&self) -> (usize, usize) {
        let ttl = self.inner.config.idle_expiry;
        self.inner.jobs.expire(ttl);
        self.inner.store.expire_idle(ttl)
    }
}

pub fn router(state: AppState) -> Router {
    let cors = match &state.inner.config.cors_origin {
        Some(origin) => match HeaderValue::from_str(origin) {
            Ok(v) => CorsLayer::new().allow_origin(v),
            Err(_) => CorsLayer::new(),
        },
        None => CorsLayer::new().allow_origin(Any),
    }
    .allow_methods(Any)
    .allow_headers(Any);
    let limit = state.inner.config.max_upload_bytes;
    Router::new()
        .route("/session", get(handlers::session))
        .route("/meshes", post(handlers::upload))
        .route("/meshes/{file}", get(handlers::get_mesh))
        .route("/meshes/{id}/process", post(handlers::process))
        .route("/meshes/{id}/segment", post(handlers::segment_mesh))
        .route("/meshes/{id}/segmentation", get(handlers::get_segmentation))
        .route("/meshes/{id}/stylize", post(handlers::stylize))
        .route("/things", post(handlers::create_thing))
        .route("/things/{id}/classify", post(handlers::classify))
        .route("/things/{id}/report", get(handlers::report))
        .route("/things/{id}/segments/{mesh}/{seg}", patch(handlers::patch_label))
        .route("/things/{id}/linkages/{n}", delete(handlers::separate))
        .route("/jobs/{id}", get(handlers::job))
        .fallback(handlers::fallback)
        .layer(DefaultBodyLimit::max(limit))
        .layer(cors)
        .with_state(state)
}

/// Serve until the listener fails, sweeping idle state periodically.
pub async fn serve(listener: TcpListener, state: AppState) -> io::Result<()> {
    let sweeper = state.clone();
    let period = (state.inner.config.idle_expiry / 4).clamp(Duration::from_secs(1), Duration::from_secs(600));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let (meshes, things) = sweeper.expire_idle();
            if meshes + things > 0 {
                tracing::info!(meshes, things, "expired idle session state");
            }
        }
    });
    tracing::info!(addr = ?listener.local_addr().ok(), "listening");
    axum::serve(listener, router(state)).await
}
