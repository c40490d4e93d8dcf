//! HTTP service around the extraction pipeline and the paired-annotation
//! workflow.
//!
//! All mutations go through one writer that appends a record to the log and
//! then publishes a new immutable [`State`] snapshot; readers only ever clone
//! the current snapshot.

mod api;
pub mod state;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use cogpath_core::llm::{LlmClient, LlmConfig};
use cogpath_core::pathway::PathwayConfig;
use cogpath_core::CategoryScheme;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use api::router;
pub use state::{ApplyError, LogEntry, Record, SentenceRef, State};
pub use store::{LogStore, Recovered, StoreError, Truncation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteEndpoint {
    /// Base URL; `/classify` and `/summarize` are appended.
    pub url: String,
    /// Environment variable holding the bearer token.
    #[serde(default)]
    pub token_env: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub store_path: PathBuf,
    /// Static bearer token; `None` disables auth.
    pub auth_token: Option<String>,
    /// Origins allowed by CORS; `"*"` allows any.
    pub cors_origins: Vec<String>,
    pub remote: Option<RemoteEndpoint>,
    pub llm: Option<LlmConfig>,
    pub batch_size: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            store_path: PathBuf::from("cogpath-store.jsonl"),
            auth_token: None,
            cors_origins: Vec::new(),
            remote: None,
            llm: None,
            batch_size: PathwayConfig::default().batch_size,
        }
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

pub(crate) struct Inner {
    pub(crate) config: ServiceConfig,
    pub(crate) scheme: CategoryScheme,
    pub(crate) snapshot: RwLock<Arc<State>>,
    pub(crate) writer: tokio::sync::Mutex<LogStore>,
    pub(crate) llm: Option<Arc<LlmClient>>,
}

/// Shared handle passed to every handler.
#[derive(Clone)]
pub struct AppState {
    pub(crate) inner: Arc<Inner>,
}

impl AppState {
    /// Opens the store and replays it. A torn final record is dropped with a warning.
    pub fn open(config: ServiceConfig) -> Result<(Self, Recovered), ServiceError> {
        let scheme = CategoryScheme::canonical();
        let llm = match &config.llm {
            Some(c) => Some(Arc::new(LlmClient::new(c.clone()).map_err(|e| ServiceError::Config(e.to_string()))?)),
            None => None,
        };
        if config.batch_size == 0 {
            return Err(ServiceError::Config("batch_size must be positive".into()));
        }
        let (store, recovered) = LogStore::open(&config.store_path, &scheme)?;
        if let Some(t) = &recovered.truncation {
            tracing::warn!(line = t.line, bytes = t.discarded_bytes, "discarded torn record at end of store");
        }
        let inner = Inner {
            snapshot: RwLock::new(Arc::new(recovered.state.clone())),
            writer: tokio::sync::Mutex::new(store),
            config,
            scheme,
            llm,
        };
        Ok((Self { inner: Arc::new(inner) }, recovered))
    }

    pub fn snapshot(&self) -> Arc<State> {
        Arc::clone(&self.inner.snapshot.read().unwrap())
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }
}

/// Serves until Ctrl-C.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> Result<(), ServiceError> {
    let (state, recovered) = AppState::open(config)?;
    tracing::info!(records = recovered.records, hash = %recovered.state.hash(), "store replayed");
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
