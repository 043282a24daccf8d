//! HTTP/JSON front end for recommendation sessions.
//!
//! Each session sits behind its own lock, so writes to one session are
//! serialized while other sessions proceed. Every accepted event is appended
//! to the session's JSONL log before the new state becomes visible; on restart
//! the logs are replayed.

mod error;
mod routes;

use std::collections::HashMap;
use std::sync::Arc;

use tokio::sync::RwLock;
use xeff_core::session::log::{replay, LogDir};
use xeff_core::session::{Context, Session, SessionConfig};

pub use error::ApiError;
pub use routes::router;

pub type SessionHandle = Arc<RwLock<Session>>;

pub struct AppState {
    pub ctx: Arc<Context>,
    pub sessions: RwLock<HashMap<String, SessionHandle>>,
    pub logs: Option<LogDir>,
    pub defaults: SessionConfig,
    /// Mixed with the session id when a request leaves the seed open.
    pub seed: u64,
}

impl AppState {
    pub fn new(ctx: Arc<Context>, logs: Option<LogDir>, seed: u64) -> Self {
        Self {
            ctx,
            sessions: RwLock::new(HashMap::new()),
            logs,
            defaults: SessionConfig::default(),
            seed,
        }
    }

    /// Rebuilds every session found in the log directory.
    pub fn restore(ctx: Arc<Context>, logs: LogDir, seed: u64) -> xeff_core::Result<Self> {
        let mut sessions = HashMap::new();
        for records in logs.read_all()? {
            if records.is_empty() {
                continue;
            }
            let s = replay(&ctx, &records)?;
            log::info!("restored session {} at trial {}", s.id, s.trial);
            sessions.insert(s.id.clone(), Arc::new(RwLock::new(s)));
        }
        Ok(Self {
            ctx,
            sessions: RwLock::new(sessions),
            logs: Some(logs),
            defaults: SessionConfig::default(),
            seed,
        })
    }
}

/// Serves until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
