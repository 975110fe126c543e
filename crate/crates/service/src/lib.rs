//! HTTP service behind the labeling UI: the sampling queue, ticket text with
//! key-phrase highlights, label storage, retraining and progress statistics.
//!
//! All endpoints live under `/api` and speak JSON; errors come back as
//! `{"code": ..., "message": ...}`.

mod api;
mod state;

use std::net::SocketAddr;

pub use api::router;
pub use state::{AppState, ServiceConfig, ServiceError};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
