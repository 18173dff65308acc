//! HTTP service and console front end over a trained preference model.

pub mod api;
pub mod console;
pub mod error;
pub mod state;

use std::sync::Arc;

use tokio::net::TcpListener;

pub use api::router;
pub use state::{AppState, ServiceConfig};

/// Serves the API on `listener` until the process is stopped.
pub async fn serve(listener: TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, "listening");
    }
    axum::serve(listener, router(state)).await
}
