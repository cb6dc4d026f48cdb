//! Planner HTTP API: scene inspection, map prediction with rates, and
//! policy-driven placement suggestions.

mod error;
mod handlers;
mod state;

use std::net::SocketAddr;

use axum::routing::{get, post};
use axum::Router;

pub use error::ApiError;
pub use handlers::{
    PredictRequest, PredictResponse, SceneResponse, SuggestRequest, SuggestResponse,
};
pub use state::{AppState, LoadedScene, PredictorMode};

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(handlers::health))
        .route("/scene", get(handlers::scene))
        .route("/predict", post(handlers::predict))
        .route("/suggest", post(handlers::suggest))
        .with_state(state)
}

/// Bind and serve until the process is stopped.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
