//! HTTP/JSON API over the journey pipeline.
//!
//! | route | |
//! |---|---|
//! | `GET /api/health` | status and versions |
//! | `GET /api/stats` | stage frequencies and co-occurrence counts |
//! | `POST /api/dataset` | replace the dataset (CSV or JSONL body) |
//! | `GET /api/clusters` | k-medoids prototypes |
//! | `GET /api/embedding` | 2-D map with cluster ids and outcomes |
//! | `POST /api/predict` | k-NN purchase prediction for a draft journey |
//! | `POST /api/counterfactual` | counterfactual journey and edit narrative |
//!
//! No authentication; meant for a local analyst session.

pub mod api;
pub mod state;

use std::net::SocketAddr;

use axum::routing::{get, post};
use axum::Router;
use tokio::net::TcpListener;
use tower_http::cors::CorsLayer;

pub use state::AppState;

pub fn build_router(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(api::health))
        .route("/api/stats", get(api::stats))
        .route("/api/dataset", post(api::upload))
        .route("/api/clusters", get(api::clusters))
        .route("/api/embedding", get(api::embedding))
        .route("/api/predict", post(api::predict))
        .route("/api/counterfactual", post(api::counterfactual))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Binds `addr` and serves until Ctrl-C or SIGTERM.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    serve_on(listener, state).await
}

pub async fn serve_on(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, build_router(state))
        .with_graceful_shutdown(shutdown_signal())
        .await
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    tracing::info!("shutting down");
}
