//! HTTP service and storage for chartalk charts and chat sessions.

pub mod api;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod store;

pub use api::{router, AppState, StartupError};
pub use config::ServiceConfig;

/// Binds the configured address and serves until Ctrl-C.
pub async fn serve(state: AppState, listen: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
