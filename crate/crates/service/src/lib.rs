//! HTTP service over a model population: session management, comparison
//! views, pair labeling, sweep control and state export.
//!
//! Every JSON payload carries `label_store_version` and
//! `population_version`. Errors are `{"error": {"status", "message",
//! "token"}}` with 404 for unknown ids, 400 for malformed requests and
//! out-of-vocabulary words, 409 for conflicts and 422 for infeasible view
//! parameters.

pub mod config;
pub mod error;
pub mod routes;
pub mod state;

pub use config::{ServerConfig, PORT_ENV};
pub use error::{ApiError, ServiceError};
pub use routes::router;
pub use state::{AppState, Envelope, Versions};

/// Bind to the configured address and serve until the process ends.
pub async fn serve(config: ServerConfig) -> Result<(), ServiceError> {
    let addr = format!("{}:{}", config.host, config.port);
    let state = AppState::open(config)?;
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
