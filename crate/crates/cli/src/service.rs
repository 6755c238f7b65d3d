//! Read-only JSON API over a loaded model and corpus.

use std::path::Path;
use std::sync::Arc;

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use blockid::identify::Identifier;
use blockid::Error;
use serde::Deserialize;
use serde_json::json;
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

type Shared = Arc<Identifier>;

#[derive(Debug, Deserialize)]
pub struct IdentifyRequest {
    pub env_id: String,
    #[serde(default)]
    pub symbols: Vec<String>,
}

struct ApiError(Error);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match &self.0 {
            Error::UnknownEnvironment(id) => (
                StatusCode::NOT_FOUND,
                json!({"error": "UnknownEnvironment", "message": self.0.to_string(), "env_id": id}),
            ),
            Error::UnknownSymbol(tok) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({"error": "UnknownSymbol", "message": self.0.to_string(), "token": tok}),
            ),
            other => (
                StatusCode::INTERNAL_SERVER_ERROR,
                json!({"error": "Internal", "message": other.to_string()}),
            ),
        };
        (status, Json(body)).into_response()
    }
}

async fn lexicon(State(id): State<Shared>) -> Response {
    Json(id.symbols()).into_response()
}

async fn environments(State(id): State<Shared>) -> Response {
    Json(id.environments()).into_response()
}

async fn environment(State(id): State<Shared>, UrlPath(env_id): UrlPath<String>) -> Response {
    match id.environment(&env_id) {
        Ok(d) => Json(d).into_response(),
        Err(e) => ApiError(e).into_response(),
    }
}

async fn identify(State(id): State<Shared>, Json(req): Json<IdentifyRequest>) -> Response {
    match id.identify(&req.env_id, &req.symbols) {
        Ok(r) => Json(r).into_response(),
        Err(e) => ApiError(e).into_response(),
    }
}

/// API routes, permissive CORS, and optionally the console's static files under `/`.
pub fn router(identifier: Identifier, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/lexicon", get(lexicon))
        .route("/api/environments", get(environments))
        .route("/api/environments/{id}", get(environment))
        .route("/api/identify", post(identify))
        .with_state(Arc::new(identifier));
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(CorsLayer::permissive())
}
