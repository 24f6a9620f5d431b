use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use coevo_core::history::EngineError;
use serde::Serialize;

/// Error body `{code, messages}` with its status.
#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub messages: Vec<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, messages: Vec<String>) -> Self {
        ApiError { status, code, messages }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not-found", vec![message.into()])
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad-request", vec![message.into()])
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", vec![message.into()])
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "io", vec![message.into()])
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let code = match &e {
            EngineError::UnknownOperation(_) => {
                return Self::new(StatusCode::NOT_FOUND, "unknown-operation", e.messages())
            }
            EngineError::Binding(_) => "bindings",
            EngineError::Constraints(_) => "constraints",
            EngineError::UnknownMigration(_) => "unknown-migration",
            EngineError::Primitive { .. } => "primitive",
            EngineError::Transaction(_) => "transaction",
            EngineError::History(_) => "history",
            EngineError::Model(_) => "model",
            EngineError::Replay { .. } => "migration",
        };
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, e.messages())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}
