use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use prefstack::Error;
use serde::{Deserialize, Serialize};

/// Error body of every failed request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
                detail: None,
            },
        }
    }

    pub fn with_detail(mut self, detail: serde_json::Value) -> Self {
        self.body.detail = Some(detail);
        self
    }

    pub fn unknown_model(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_model", format!("no model `{id}`"))
    }

    pub fn unknown_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session `{id}`"))
    }

    /// Errors raised while training on an uploaded corpus.
    pub fn invalid_corpus(err: Error) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_corpus", err.to_string())
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        let (status, code) = match &err {
            Error::UnknownAction(_) => (StatusCode::UNPROCESSABLE_ENTITY, "unknown_action"),
            Error::WrongKind { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "wrong_kind"),
            Error::MissingActual => (StatusCode::UNPROCESSABLE_ENTITY, "missing_actual"),
            Error::PendingFeedback => (StatusCode::CONFLICT, "pending_feedback"),
            Error::NoPendingPrediction => (StatusCode::CONFLICT, "no_pending_prediction"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self::new(status, code, err.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
