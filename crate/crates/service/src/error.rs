use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("invalid test plan: {0}")]
    InvalidPlan(String),
    #[error("stimulus file not found: {0}")]
    MissingStimulus(String),
    #[error("invalid listener id: {0}")]
    InvalidListener(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("screen {index} out of range (session has {n_screens})")]
    UnknownScreen { index: usize, n_screens: usize },
    #[error("session {0} is complete and accepts no more responses")]
    SessionClosed(String),
    #[error("screen {screen} of session {session} was already answered")]
    Duplicate { session: String, screen: usize },
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("no {0} test is served here")]
    WrongTestType(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("corrupt response log at line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Error body returned by every endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::InvalidPlan(_) => "invalid_plan",
            ServiceError::MissingStimulus(_) => "missing_stimulus",
            ServiceError::InvalidListener(_) => "invalid_listener",
            ServiceError::UnknownSession(_) => "unknown_session",
            ServiceError::UnknownScreen { .. } => "unknown_screen",
            ServiceError::SessionClosed(_) => "session_closed",
            ServiceError::Duplicate { .. } => "duplicate_response",
            ServiceError::InvalidPayload(_) => "invalid_payload",
            ServiceError::WrongTestType(_) => "wrong_test_type",
            ServiceError::NotFound(_) => "not_found",
            ServiceError::CorruptLog { .. } => "corrupt_log",
            ServiceError::Io(_) => "io_error",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::InvalidListener(_) | ServiceError::InvalidPayload(_) => StatusCode::BAD_REQUEST,
            ServiceError::UnknownSession(_)
            | ServiceError::UnknownScreen { .. }
            | ServiceError::WrongTestType(_)
            | ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::SessionClosed(_) | ServiceError::Duplicate { .. } => StatusCode::CONFLICT,
            ServiceError::InvalidPlan(_)
            | ServiceError::MissingStimulus(_)
            | ServiceError::CorruptLog { .. }
            | ServiceError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            code: self.code().to_string(),
            message: self.to_string(),
        };
        (self.status(), Json(body)).into_response()
    }
}
