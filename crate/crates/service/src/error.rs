use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use ratqual_core::error::Error;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Validation,
    NotFound,
    Infeasible,
    Conflict,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::Validation => StatusCode::BAD_REQUEST,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::Infeasible => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::Conflict => StatusCode::CONFLICT,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// Body of every non-success response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError {
            code,
            message: message.into(),
            details: None,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }

    pub fn validation(message: impl Into<String>) -> Self {
        ApiError::new(ErrorCode::Validation, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        ApiError::new(ErrorCode::NotFound, message)
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        ApiError::new(ErrorCode::Conflict, message)
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        let message = err.to_string();
        match err {
            Error::Invalid { field, .. } => {
                ApiError::validation(message).with_details(json!({ "field": field }))
            }
            Error::Missing(field) => {
                ApiError::validation(message).with_details(json!({ "field": field }))
            }
            Error::Scope(report) => ApiError::validation(message)
                .with_details(json!({ "violations": report.violations })),
            Error::Format { line, column, .. } => ApiError::validation(message)
                .with_details(json!({ "line": line, "column": column })),
            Error::SearchSpaceTooLarge { .. } => ApiError::validation(message),
            Error::Infeasible {
                target,
                max_achievable,
            } => ApiError::new(ErrorCode::Infeasible, message)
                .with_details(json!({ "target": target, "max_achievable": max_achievable })),
            Error::Ordering { .. } => ApiError::conflict(message),
            Error::CorruptRecord { .. } | Error::Io(_) => {
                ApiError::new(ErrorCode::Internal, message)
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}
