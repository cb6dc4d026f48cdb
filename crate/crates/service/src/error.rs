use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use emfplan_core::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn no_scene() -> Self {
        Self::new(StatusCode::NOT_FOUND, "no_scene", "no scene is loaded")
    }

    pub fn no_checkpoint(what: &str) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "no_checkpoint",
            format!("no {what} checkpoint is loaded"),
        )
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::NotDeployable(..) | Error::OutOfBounds { .. } => "not_deployable",
            Error::InvalidConfig(_) | Error::ShapeMismatch { .. } | Error::Unsupported(_) => {
                "invalid_request"
            }
            Error::NoLegalAction | Error::IllegalAction(_) => "no_legal_action",
            _ => "internal",
        };
        let status = if code == "internal" {
            StatusCode::INTERNAL_SERVER_ERROR
        } else {
            StatusCode::UNPROCESSABLE_ENTITY
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(ErrorBody {
                code: self.code.to_string(),
                message: self.message,
            }),
        )
            .into_response()
    }
}
