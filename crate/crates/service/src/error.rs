use std::fmt::Display;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use fabseg_core::classify::ClassifyError;
use fabseg_core::mesh::MeshError;
use fabseg_core::shape::ShapeError;
use fabseg_core::spectral::SpectralError;
use fabseg_core::stylize::StyleError;

use crate::api::{ErrorBody, ErrorEnvelope};

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
                incident_id: None,
            },
        }
    }

    pub fn not_found(what: impl Display) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("{what} not found"))
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid", message)
    }

    /// Logged with a fresh incident id; the client only sees the id.
    pub fn internal(cause: impl Display) -> Self {
        let incident = uuid::Uuid::new_v4().to_string();
        tracing::error!(incident = %incident, "{cause}");
        let mut err = Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "internal error");
        err.body.incident_id = Some(incident);
        err
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorEnvelope { error: self.body })).into_response()
    }
}

impl From<MeshError> for ApiError {
    fn from(e: MeshError) -> Self {
        Self::invalid(e.to_string())
    }
}

impl From<SpectralError> for ApiError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::TooFewFaces { .. } | SpectralError::InvalidParams(_) | SpectralError::Mesh(_) => {
                Self::invalid(e.to_string())
            }
            _ => Self::internal(e),
        }
    }
}

impl From<ShapeError> for ApiError {
    fn from(e: ShapeError) -> Self {
        match e {
            ShapeError::Sidecar(_) | ShapeError::ResolutionMismatch { .. } => Self::internal(e),
            _ => Self::invalid(e.to_string()),
        }
    }
}

impl From<ClassifyError> for ApiError {
    fn from(e: ClassifyError) -> Self {
        match e {
            ClassifyError::InvalidParams(_) => Self::invalid(e.to_string()),
            ClassifyError::EmptyIndex | ClassifyError::CorpusExhausted { .. } => Self::conflict(e.to_string()),
            ClassifyError::Shape(s) => s.into(),
        }
    }
}

impl From<StyleError> for ApiError {
    fn from(e: StyleError) -> Self {
        match e {
            StyleError::MaskMismatch { .. } | StyleError::FaceCount { .. } => Self::internal(e),
            _ => Self::invalid(e.to_string()),
        }
    }
}
