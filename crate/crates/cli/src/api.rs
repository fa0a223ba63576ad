//! JSON envelopes exchanged with the HTTP service.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use knnvault::{ClassificationResult, EmbeddingRecord, Error};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryRequest {
    pub vector: Vec<f32>,
    #[serde(default)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryResponse {
    pub generation: u64,
    pub result: ClassificationResult,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InsertRequest {
    pub records: Vec<EmbeddingRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InsertResponse {
    pub inserted: usize,
    pub generation: u64,
}

/// Either explicit ids or a `label=X` / `source_tag=Y` predicate.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DeleteRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ids: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeleteResponse {
    pub deleted: usize,
    pub not_found: Vec<u64>,
    pub generation: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsResponse {
    pub name: String,
    pub count: usize,
    pub dimension: usize,
    pub labels: Vec<String>,
    pub generation: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub offending_field: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>, field: Option<&str>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.to_owned(),
                message: message.into(),
                offending_field: field.map(str::to_owned),
            },
        }
    }

    pub fn bad_json(err: serde_json::Error) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "INVALID_REQUEST", err.to_string(), Some("body"))
    }

    /// Maps a store/engine error; `field` names the request field the
    /// error most likely stems from.
    pub fn from_error(err: Error, field: &str) -> Self {
        let status = match &err {
            Error::UnknownCollection { .. } => StatusCode::NOT_FOUND,
            Error::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        let field = match &err {
            Error::InvalidArgument { field, .. } => Some(field.clone()),
            Error::UnknownCollection { .. } | Error::Io { .. } => None,
            _ => Some(field.to_owned()),
        };
        Self {
            status,
            body: ErrorBody {
                code: err.code().to_owned(),
                message: err.to_string(),
                offending_field: field,
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
