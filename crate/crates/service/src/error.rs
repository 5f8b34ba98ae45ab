use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use chartalk_core::chart::ChartError;
use chartalk_core::ingest::IngestError;
use serde::{Deserialize, Serialize};

/// Error body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("{}", .0.message)]
    BadRequest(ErrorBody),
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        ApiError::BadRequest(ErrorBody {
            code: code.into(),
            message: message.into(),
            column: None,
        })
    }

    pub fn body(&self) -> ErrorBody {
        match self {
            ApiError::BadRequest(b) => b.clone(),
            ApiError::NotFound(_) => ErrorBody {
                code: "not_found".into(),
                message: self.to_string(),
                column: None,
            },
            ApiError::Conflict(_) => ErrorBody {
                code: "conflict".into(),
                message: self.to_string(),
                column: None,
            },
            ApiError::Internal(_) => ErrorBody {
                code: "internal".into(),
                message: self.to_string(),
                column: None,
            },
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<ChartError> for ApiError {
    fn from(e: ChartError) -> Self {
        let message = e.to_string();
        let (code, column) = match e {
            ChartError::UnknownColumn(c) | ChartError::Ingest(IngestError::UnknownColumn(c)) => ("unknown_column", Some(c)),
            ChartError::Ingest(IngestError::WrongKind { column, .. }) => ("wrong_column_kind", Some(column)),
            ChartError::Ingest(IngestError::Encoding) => ("invalid_encoding", None),
            ChartError::Ingest(IngestError::Malformed { .. }) => ("malformed_csv", None),
            ChartError::Ingest(IngestError::Empty) => ("empty_dataset", None),
            ChartError::Ingest(IngestError::EmptyGroup(_)) => ("empty_group", None),
            ChartError::InvalidOption { .. } | ChartError::OptionValue { .. } => ("invalid_option", None),
            ChartError::NoGroups => ("no_groups", None),
            ChartError::DuplicateGroup(_) => ("duplicate_group", None),
            ChartError::Stats { .. } => ("statistics", None),
            ChartError::NotFound(_) => ("unknown_element", None),
        };
        ApiError::BadRequest(ErrorBody {
            code: code.into(),
            message,
            column,
        })
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        ChartError::Ingest(e).into()
    }
}

impl From<crate::store::StoreError> for ApiError {
    fn from(e: crate::store::StoreError) -> Self {
        ApiError::Internal(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if let ApiError::Internal(m) = &self {
            tracing::error!("{m}");
        }
        (self.status(), Json(serde_json::json!({ "error": self.body() }))).into_response()
    }
}
