use serde::{Deserialize, Serialize};
use thiserror::Error;

use irp_core::instance::InstanceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    UnknownSession,
    UnknownRun,
    InvalidInstance,
    InvalidRequest,
    MissingReferencePoint,
    RunLimit,
    RunActive,
    UnknownFormat,
    NoPreferredSolution,
    Storage,
}

/// Error body of every failed API call: `{code, message, field?}`.
#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("{message}")]
pub struct ServiceError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl ServiceError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            field: None,
        }
    }

    pub fn with_field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }

    pub fn invalid(field: &str, message: impl Into<String>) -> Self {
        Self::new(ErrorCode::InvalidRequest, message).with_field(field)
    }

    pub fn storage(err: impl std::fmt::Display) -> Self {
        Self::new(ErrorCode::Storage, err.to_string())
    }
}

impl From<InstanceError> for ServiceError {
    fn from(err: InstanceError) -> Self {
        let field = match &err {
            InstanceError::Invalid { field, .. } | InstanceError::Parse { field, .. } => field.clone(),
            InstanceError::Generator(_) => "generator".to_string(),
        };
        Self::new(ErrorCode::InvalidInstance, err.to_string()).with_field(field)
    }
}
