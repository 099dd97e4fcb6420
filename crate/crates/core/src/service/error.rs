use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use crate::backends::BackendError;
use crate::executor::ExecError;
use crate::planner::PlanError;

/// Machine-readable error codes of the HTTP API.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorCode {
    BadRequest,
    BadImage,
    NoTemplateMatch,
    AmbiguousSelector,
    InvalidProgram,
    PlannerUnavailable,
    NotFound,
    IndexOutOfRange,
    NoPlanSelected,
    ProgramComplete,
    NothingToRepeat,
    UseBeforeDef,
    TypeMismatch,
    ProviderError,
    GeometryError,
    IoError,
    InvalidOverride,
    Internal,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 18] = [
        ErrorCode::BadRequest,
        ErrorCode::BadImage,
        ErrorCode::NoTemplateMatch,
        ErrorCode::AmbiguousSelector,
        ErrorCode::InvalidProgram,
        ErrorCode::PlannerUnavailable,
        ErrorCode::NotFound,
        ErrorCode::IndexOutOfRange,
        ErrorCode::NoPlanSelected,
        ErrorCode::ProgramComplete,
        ErrorCode::NothingToRepeat,
        ErrorCode::UseBeforeDef,
        ErrorCode::TypeMismatch,
        ErrorCode::ProviderError,
        ErrorCode::GeometryError,
        ErrorCode::IoError,
        ErrorCode::InvalidOverride,
        ErrorCode::Internal,
    ];

    pub fn status(self) -> StatusCode {
        use ErrorCode::*;
        match self {
            BadRequest | BadImage | IndexOutOfRange | InvalidOverride => StatusCode::BAD_REQUEST,
            NotFound => StatusCode::NOT_FOUND,
            NoPlanSelected | ProgramComplete | NothingToRepeat => StatusCode::CONFLICT,
            NoTemplateMatch | AmbiguousSelector | InvalidProgram | UseBeforeDef | TypeMismatch | GeometryError => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            PlannerUnavailable | ProviderError => StatusCode::BAD_GATEWAY,
            IoError | Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// Body of every error response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub line: Option<usize>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), line: None }
    }

    /// Errors raised while building plans.
    pub fn from_plan(e: BackendError) -> Self {
        let code = match &e {
            BackendError::Plan(PlanError::NoTemplateMatch(_)) => ErrorCode::NoTemplateMatch,
            BackendError::Plan(PlanError::AmbiguousSelector { .. }) => ErrorCode::AmbiguousSelector,
            BackendError::Plan(PlanError::InvalidProgramReturned { diagnostics, .. })
            | BackendError::Plan(PlanError::InvalidPlan(diagnostics)) => {
                let first = diagnostics.first().map(|d| d.line);
                let detail: Vec<String> = diagnostics.iter().map(|d| d.to_string()).collect();
                return Self { code: ErrorCode::InvalidProgram, message: format!("{e}: {}", detail.join("; ")), line: first };
            }
            BackendError::Plan(PlanError::TransportError(_)) | BackendError::TransportError(_) => {
                ErrorCode::PlannerUnavailable
            }
            _ => ErrorCode::ProviderError,
        };
        Self::new(code, e.to_string())
    }
}

impl From<ExecError> for ApiError {
    fn from(e: ExecError) -> Self {
        let code = match &e {
            ExecError::EmptyImage => ErrorCode::BadImage,
            ExecError::ProgramComplete => ErrorCode::ProgramComplete,
            ExecError::NothingToRepeat => ErrorCode::NothingToRepeat,
            ExecError::UseBeforeDef { .. } => ErrorCode::UseBeforeDef,
            ExecError::TypeMismatch { .. } => ErrorCode::TypeMismatch,
            ExecError::ProviderError { .. } => ErrorCode::ProviderError,
            ExecError::Geometry { .. } => ErrorCode::GeometryError,
            ExecError::Io { .. } => ErrorCode::IoError,
            ExecError::InvalidOverride(_) => ErrorCode::InvalidOverride,
            ExecError::MissingArtifact(_) => ErrorCode::NotFound,
            ExecError::BadTrace(_) => ErrorCode::Internal,
        };
        Self { code, message: e.to_string(), line: e.line() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_serialize_as_names() {
        for code in ErrorCode::ALL {
            let s = serde_json::to_string(&code).unwrap();
            assert_eq!(serde_json::from_str::<ErrorCode>(&s).unwrap(), code);
            assert!(code.status().is_client_error() || code.status().is_server_error());
        }
        assert_eq!(serde_json::to_string(&ErrorCode::ProgramComplete).unwrap(), "\"ProgramComplete\"");
    }

    #[test]
    fn line_is_omitted_when_absent() {
        let v = serde_json::to_value(ApiError::new(ErrorCode::NotFound, "x")).unwrap();
        assert_eq!(v, serde_json::json!({ "code": "NotFound", "message": "x" }));
        let e: ApiError = ExecError::UseBeforeDef { line: 2, var: "A".into() }.into();
        assert_eq!(e.line, Some(2));
    }
}
