use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use infomdp_harness::{ConfigError, HarnessError};
use serde::{Deserialize, Serialize};

/// The error body every endpoint returns on failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, body: ErrorBody { code: code.into(), message: message.into(), field: None } }
    }

    pub fn with_field(mut self, field: impl Into<String>) -> Self {
        self.body.field = Some(field.into());
        self
    }

    pub fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("no session {id}"))
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    /// A config problem, with its field path nested under `prefix`.
    pub fn config(err: ConfigError, prefix: &str) -> Self {
        let field = match err.field() {
            Some(f) => format!("{prefix}.{f}"),
            None => prefix.to_string(),
        };
        let message = match &err {
            ConfigError::Invalid { message, .. } => message.clone(),
            other => other.to_string(),
        };
        Self::new(StatusCode::BAD_REQUEST, "invalid_config", message).with_field(field)
    }

    /// Parses a JSON request body, reporting the path of the first bad field.
    pub fn parse<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
        let de = &mut serde_json::Deserializer::from_slice(bytes);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let err = Self::new(StatusCode::BAD_REQUEST, "bad_request", e.into_inner().to_string());
            if path == "." {
                err
            } else {
                err.with_field(path)
            }
        })
    }
}

impl From<HarnessError> for ApiError {
    fn from(e: HarnessError) -> Self {
        use infomdp_core::acquisition::AcquisitionError;
        use infomdp_core::imdp::TransitionError;
        match e {
            HarnessError::Config(c) => ApiError::config(c, "config"),
            HarnessError::Acquisition(AcquisitionError::NoCandidates) => {
                ApiError::new(StatusCode::CONFLICT, "no_candidates", "no legal query is available")
            }
            HarnessError::Transition(TransitionError::Contract(c)) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_response", c.to_string()).with_field("response")
            }
            other => ApiError::internal(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
