use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use xeff_core::api::ErrorBody;
use xeff_core::Error;

#[derive(Debug)]
pub enum ApiError {
    NoSession(String),
    Conflict(String),
    Core(Error),
    Internal(String),
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::Core(e)
    }
}

impl ApiError {
    fn parts(&self) -> (StatusCode, &'static str, String) {
        match self {
            ApiError::NoSession(id) => (StatusCode::NOT_FOUND, "unknown_session", format!("no session `{id}`")),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, "conflict", m.clone()),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", m.clone()),
            ApiError::Core(e) => {
                let (status, kind) = match e {
                    Error::GroupPolicy => (StatusCode::FORBIDDEN, "group_policy"),
                    Error::UnknownItem(_) => (StatusCode::NOT_FOUND, "unknown_item"),
                    Error::Empty(_) => (StatusCode::CONFLICT, "empty"),
                    Error::InvalidArgument(_)
                    | Error::ShapeMismatch { .. }
                    | Error::NonFinite(_)
                    | Error::DuplicateItem(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_argument"),
                    _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
                };
                (status, kind, e.to_string())
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind, error) = self.parts();
        if status.is_server_error() {
            log::error!("{error}");
        }
        (
            status,
            Json(ErrorBody {
                kind: kind.to_string(),
                error,
            }),
        )
            .into_response()
    }
}
