//! HTTP front end for the recognition pipeline, plus the readings store.
//!
//! Routes:
//!
//! * `GET  /v1/health`
//! * `POST /v1/recognize` (multipart: `image`, `type`, optional `bounds`)
//! * `POST /v1/readings`, `GET /v1/readings?type=&limit=`
//! * everything else falls through to the static UI directory, if any.

pub mod readings;

use std::collections::HashMap;
use std::future::Future;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::multipart::MultipartError;
use axum::extract::{DefaultBodyLimit, Multipart, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::Deserialize;
use serde_json::json;
use sevenseg::classifiers::Model;
use sevenseg::imaging::ImagingError;
use sevenseg::pipeline::{recognize_bytes, RecognizeError, RecognizeOptions};
use sevenseg::{Bounds, ReadingPrediction};
use tokio::net::TcpListener;
use tower_http::services::ServeDir;

pub use readings::{
    is_reading_value, MeasurementType, NewReading, Reading, ReadingStore, StoreError,
};

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_MAX_UPLOAD_BYTES: usize = 5 * 1024 * 1024;
pub const DEFAULT_LIST_LIMIT: usize = 100;

/// Room for multipart framing and the small text parts on top of the image.
const MULTIPART_OVERHEAD: usize = 64 * 1024;

struct Shared {
    model: Model,
    options: RecognizeOptions,
    store: ReadingStore,
    max_upload_bytes: usize,
}

/// Immutable after startup apart from the store's internal log.
#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    pub fn new(
        model: Model,
        options: RecognizeOptions,
        store: ReadingStore,
        max_upload_bytes: usize,
    ) -> Self {
        Self(Arc::new(Shared {
            model,
            options,
            store,
            max_upload_bytes,
        }))
    }

    pub fn store(&self) -> &ReadingStore {
        &self.0.store
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal_error", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({ "error": self.code, "message": self.message })),
        )
            .into_response()
    }
}

impl From<MultipartError> for ApiError {
    fn from(e: MultipartError) -> Self {
        let status = e.status();
        let code = if status == StatusCode::PAYLOAD_TOO_LARGE {
            "payload_too_large"
        } else {
            "malformed_multipart"
        };
        Self::new(status, code, e.body_text())
    }
}

impl From<RecognizeError> for ApiError {
    fn from(e: RecognizeError) -> Self {
        let unprocessable =
            |code| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, e.to_string());
        match &e {
            RecognizeError::Imaging(ImagingError::UnsupportedFormat) => ApiError::new(
                StatusCode::UNSUPPORTED_MEDIA_TYPE,
                "unsupported_format",
                e.to_string(),
            ),
            RecognizeError::Imaging(ImagingError::OutOfBounds { .. }) => {
                ApiError::bad_request("malformed_bounds", e.to_string())
            }
            RecognizeError::Imaging(_) => unprocessable("invalid_image"),
            RecognizeError::Blurry { .. } => unprocessable("blurry_image"),
            RecognizeError::NoDigits => unprocessable("no_digits_found"),
            RecognizeError::TooManyDigits(_) => unprocessable("too_many_digits"),
            RecognizeError::Classifier(_) => ApiError::internal(e.to_string()),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Invalid(msg) => ApiError::bad_request("invalid_reading", msg),
            other => ApiError::internal(other.to_string()),
        }
    }
}

pub fn router(state: AppState, static_dir: Option<&Path>) -> Router {
    let body_limit = state.0.max_upload_bytes + MULTIPART_OVERHEAD;
    let api = Router::new()
        .route("/v1/health", get(health))
        .route(
            "/v1/recognize",
            post(recognize).layer(DefaultBodyLimit::max(body_limit)),
        )
        .route("/v1/readings", post(store_reading).get(list_readings))
        .with_state(state);
    match static_dir {
        Some(dir) if dir.is_dir() => api.fallback_service(ServeDir::new(dir)),
        _ => api,
    }
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "model_loaded": true }))
}

async fn recognize(
    State(state): State<AppState>,
    mut form: Multipart,
) -> Result<Json<ReadingPrediction>, ApiError> {
    let mut image: Option<Bytes> = None;
    let mut kind: Option<MeasurementType> = None;
    let mut bounds: Option<Bounds> = None;
    while let Some(field) = form.next_field().await? {
        match field.name() {
            Some("image") => {
                let bytes = field.bytes().await?;
                if bytes.len() > state.0.max_upload_bytes {
                    return Err(ApiError::new(
                        StatusCode::PAYLOAD_TOO_LARGE,
                        "payload_too_large",
                        format!(
                            "image is {} bytes; limit is {}",
                            bytes.len(),
                            state.0.max_upload_bytes
                        ),
                    ));
                }
                image = Some(bytes);
            }
            Some("type") => {
                let text = field.text().await?;
                kind = Some(text.trim().parse().map_err(|e: readings::UnknownType| {
                    ApiError::bad_request("invalid_type", e.to_string())
                })?);
            }
            Some("bounds") => {
                let text = field.text().await?;
                if !text.trim().is_empty() {
                    bounds = Some(text.trim().parse().map_err(|e: ImagingError| {
                        ApiError::bad_request("malformed_bounds", e.to_string())
                    })?);
                }
            }
            _ => {}
        }
    }
    let image = image.ok_or_else(|| {
        ApiError::bad_request("missing_image", "multipart part \"image\" is required")
    })?;
    let kind = kind.ok_or_else(|| {
        ApiError::bad_request("missing_type", "multipart part \"type\" is required")
    })?;

    let started = Instant::now();
    let opts = RecognizeOptions {
        bounds,
        ..state.0.options.clone()
    };
    let worker = state.clone();
    let result =
        tokio::task::spawn_blocking(move || recognize_bytes(&worker.0.model, &image, &opts))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?;
    match &result {
        Ok(r) => {
            tracing::info!(%kind, digits = %r.digits, elapsed_ms = started.elapsed().as_millis() as u64, "recognized")
        }
        Err(e) => tracing::info!(%kind, error = %e, "recognition rejected"),
    }
    Ok(Json(result?))
}

#[derive(Deserialize)]
struct NewReadingBody {
    #[serde(rename = "type")]
    kind: String,
    value: String,
    predicted: String,
    timestamp: Option<String>,
}

async fn store_reading(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<(StatusCode, Json<Reading>), ApiError> {
    let body: NewReadingBody = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request("invalid_body", e.to_string()))?;
    let kind = body
        .kind
        .parse()
        .map_err(|e: readings::UnknownType| ApiError::bad_request("invalid_type", e.to_string()))?;
    let timestamp = match body.timestamp {
        Some(t) => DateTime::parse_from_rfc3339(&t)
            .map_err(|e| ApiError::bad_request("invalid_timestamp", format!("{t:?}: {e}")))?
            .with_timezone(&Utc),
        None => Utc::now(),
    };
    let new = NewReading {
        kind,
        value: body.value,
        predicted: body.predicted,
        timestamp,
    };
    let reading = tokio::task::spawn_blocking(move || state.store().append(new))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok((StatusCode::CREATED, Json(reading)))
}

async fn list_readings(
    State(state): State<AppState>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Json<Vec<Reading>>, ApiError> {
    let kind = match params
        .get("type")
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
    {
        Some(t) => Some(t.parse().map_err(|e: readings::UnknownType| {
            ApiError::bad_request("invalid_type", e.to_string())
        })?),
        None => None,
    };
    let limit = match params
        .get("limit")
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
    {
        Some(l) => l.parse().map_err(|_| {
            ApiError::bad_request(
                "invalid_limit",
                format!("limit must be a nonnegative integer, got {l:?}"),
            )
        })?,
        None => DEFAULT_LIST_LIMIT,
    };
    Ok(Json(state.store().list(kind, limit)))
}

/// Serves `app` until `shutdown` resolves, then drains open connections.
pub async fn serve(
    listener: TcpListener,
    app: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
}

/// Resolves on Ctrl-C, or SIGTERM on Unix.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
