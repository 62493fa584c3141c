//! HTTP inference and sample-collection service.
//!
//! `POST /predict` takes a 48×48 PNG (`image/png`) or 2304 raw grayscale
//! bytes (`application/octet-stream`); `POST /samples` stores a labelled PNG
//! in the class-directory tree; `GET /health` reports the loaded model.
//! Every error response is JSON `{code, message}`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use axum::body::{to_bytes, Body};
use axum::extract::{FromRequest, Multipart, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use fer_core::augment::AugmentPolicy;
use fer_core::eval::{argmax, predict_image};
use fer_core::model::ModelGraph;
use fer_core::{EmotionLabel, GrayImage, IMAGE_PIXELS, IMAGE_SIDE};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use crate::imageio;

/// Request bodies above this size are refused with 413.
pub const MAX_BODY_BYTES: usize = 1 << 20;

/// Seed for `?tta=1` so repeated requests agree.
pub const TTA_SEED: u64 = 0x7EA5_EED;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResponse {
    pub probabilities: Vec<f32>,
    pub label: EmotionLabel,
    /// Forward pass time only, excluding decoding and transport.
    pub latency_ms: f64,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model_id: String,
    pub param_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredSample {
    /// Path relative to the data root, `<label>/<file>.png`.
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
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
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            code: self.code.into(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub struct LoadedModel {
    pub model: ModelGraph<f32>,
    pub model_id: String,
}

impl LoadedModel {
    /// Identifies weights by architecture and a hash of the file bytes.
    pub fn from_weights_bytes(bytes: &[u8]) -> crate::Result<Self> {
        use std::hash::{Hash, Hasher};
        let (model, _) = crate::weights::from_bytes(bytes)?;
        let mut h = std::collections::hash_map::DefaultHasher::new();
        bytes.hash(&mut h);
        let model_id = format!("{}-{:016x}", model.arch(), h.finish());
        Ok(Self { model, model_id })
    }
}

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Class-directory root for `/samples`; `None` disables collection.
    pub data_root: Option<PathBuf>,
    /// Allowed CORS origins; empty allows any.
    pub cors_origins: Vec<String>,
}

struct SampleStore {
    root: PathBuf,
    counter: Mutex<u64>,
}

struct Inner {
    model: OnceLock<Arc<LoadedModel>>,
    samples: Option<SampleStore>,
    policy: AugmentPolicy,
    cors_origins: Vec<String>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self(Arc::new(Inner {
            model: OnceLock::new(),
            samples: config.data_root.map(|root| SampleStore {
                root,
                counter: Mutex::new(0),
            }),
            policy: AugmentPolicy::default(),
            cors_origins: config.cors_origins,
        }))
    }

    /// Installs the model; later calls are ignored.
    pub fn set_model(&self, model: LoadedModel) {
        let _ = self.0.model.set(Arc::new(model));
    }

    fn model(&self) -> ApiResult<Arc<LoadedModel>> {
        self.0
            .model
            .get()
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "loading", "model weights are still loading"))
    }
}

pub fn router(state: AppState) -> Router {
    let cors = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    let cors = if state.0.cors_origins.is_empty() {
        cors.allow_origin(Any)
    } else {
        let origins: Vec<HeaderValue> = state.0.cors_origins.iter().filter_map(|o| o.parse().ok()).collect();
        cors.allow_origin(AllowOrigin::list(origins))
    };
    Router::new()
        .route("/predict", post(predict))
        .route("/samples", post(samples))
        .route("/health", get(health))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") })
        .method_not_allowed_fallback(|| async {
            ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed")
        })
        .layer(cors)
        .with_state(state)
}

/// Serves until the listener fails or ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn health(State(state): State<AppState>) -> ApiResult<Json<Health>> {
    let m = state.model()?;
    Ok(Json(Health {
        status: "ok".into(),
        model_id: m.model_id.clone(),
        param_count: m.model.param_count(),
    }))
}

async fn read_body(headers: &HeaderMap, body: Body) -> ApiResult<axum::body::Bytes> {
    let too_large = || {
        ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "too_large",
            format!("request body exceeds {MAX_BODY_BYTES} bytes"),
        )
    };
    let declared = headers
        .get(header::CONTENT_LENGTH)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<usize>().ok());
    if declared.is_some_and(|n| n > MAX_BODY_BYTES) {
        return Err(too_large());
    }
    to_bytes(body, MAX_BODY_BYTES).await.map_err(|_| too_large())
}

fn media_type(headers: &HeaderMap) -> String {
    headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.split(';').next())
        .unwrap_or("")
        .trim()
        .to_ascii_lowercase()
}

fn check_size(img: GrayImage) -> ApiResult<GrayImage> {
    if img.width() != IMAGE_SIDE || img.height() != IMAGE_SIDE {
        return Err(ApiError::bad_request(
            "bad_dimensions",
            format!("expected 48x48, got {}x{}", img.width(), img.height()),
        ));
    }
    Ok(img)
}

fn decode_png(bytes: &[u8]) -> ApiResult<GrayImage> {
    let img = imageio::decode_png_gray(bytes)
        .map_err(|e| ApiError::bad_request("undecodable", format!("cannot decode PNG: {e}")))?;
    check_size(img)
}

fn flag(query: &HashMap<String, String>, key: &str) -> ApiResult<bool> {
    match query.get(key).map(|s| s.to_ascii_lowercase()) {
        None => Ok(false),
        Some(v) if v == "1" || v == "true" => Ok(true),
        Some(v) if v == "0" || v == "false" || v.is_empty() => Ok(false),
        Some(v) => Err(ApiError::bad_request("bad_query", format!("{key} must be 0 or 1, got {v:?}"))),
    }
}

async fn predict(
    State(state): State<AppState>,
    Query(query): Query<HashMap<String, String>>,
    headers: HeaderMap,
    body: Body,
) -> ApiResult<Json<PredictionResponse>> {
    let tta = flag(&query, "tta")?;
    let bytes = read_body(&headers, body).await?;
    let image = match media_type(&headers).as_str() {
        "image/png" => decode_png(&bytes)?,
        "application/octet-stream" => {
            if bytes.len() != IMAGE_PIXELS {
                return Err(ApiError::bad_request(
                    "bad_dimensions",
                    format!("expected 48x48 ({IMAGE_PIXELS} raw bytes), got {} bytes", bytes.len()),
                ));
            }
            let px = bytes.iter().map(|&b| b as f32 / 255.0).collect();
            GrayImage::new(IMAGE_SIDE, IMAGE_SIDE, px).expect("length checked")
        }
        other => {
            return Err(ApiError::new(
                StatusCode::UNSUPPORTED_MEDIA_TYPE,
                "unsupported_media_type",
                format!("Content-Type must be image/png or application/octet-stream, got {other:?}"),
            ))
        }
    };
    let loaded = state.model()?;
    let policy = state.0.policy;
    let (probabilities, latency_ms) = tokio::task::spawn_blocking(move || {
        let start = Instant::now();
        let p = predict_image(&loaded.model, &image, tta.then_some((&policy, TTA_SEED)));
        (p, start.elapsed().as_secs_f64() * 1e3)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
    let probabilities =
        probabilities.map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "inference", e.to_string()))?;
    Ok(Json(PredictionResponse {
        label: EmotionLabel::ALL[argmax(&probabilities)],
        probabilities,
        latency_ms,
        model_id: state.model()?.model_id.clone(),
    }))
}

#[derive(Deserialize)]
struct JsonSample {
    label: String,
    /// Base64 PNG.
    image: String,
}

fn parse_label(label: &str) -> ApiResult<EmotionLabel> {
    label.trim().parse().map_err(|_| {
        let valid: Vec<&str> = EmotionLabel::ALL.iter().map(|l| l.name()).collect();
        ApiError::bad_request(
            "unknown_label",
            format!("unknown label {label:?}; valid labels: {}", valid.join(", ")),
        )
    })
}

async fn read_multipart(req: Request) -> ApiResult<(String, Vec<u8>)> {
    let mut mp = Multipart::from_request(req, &())
        .await
        .map_err(|e| ApiError::bad_request("bad_multipart", e.body_text()))?;
    let (mut label, mut image) = (None, None);
    while let Some(field) = mp
        .next_field()
        .await
        .map_err(|e| ApiError::new(e.status(), "bad_multipart", e.body_text()))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let data = field
            .bytes()
            .await
            .map_err(|e| ApiError::new(e.status(), "bad_multipart", e.body_text()))?;
        match name.as_str() {
            "label" => label = Some(String::from_utf8_lossy(&data).into_owned()),
            "image" => image = Some(data.to_vec()),
            _ => {}
        }
    }
    match (label, image) {
        (Some(l), Some(i)) => Ok((l, i)),
        _ => Err(ApiError::bad_request("missing_field", "multipart body needs `label` and `image` fields")),
    }
}

async fn samples(State(state): State<AppState>, req: Request) -> ApiResult<(StatusCode, Json<StoredSample>)> {
    let store = state
        .0
        .samples
        .as_ref()
        .ok_or_else(|| ApiError::new(StatusCode::FORBIDDEN, "disabled", "sample collection is disabled"))?;
    let headers = req.headers().clone();
    let (label, png) = match media_type(&headers).as_str() {
        "application/json" => {
            let bytes = read_body(&headers, req.into_body()).await?;
            let body: JsonSample = serde_json::from_slice(&bytes)
                .map_err(|e| ApiError::bad_request("bad_json", format!("expected {{label, image}}: {e}")))?;
            let png = base64::engine::general_purpose::STANDARD
                .decode(body.image.trim())
                .map_err(|e| ApiError::bad_request("bad_base64", e.to_string()))?;
            (body.label, png)
        }
        "multipart/form-data" => {
            if headers
                .get(header::CONTENT_LENGTH)
                .and_then(|v| v.to_str().ok()?.parse::<usize>().ok())
                .is_some_and(|n| n > MAX_BODY_BYTES)
            {
                return Err(ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "too_large", "request body too large"));
            }
            read_multipart(req).await?
        }
        other => {
            return Err(ApiError::new(
                StatusCode::UNSUPPORTED_MEDIA_TYPE,
                "unsupported_media_type",
                format!("Content-Type must be application/json or multipart/form-data, got {other:?}"),
            ))
        }
    };
    let label = parse_label(&label)?;
    let image = decode_png(&png)?;
    let id = store_sample(store, label, &image)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "write_failed", e.to_string()))?;
    Ok((StatusCode::CREATED, Json(StoredSample { id })))
}

/// Writes under `<root>/<label>/<millis>-<n>.png`. The store lock serializes
/// writers; `create_new` guards against names left by earlier runs.
async fn store_sample(store: &SampleStore, label: EmotionLabel, image: &GrayImage) -> std::io::Result<String> {
    let png = imageio::encode_gray_png(image);
    let mut counter = store.counter.lock().await;
    let dir = store.root.join(label.name());
    std::fs::create_dir_all(&dir)?;
    let millis = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis());
    loop {
        let name = format!("{millis:013}-{:06}.png", *counter);
        *counter += 1;
        let path = dir.join(&name);
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                use std::io::Write;
                f.write_all(&png)?;
                return Ok(format!("{}/{name}", label.name()));
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e),
        }
    }
}

/// Default sample root: `FER_DATA_ROOT`, else `./data`.
pub fn default_data_root() -> PathBuf {
    std::env::var_os("FER_DATA_ROOT").map_or_else(|| Path::new("data").to_path_buf(), PathBuf::from)
}
