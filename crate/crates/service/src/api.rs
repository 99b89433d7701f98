use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use journey_core::clustering::kmedoids;
use journey_core::counterfactual::find_counterfactual;
use journey_core::ingest::{cleanse, cooccurrence, describe, load, parse_query, CleansingReport, Format, Rejection};
use journey_core::prediction::{classify_value, Neighbor, DEFAULT_THRESHOLD};
use journey_core::{
    mds, CfQuery, Dataset, DistanceConfig, Embedding, Error, Journey, Kernel, Outcome, StageMask, StageWeights,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::state::{AppState, Snapshot};

pub const DEFAULT_K: usize = 6;
pub const DEFAULT_KNN_K: usize = 5;
pub const DEFAULT_LAMBDA: f64 = 1.0;

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    NoDataset,
    Rejected(Rejection),
    Unprocessable(String),
    EmptyUpload(CleansingReport),
    Internal(String),
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::SingleClassDataset
            | Error::NoCandidates
            | Error::EmptyModel
            | Error::TooFewPoints(_)
            | Error::EmptyDataset
            | Error::MissingOutcome => ApiError::Unprocessable(e.to_string()),
            Error::NoConvergence { .. } => ApiError::Internal(e.to_string()),
            other => ApiError::BadRequest(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::BadRequest(msg) => (StatusCode::BAD_REQUEST, json!({ "error": msg })),
            ApiError::NoDataset => (StatusCode::CONFLICT, json!({ "error": "no dataset loaded" })),
            ApiError::Rejected(r) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": "invalid journey", "reason": r.reason.code(), "position": r.position }),
            ),
            ApiError::Unprocessable(msg) => (StatusCode::UNPROCESSABLE_ENTITY, json!({ "error": msg })),
            ApiError::EmptyUpload(report) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": "no valid journeys", "report": report }),
            ),
            ApiError::Internal(msg) => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": msg })),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn loaded(snapshot: &Snapshot) -> Result<Arc<Dataset>, ApiError> {
    snapshot.dataset.clone().ok_or(ApiError::NoDataset)
}

/// Metric parameters shared by the read endpoints.
#[derive(Debug, Default, Deserialize)]
pub struct MetricParams {
    pub w1: Option<String>,
    pub w2: Option<String>,
    pub w3: Option<String>,
    pub kernel: Option<String>,
}

impl MetricParams {
    fn config(&self) -> Result<DistanceConfig, ApiError> {
        let weights = StageWeights::parse(
            self.w1.as_deref().unwrap_or("2"),
            self.w2.as_deref().unwrap_or("1"),
            self.w3.as_deref().unwrap_or("10"),
        )?;
        let kernel = match &self.kernel {
            Some(k) => k.parse::<Kernel>()?,
            None => Kernel::Levenshtein,
        };
        Ok(DistanceConfig::new(weights, kernel))
    }
}

pub async fn health(State(state): State<AppState>) -> Json<serde_json::Value> {
    let snap = state.snapshot();
    Json(json!({
        "status": "ok",
        "version": journey_core::VERSION,
        "dataset_version": snap.version,
        "journeys": snap.dataset.as_ref().map_or(0, |d| d.len()),
    }))
}

pub async fn stats(State(state): State<AppState>) -> Result<Json<serde_json::Value>, ApiError> {
    let snap = state.snapshot();
    let data = loaded(&snap)?;
    Ok(Json(json!({
        "dataset_version": snap.version,
        "stats": describe(&data),
        "cooccurrence": cooccurrence(&data),
        "report": snap.report,
    })))
}

#[derive(Debug, Deserialize)]
pub struct UploadParams {
    pub format: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct UploadResponse {
    pub version: u64,
    pub report: CleansingReport,
}

fn upload_format(params: &UploadParams, headers: &HeaderMap, body: &str) -> Result<Format, ApiError> {
    if let Some(f) = &params.format {
        return f.parse::<Format>().map_err(ApiError::from);
    }
    let content_type = headers
        .get(axum::http::header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("");
    if content_type.contains("ndjson") || content_type.contains("jsonl") || content_type.contains("json") {
        return Ok(Format::Jsonl);
    }
    if content_type.contains("csv") {
        return Ok(Format::Csv);
    }
    Ok(if body.trim_start().starts_with('{') {
        Format::Jsonl
    } else {
        Format::Csv
    })
}

pub async fn upload(
    State(state): State<AppState>,
    Query(params): Query<UploadParams>,
    headers: HeaderMap,
    body: String,
) -> ApiResult<UploadResponse> {
    let format = upload_format(&params, &headers, &body)?;
    let records = load(body.as_bytes(), format)?;
    let (dataset, report) = cleanse(&records, "upload");
    if report.accepted == 0 {
        return Err(ApiError::EmptyUpload(report));
    }
    let dataset = dataset?;
    let version = state
        .replace(dataset, report.clone())
        .map_err(|e| ApiError::Internal(format!("persisting snapshot: {e}")))?;
    tracing::info!(version, accepted = report.accepted, "dataset replaced");
    Ok(Json(UploadResponse { version, report }))
}

// not flattened: serde_urlencoded cannot read numbers through `flatten`
#[derive(Debug, Deserialize)]
pub struct ClusterParams {
    pub w1: Option<String>,
    pub w2: Option<String>,
    pub w3: Option<String>,
    pub kernel: Option<String>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
}

impl ClusterParams {
    fn metric(&self) -> MetricParams {
        MetricParams {
            w1: self.w1.clone(),
            w2: self.w2.clone(),
            w3: self.w3.clone(),
            kernel: self.kernel.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ClustersResponse {
    pub dataset_version: u64,
    pub config: DistanceConfig,
    #[serde(flatten)]
    pub result: journey_core::ClusteringResult,
}

struct Clustered {
    snap: Arc<Snapshot>,
    data: Arc<Dataset>,
    config: DistanceConfig,
    matrix: Arc<journey_core::DistanceMatrix>,
    result: journey_core::ClusteringResult,
}

fn cluster(state: &AppState, params: &ClusterParams) -> Result<Clustered, ApiError> {
    let snap = state.snapshot();
    let data = loaded(&snap)?;
    let config = params.metric().config()?;
    let matrix = state.matrix(&snap, &data, &config, StageMask::ALL)?;
    let result = kmedoids(&matrix, params.k.unwrap_or(DEFAULT_K), params.seed.unwrap_or(0))?;
    Ok(Clustered { snap, data, config, matrix, result })
}

pub async fn clusters(State(state): State<AppState>, Query(params): Query<ClusterParams>) -> ApiResult<ClustersResponse> {
    let Clustered { snap, config, result, .. } = cluster(&state, &params)?;
    Ok(Json(ClustersResponse {
        dataset_version: snap.version,
        config,
        result,
    }))
}

#[derive(Debug, Serialize)]
pub struct EmbeddingResponse {
    pub dataset_version: u64,
    pub config: DistanceConfig,
    #[serde(flatten)]
    pub embedding: Embedding,
    pub clusters: Vec<usize>,
    pub medoids: Vec<usize>,
    pub outcomes: Vec<Outcome>,
}

pub async fn embedding(State(state): State<AppState>, Query(params): Query<ClusterParams>) -> ApiResult<EmbeddingResponse> {
    let Clustered { snap, data, config, matrix, result } = cluster(&state, &params)?;
    let embedding = mds(&matrix)?;
    Ok(Json(EmbeddingResponse {
        dataset_version: snap.version,
        config,
        embedding,
        clusters: result.assignment,
        medoids: result.medoids,
        outcomes: data.labels(),
    }))
}

#[derive(Debug, Deserialize)]
pub struct PredictRequest {
    pub items: Vec<String>,
    #[serde(alias = "k_prime", alias = "knn_k")]
    pub k: Option<usize>,
    #[serde(flatten)]
    pub metric: MetricParams,
}

#[derive(Debug, Serialize)]
pub struct PredictResponse {
    pub dataset_version: u64,
    pub y_hat: f64,
    pub label: Outcome,
    pub k: usize,
    pub query: Journey,
    pub neighbors: Vec<Neighbor>,
}

fn parse_items(items: &[String]) -> Result<Journey, ApiError> {
    parse_query("query", items).map_err(ApiError::Rejected)
}

pub async fn predict(State(state): State<AppState>, Json(req): Json<PredictRequest>) -> ApiResult<PredictResponse> {
    let query = parse_items(&req.items)?;
    let snap = state.snapshot();
    let data = loaded(&snap)?;
    let config = req.metric.config()?;
    let k = req.k.unwrap_or(DEFAULT_KNN_K);
    let model = state.model(&snap, &data, &config, k)?;
    let neighbors = model.neighbors(&query);
    let y_hat = model.predict_value(&query);
    Ok(Json(PredictResponse {
        dataset_version: snap.version,
        y_hat,
        label: classify_value(y_hat, DEFAULT_THRESHOLD),
        k,
        query,
        neighbors,
    }))
}

#[derive(Debug, Deserialize)]
pub struct CounterfactualRequest {
    pub items: Vec<String>,
    pub y_obj: u8,
    pub lambda: Option<f64>,
    #[serde(alias = "k_prime", alias = "knn_k")]
    pub k: Option<usize>,
    /// Stages entering the distance, e.g. `["st1", "st2"]`.
    pub mask: Option<Vec<String>>,
    #[serde(flatten)]
    pub metric: MetricParams,
}

pub async fn counterfactual(
    State(state): State<AppState>,
    Json(req): Json<CounterfactualRequest>,
) -> ApiResult<serde_json::Value> {
    let lambda = req.lambda.unwrap_or(DEFAULT_LAMBDA);
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(ApiError::BadRequest(format!("lambda must be non-negative, got {lambda}")));
    }
    let y_obj = Outcome::from_bit(req.y_obj).ok_or_else(|| ApiError::BadRequest("y_obj must be 0 or 1".into()))?;
    let base = parse_items(&req.items)?;
    let mask = match &req.mask {
        Some(stages) => stages.join(",").parse::<StageMask>()?,
        None => StageMask::PRE_PURCHASE,
    };
    let snap = state.snapshot();
    let data = loaded(&snap)?;
    let config = req.metric.config()?;
    let k = req.k.unwrap_or(DEFAULT_KNN_K).min(data.len());
    let model = state.model(&snap, &data, &config, k)?;
    let query = CfQuery::new(base, y_obj, lambda).with_mask(mask);
    let result = find_counterfactual(&data, &model, &query)?;
    let mut body = serde_json::to_value(&result).map_err(|e| ApiError::Internal(e.to_string()))?;
    body["dataset_version"] = json!(snap.version);
    Ok(Json(body))
}
