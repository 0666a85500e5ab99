//! HTTP service backing the labeling UI.
//!
//! | method | path | purpose |
//! |--------|------|---------|
//! | GET | `/health` | liveness |
//! | GET | `/samples` | every sample id with its cluster and label state |
//! | GET | `/samples/{id}/window` | decimated traces, `?start&end&max_points&overlays` |
//! | GET | `/clusters` | cluster sizes and members (409 before a run exists) |
//! | GET | `/worksheet` | per-cluster labeling draw, `?n=7` (409 before a run exists) |
//! | GET | `/labels` | current label per sample |
//! | POST | `/labels` | append a label (400 vocabulary, 404 unknown sample) |
//! | POST | `/metrics/recompute` | `metrics.json` for the current labels |
//!
//! Errors are JSON objects `{"error": "..."}`. Run artifacts are re-read on
//! every request, so a server started before `run` finishes picks up the
//! results without restarting. Label writes are serialized through one lock
//! around the append-only log.

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use faultclust_core::labels::LabelRecord;
use faultclust_core::metrics::{cluster_size_table, ClusterSize};
use faultclust_core::waveform::Dataset;
use faultclust_core::window::{record_window, Overlays, WindowPayload, WindowRequest};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{Any, CorsLayer};

use crate::config::MetricsSection;
use crate::csvio;
use crate::error::Error;
use crate::labelstore::{LabelEvent, LabelStore};
use crate::pipeline::{evaluate_run, ModelFile, ASSIGNMENTS_FILE, MODEL_FILE};
use crate::worksheet::{self, WorksheetEntry, DEFAULT_PER_CLUSTER};

/// Default decimation budget for window requests.
pub const DEFAULT_MAX_POINTS: usize = 2000;

#[derive(Debug)]
pub struct AppState {
    pub dataset: Dataset,
    /// Directory holding `model.json` and `assignments.csv`, once a run exists.
    pub run_dir: Option<PathBuf>,
    pub labels: Mutex<LabelStore>,
    pub metrics: MetricsSection,
}

impl AppState {
    pub fn new(dataset: Dataset, run_dir: Option<PathBuf>, labels: LabelStore, metrics: MetricsSection) -> Self {
        Self {
            dataset,
            run_dir,
            labels: Mutex::new(labels),
            metrics,
        }
    }

    fn run(&self) -> Result<RunView, ApiError> {
        let dir = self
            .run_dir
            .as_ref()
            .filter(|d| d.join(MODEL_FILE).is_file())
            .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "no clustering model is available yet"))?;
        let model = ModelFile::load(dir.join(MODEL_FILE))?;
        let (ids, clusters) = csvio::read_assignments(dir.join(ASSIGNMENTS_FILE))?;
        Ok(RunView {
            dir: dir.clone(),
            model,
            ids,
            clusters,
        })
    }

    fn labeled_ids(&self) -> BTreeSet<u64> {
        self.lock_labels().events().map(|e| e.label.sample_id).collect()
    }

    fn lock_labels(&self) -> std::sync::MutexGuard<'_, LabelStore> {
        // A panic while holding the lock cannot leave the store half-written:
        // the in-memory view is only updated after the append succeeds.
        self.labels.lock().unwrap_or_else(|p| p.into_inner())
    }
}

struct RunView {
    dir: PathBuf,
    model: ModelFile,
    ids: Vec<u64>,
    clusters: Vec<usize>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        use faultclust_core::Error as Core;
        let status = match &e {
            Error::Core(Core::UnknownSample(_)) => StatusCode::NOT_FOUND,
            Error::Core(Core::Vocabulary(_) | Core::InvalidParameter(_)) => StatusCode::BAD_REQUEST,
            Error::Config(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl From<faultclust_core::Error> for ApiError {
    fn from(e: faultclust_core::Error) -> Self {
        Error::from(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/samples", get(list_samples))
        .route("/samples/{id}/window", get(sample_window))
        .route("/clusters", get(clusters))
        .route("/worksheet", get(worksheet_entries))
        .route("/labels", get(list_labels).post(post_label))
        .route("/metrics/recompute", post(recompute_metrics))
        .layer(cors)
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SampleSummary {
    pub sample_id: u64,
    pub cluster: Option<usize>,
    pub labeled: bool,
}

async fn list_samples(State(s): State<Arc<AppState>>) -> ApiResult<Json<Vec<SampleSummary>>> {
    let assignment: std::collections::HashMap<u64, usize> = match s.run() {
        Ok(run) => run.ids.into_iter().zip(run.clusters).collect(),
        Err(e) if e.status == StatusCode::CONFLICT => Default::default(),
        Err(e) => return Err(e),
    };
    let labeled = s.labeled_ids();
    Ok(Json(
        s.dataset
            .records
            .iter()
            .map(|r| SampleSummary {
                sample_id: r.id,
                cluster: assignment.get(&r.id).copied(),
                labeled: labeled.contains(&r.id),
            })
            .collect(),
    ))
}

#[derive(Debug, Deserialize)]
pub struct WindowQuery {
    pub start: Option<usize>,
    pub end: Option<usize>,
    pub max_points: Option<usize>,
    pub overlays: Option<String>,
}

async fn sample_window(
    State(s): State<Arc<AppState>>,
    Path(id): Path<u64>,
    q: Result<Query<WindowQuery>, QueryRejection>,
) -> ApiResult<Json<WindowPayload>> {
    let Query(q) = q.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.body_text()))?;
    let record = s
        .dataset
        .get(id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown sample id {id}")))?;
    let req = WindowRequest {
        start: q.start.unwrap_or(0),
        end: q.end.unwrap_or(s.dataset.meta.timesteps),
        max_points: q.max_points.unwrap_or(DEFAULT_MAX_POINTS),
    };
    let overlays = Overlays::parse(q.overlays.as_deref().unwrap_or(""))?;
    Ok(Json(record_window(record, &s.dataset.meta, &req, overlays)?))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClusterEntry {
    #[serde(flatten)]
    pub size: ClusterSize,
    pub members: Vec<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClustersResponse {
    pub k: usize,
    pub seed: u64,
    pub inertia: f64,
    /// Clusters by decreasing size.
    pub clusters: Vec<ClusterEntry>,
}

async fn clusters(State(s): State<Arc<AppState>>) -> ApiResult<Json<ClustersResponse>> {
    let run = s.run()?;
    let clusters = cluster_size_table(&run.clusters)
        .into_iter()
        .map(|size| ClusterEntry {
            members: run
                .ids
                .iter()
                .zip(&run.clusters)
                .filter(|&(_, &c)| c == size.cluster)
                .map(|(&id, _)| id)
                .collect(),
            size,
        })
        .collect();
    Ok(Json(ClustersResponse {
        k: run.model.k,
        seed: run.model.seed,
        inertia: run.model.inertia,
        clusters,
    }))
}

#[derive(Debug, Deserialize)]
pub struct WorksheetQuery {
    pub n: Option<usize>,
}

async fn worksheet_entries(
    State(s): State<Arc<AppState>>,
    q: Result<Query<WorksheetQuery>, QueryRejection>,
) -> ApiResult<Json<Vec<WorksheetEntry>>> {
    let Query(q) = q.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.body_text()))?;
    let run = s.run()?;
    let labeled = s.labeled_ids();
    let n = q.n.unwrap_or(DEFAULT_PER_CLUSTER);
    Ok(Json(worksheet::draw(
        &run.ids,
        &run.clusters,
        run.model.k,
        run.model.seed,
        n,
        &labeled,
    )?))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LabelsResponse {
    pub revision: u64,
    pub labels: Vec<LabelEvent>,
}

async fn list_labels(State(s): State<Arc<AppState>>) -> Json<LabelsResponse> {
    let store = s.lock_labels();
    Json(LabelsResponse {
        revision: store.revision(),
        labels: store.events().cloned().collect(),
    })
}

async fn post_label(State(s): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<LabelEvent>)> {
    let label: LabelRecord = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("invalid label JSON: {e}")))?;
    label.validate()?;
    if s.dataset.get(label.sample_id).is_none() {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            format!("unknown sample id {}", label.sample_id),
        ));
    }
    let event = s.lock_labels().append(label)?;
    Ok((StatusCode::CREATED, Json(event)))
}

/// Same bytes as `faultclust evaluate` writes to `metrics.json`.
async fn recompute_metrics(State(s): State<Arc<AppState>>) -> ApiResult<Response> {
    let run = s.run()?;
    let labels = s.lock_labels().labels();
    if labels.is_empty() {
        return Err(ApiError::new(StatusCode::CONFLICT, "no labels have been recorded yet"));
    }
    let body = evaluate_run(&run.dir, &labels, &s.metrics)?.to_json()?;
    Ok((
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))],
        body,
    )
        .into_response())
}
