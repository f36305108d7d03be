use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ctlab_core::bn::{most_informative_features, BnError, EvidenceSet, FeatureRanking};
use ctlab_core::covid::{assess, AlertPolicy, AssessError, CaseInput, CovidModel, Improving, DEFAULT_TOP_QUESTIONS, TARGET};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::grid::{
    aggregate_grid, detect_outbreaks, export_heatmap, select_narrowcast, CellId, GridSpec, OutbreakRule, Window,
    DEFAULT_CELL_DEG, DEFAULT_DELTA, DEFAULT_MIN_REPORTS, DEFAULT_TAU,
};
use crate::report::{AgeGroup, SurveillanceReport};
use crate::store::{IngestOutcome, Store};
use crate::SurveillanceError;

pub const DEFAULT_BIND_ADDR: &str = "127.0.0.1:8080";
pub const DEFAULT_DATA_DIR: &str = "ctlab-data";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Diagnostic network to serve; the bundled one when unset.
    pub model_path: Option<PathBuf>,
    pub bind_addr: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig { data_dir: DEFAULT_DATA_DIR.into(), model_path: None, bind_addr: DEFAULT_BIND_ADDR.into() }
    }
}

impl ServiceConfig {
    /// Reads `CTLAB_DATA_DIR`, `CTLAB_MODEL_PATH` and `CTLAB_BIND_ADDR`.
    pub fn from_env() -> Self {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        let d = ServiceConfig::default();
        ServiceConfig {
            data_dir: var("CTLAB_DATA_DIR").map(PathBuf::from).unwrap_or(d.data_dir),
            model_path: var("CTLAB_MODEL_PATH").map(PathBuf::from),
            bind_addr: var("CTLAB_BIND_ADDR").unwrap_or(d.bind_addr),
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub model: Arc<CovidModel>,
}

impl AppState {
    pub fn new(store: Store, model: CovidModel) -> Self {
        AppState { store: Arc::new(store), model: Arc::new(model) }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/report", post(post_report))
        .route("/heatmap", get(get_heatmap))
        .route("/outbreaks", get(get_outbreaks))
        .route("/trajectory/{uid}", get(get_trajectory))
        .route("/narrowcast", post(post_narrowcast))
        .route("/assess", post(post_assess))
        .route("/voi", post(post_voi))
        .with_state(state)
}

/// Opens the store, loads the model and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), SurveillanceError> {
    let model = match &config.model_path {
        Some(p) => CovidModel::load(p)?,
        None => CovidModel::default_model(),
    };
    let store = Store::open(&config.data_dir)?;
    let listener = tokio::net::TcpListener::bind(&config.bind_addr).await?;
    axum::serve(listener, router(AppState::new(store, model)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[derive(Debug)]
struct ApiError(StatusCode, String);

impl ApiError {
    fn bad_request(msg: impl Into<String>) -> Self {
        ApiError(StatusCode::BAD_REQUEST, msg.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

impl From<SurveillanceError> for ApiError {
    fn from(e: SurveillanceError) -> Self {
        let status = match e {
            SurveillanceError::InvalidWindow(_) | SurveillanceError::InvalidRequest(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl From<AssessError> for ApiError {
    fn from(e: AssessError) -> Self {
        let status = match e {
            AssessError::Contradiction => StatusCode::UNPROCESSABLE_ENTITY,
            AssessError::InvalidCase(_) | AssessError::InvalidPolicy(_) => StatusCode::BAD_REQUEST,
            AssessError::Inference(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

fn grid_spec(cell: Option<f64>) -> Result<GridSpec, ApiError> {
    Ok(GridSpec::new(cell.unwrap_or(DEFAULT_CELL_DEG))?)
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn post_report(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let report: SurveillanceReport = serde_json::from_slice(&body).map_err(|e| {
        ApiError::bad_request(format!("malformed report: {e}"))
    })?;
    let store = state.store.clone();
    let outcome = tokio::task::spawn_blocking(move || store.ingest(report))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    let status = match outcome {
        IngestOutcome::Rejected { .. } => StatusCode::BAD_REQUEST,
        _ => StatusCode::ACCEPTED,
    };
    Ok((status, Json(outcome)).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeatmapQuery {
    start: Option<i64>,
    end: Option<i64>,
    cell: Option<f64>,
    tau: Option<f64>,
    age_group: Option<AgeGroup>,
}

fn optional_window(start: Option<i64>, end: Option<i64>) -> Result<Window, ApiError> {
    let all = Window::all();
    Ok(Window::new(start.unwrap_or(all.start), end.unwrap_or(all.end))?)
}

async fn get_heatmap(State(state): State<AppState>, Query(q): Query<HeatmapQuery>) -> Result<Response, ApiError> {
    let grid = grid_spec(q.cell)?;
    let window = optional_window(q.start, q.end)?;
    let tau = q.tau.unwrap_or(DEFAULT_TAU);
    if !(0.0..=1.0).contains(&tau) {
        return Err(ApiError::bad_request(format!("tau {tau} outside [0, 1]")));
    }
    let snapshot = state.store.snapshot();
    let reports = snapshot.iter().filter(|r| q.age_group.is_none_or(|g| r.age_group == g));
    let body = export_heatmap(&aggregate_grid(reports, window, grid, tau));
    Ok(([(header::CONTENT_TYPE, "application/geo+json")], body).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutbreakQuery {
    start: i64,
    end: i64,
    cell: Option<f64>,
    min_reports: Option<usize>,
    delta: Option<f64>,
}

async fn get_outbreaks(State(state): State<AppState>, Query(q): Query<OutbreakQuery>) -> Result<Response, ApiError> {
    let grid = grid_spec(q.cell)?;
    let current = Window::new(q.start, q.end)?;
    let rule = OutbreakRule {
        min_reports: q.min_reports.unwrap_or(DEFAULT_MIN_REPORTS),
        delta: q.delta.unwrap_or(DEFAULT_DELTA),
    };
    if !rule.delta.is_finite() {
        return Err(ApiError::bad_request("delta must be finite"));
    }
    let snapshot = state.store.snapshot();
    let flags = detect_outbreaks(snapshot.iter(), current, current.previous()?, grid, rule)?;
    Ok(Json(flags).into_response())
}

async fn get_trajectory(State(state): State<AppState>, Path(uid): Path<String>) -> Json<Vec<SurveillanceReport>> {
    Json(state.store.snapshot().trajectory(&uid))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NarrowcastRequest {
    cells: Vec<String>,
    start: i64,
    end: i64,
    cell: Option<f64>,
}

async fn post_narrowcast(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: NarrowcastRequest = parse_body(&body)?;
    let grid = grid_spec(req.cell)?;
    let window = Window::new(req.start, req.end)?;
    let cells = req
        .cells
        .iter()
        .map(|c| c.parse::<CellId>().map_err(|_| ApiError::bad_request(format!("bad cell id {c:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let snapshot = state.store.snapshot();
    Ok(Json(select_narrowcast(snapshot.iter(), &cells, window, grid)?).into_response())
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AssessRequest {
    #[serde(default)]
    pub evidence: EvidenceSet,
    #[serde(default)]
    pub symptom_duration_days: f64,
    #[serde(default)]
    pub improving: Option<Improving>,
    #[serde(default)]
    pub policy: Option<AlertPolicy>,
    #[serde(default)]
    pub top_k: Option<usize>,
}

async fn post_assess(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: AssessRequest = parse_body(&body)?;
    let case = CaseInput {
        evidence: req.evidence,
        symptom_duration_days: req.symptom_duration_days,
        improving: req.improving,
    };
    let policy = req.policy.unwrap_or_default();
    let report = assess(&state.model, &case, &policy, req.top_k.unwrap_or(DEFAULT_TOP_QUESTIONS))?;
    Ok(Json(report).into_response())
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct VoiRequest {
    #[serde(default)]
    pub evidence: EvidenceSet,
    /// Nodes to rank; every unobserved non-target node when omitted.
    #[serde(default)]
    pub candidates: Option<Vec<String>>,
    #[serde(default)]
    pub top_k: Option<usize>,
}

async fn post_voi(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: VoiRequest = parse_body(&body)?;
    let net = state.model.network();
    let candidates: BTreeSet<String> = match req.candidates {
        Some(c) => c.into_iter().collect(),
        None => net.ids().filter(|id| *id != TARGET && !req.evidence.contains(id)).map(String::from).collect(),
    };
    let ranking = if candidates.is_empty() {
        FeatureRanking::default()
    } else {
        most_informative_features(net, &req.evidence, TARGET, &candidates).map_err(|e| match e {
            BnError::ImpossibleEvidence => ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
            BnError::StateSpaceTooLarge { .. } | BnError::InvalidNetwork(_) | BnError::Format(_) => {
                ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
            }
            other => ApiError::bad_request(other.to_string()),
        })?
    };
    let ranking = match req.top_k {
        Some(k) => ranking.truncated(k),
        None => ranking,
    };
    Ok(Json(ranking).into_response())
}
