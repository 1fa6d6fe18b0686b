//! JSON API over a single session. Every body is wrapped in an envelope with
//! `schema_version`; errors are `{schema_version, error: {code, message}}`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WorkbenchError};
use crate::render::{heatmap, line_chart, preset_table, Scale};
use crate::session::{SweepKey, SCHEMA_VERSION};
use crate::workspace::{SweepReport, Workspace};
use crate::{parse_theta_list, Envelope, ErrorEnvelope};

pub const SCHEMA_HEADER: &str = "x-schema-version";

struct Running {
    key: SweepKey,
    done: AtomicUsize,
    total: usize,
}

pub struct AppState {
    workspace: Mutex<Workspace>,
    running: Mutex<HashMap<String, Arc<Running>>>,
}

type Shared = Arc<AppState>;
type Params = Query<HashMap<String, String>>;

impl AppState {
    fn workspace(&self) -> MutexGuard<'_, Workspace> {
        self.workspace.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn running(&self) -> MutexGuard<'_, HashMap<String, Arc<Running>>> {
        self.running.lock().unwrap_or_else(|p| p.into_inner())
    }
}

pub struct ApiError(WorkbenchError);

impl From<WorkbenchError> for ApiError {
    fn from(e: WorkbenchError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(ErrorEnvelope::from(&self.0))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

fn envelope<T: Serialize>(data: T) -> Json<Envelope<T>> {
    Json(Envelope::new(data))
}

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| WorkbenchError::Internal(e.to_string()))?
        .map_err(ApiError)
}

fn required(params: &HashMap<String, String>, name: &str) -> Result<String> {
    params
        .get(name)
        .filter(|v| !v.is_empty())
        .cloned()
        .ok_or_else(|| WorkbenchError::Invalid(format!("missing query parameter {name:?}")))
}

fn overrides(params: &HashMap<String, String>) -> Result<Vec<(String, f64)>> {
    match params.get("config") {
        Some(text) => parse_theta_list(text, ':'),
        None => Ok(Vec::new()),
    }
}

pub fn router(workspace: Workspace) -> Router {
    let state = Arc::new(AppState {
        workspace: Mutex::new(workspace),
        running: Mutex::new(HashMap::new()),
    });
    Router::new()
        .route("/session", get(get_session))
        .route("/categories", get(get_categories))
        .route("/axis", get(get_axis))
        .route("/theta", axum::routing::post(post_theta))
        .route("/confusion", get(get_confusion))
        .route("/sweep", get(get_sweep))
        .route("/sweep/status", get(get_sweep_status))
        .route("/pareto", get(get_pareto))
        .route("/presets", get(get_presets))
        .route("/compare-hard", get(get_compare_hard))
        .route("/export", get(get_export))
        .route("/elbow", get(get_elbow))
        .fallback(|| async {
            ApiError(WorkbenchError::Invalid("no such route".into())).into_response_with(StatusCode::NOT_FOUND)
        })
        .with_state(state)
}

impl ApiError {
    fn into_response_with(self, status: StatusCode) -> Response {
        (status, Json(ErrorEnvelope::from(&self.0))).into_response()
    }
}

pub async fn serve(workspace: Workspace, addr: SocketAddr) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(WorkbenchError::io(addr.to_string()))?;
    axum::serve(listener, router(workspace))
        .await
        .map_err(WorkbenchError::io(addr.to_string()))
}

async fn get_session(State(s): State<Shared>) -> impl IntoResponse {
    envelope(s.workspace().session.clone())
}

async fn get_categories(State(s): State<Shared>) -> impl IntoResponse {
    envelope(s.workspace().categories())
}

async fn get_axis(State(s): State<Shared>) -> impl IntoResponse {
    envelope(s.workspace().axis())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThetaUpdate {
    category: String,
    value: f64,
}

async fn post_theta(State(s): State<Shared>, body: Bytes) -> ApiResult<Response> {
    let update: ThetaUpdate = serde_json::from_slice(&body)
        .map_err(|e| WorkbenchError::Invalid(format!("body: {e}")))?;
    let categories = blocking(move || {
        let mut ws = s.workspace();
        ws.session.debias = ws.config_with(&[(update.category, update.value)])?;
        ws.save()?;
        Ok(ws.categories())
    })
    .await?;
    Ok(envelope(categories).into_response())
}

async fn get_confusion(State(s): State<Shared>, Query(params): Params) -> ApiResult<Response> {
    let svg = wants_svg(&params);
    let report = blocking(move || {
        let ws = s.workspace();
        let config = ws.config_with(&overrides(&params)?)?;
        ws.classify(&config)
    })
    .await?;
    if svg {
        let r = heatmap(
            "Row-normalized confusion matrix",
            &report.confusion.categories,
            &report.confusion.row_normalized,
            Scale::Sequential,
        )?;
        return Ok(svg_response(r.rendered));
    }
    Ok(envelope(report).into_response())
}

fn svg_response(body: String) -> Response {
    (
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("image/svg+xml")),
            (header::HeaderName::from_static(SCHEMA_HEADER), HeaderValue::from(SCHEMA_VERSION)),
        ],
        body,
    )
        .into_response()
}

/// Returns the cached sweep or computes it off the request path. The work
/// runs in a detached task so a dropped request still fills the cache.
async fn sweep_report(s: Shared, category: String) -> ApiResult<SweepReport> {
    let job = {
        let ws = s.workspace();
        if let Some(points) = ws.cached_sweep(&category)? {
            return Ok(SweepReport {
                category,
                cached: true,
                points,
            });
        }
        ws.sweep_job(&category)?
    };
    let running = {
        let mut map = s.running();
        if map.contains_key(&category) {
            return Err(WorkbenchError::SweepRunning(category).into());
        }
        let r = Arc::new(Running {
            key: job.key.clone(),
            done: AtomicUsize::new(0),
            total: job.total(),
        });
        map.insert(category.clone(), r.clone());
        r
    };
    let task = tokio::spawn(async move {
        let state = s.clone();
        let outcome = tokio::task::spawn_blocking(move || {
            let points = job.run(&running.done)?;
            let mut ws = state.workspace();
            if ws.session.sweep_key(&job.key.category) == job.key {
                ws.session.store_sweep(job.key.clone(), points.clone());
                ws.save()?;
            }
            Ok::<_, WorkbenchError>(points)
        })
        .await;
        s.running().remove(&category);
        let points = outcome.map_err(|e| WorkbenchError::Internal(e.to_string()))??;
        Ok::<_, WorkbenchError>(SweepReport {
            category,
            cached: false,
            points,
        })
    });
    Ok(task.await.map_err(|e| WorkbenchError::Internal(e.to_string()))??)
}

fn wants_svg(params: &HashMap<String, String>) -> bool {
    params.get("format").map(String::as_str) == Some("svg")
}

async fn get_sweep(State(s): State<Shared>, Query(params): Params) -> ApiResult<Response> {
    let category = required(&params, "category")?;
    let report = sweep_report(s.clone(), category).await?;
    if wants_svg(&params) {
        let front = s.workspace().pareto_of(&report.points)?.front_thetas;
        return Ok(svg_response(line_chart(&report.category, &report.points, &front)?.rendered));
    }
    Ok(envelope(report).into_response())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepState {
    Idle,
    Running,
    Cached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepStatus {
    pub category: String,
    pub state: SweepState,
    pub completed: usize,
    pub total: usize,
}

async fn get_sweep_status(State(s): State<Shared>, Query(params): Params) -> ApiResult<Response> {
    let category = required(&params, "category")?;
    let ws = s.workspace();
    let total = ws.session.config.grid.len();
    let status = if ws.cached_sweep(&category)?.is_some() {
        SweepStatus {
            category,
            state: SweepState::Cached,
            completed: total,
            total,
        }
    } else if let Some(r) = s.running().get(&category).filter(|r| r.key == ws.session.sweep_key(&category)) {
        SweepStatus {
            category,
            state: SweepState::Running,
            completed: r.done.load(Ordering::Relaxed),
            total: r.total,
        }
    } else {
        SweepStatus {
            category,
            state: SweepState::Idle,
            completed: 0,
            total,
        }
    };
    Ok(envelope(status).into_response())
}

async fn get_pareto(State(s): State<Shared>, Query(params): Params) -> ApiResult<Response> {
    let category = required(&params, "category")?;
    let report = sweep_report(s.clone(), category).await?;
    let result = s.workspace().pareto_of(&report.points)?;
    Ok(envelope(result).into_response())
}

async fn get_presets(State(s): State<Shared>, Query(params): Params) -> ApiResult<Response> {
    let table = blocking(move || {
        let mut ws = s.workspace();
        let table = ws.presets()?;
        ws.save()?;
        Ok(table)
    })
    .await?;
    if wants_svg(&params) {
        return Ok(svg_response(preset_table(&table)?.rendered));
    }
    Ok(envelope(table).into_response())
}

async fn get_compare_hard(State(s): State<Shared>, Query(params): Params) -> ApiResult<Response> {
    let cmp = blocking(move || {
        let mut ws = s.workspace();
        let cmp = ws.compare_hard()?;
        ws.save()?;
        Ok(cmp)
    })
    .await?;
    if wants_svg(&params) {
        let r = heatmap(
            "Balanced minus hard debias (row-normalized)",
            &cmp.diff.categories,
            &cmp.diff.values,
            Scale::Diverging,
        )?;
        return Ok(svg_response(r.rendered));
    }
    Ok(envelope(cmp).into_response())
}

async fn get_export(State(s): State<Shared>, Query(params): Params) -> ApiResult<Response> {
    let body = blocking(move || {
        let ws = s.workspace();
        let config = ws.config_with(&overrides(&params)?)?;
        let mut out = Vec::new();
        ws.export(&config, &mut out)?;
        String::from_utf8(out).map_err(|e| WorkbenchError::Internal(e.to_string()))
    })
    .await?;
    Ok((
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("text/plain; charset=utf-8")),
            (header::HeaderName::from_static(SCHEMA_HEADER), HeaderValue::from(SCHEMA_VERSION)),
        ],
        body,
    )
        .into_response())
}

async fn get_elbow(State(s): State<Shared>, Query(params): Params) -> ApiResult<Response> {
    let parse = |name: &str, default: usize| -> Result<usize> {
        match params.get(name) {
            Some(v) => v
                .parse()
                .map_err(|_| WorkbenchError::Invalid(format!("bad {name}: {v:?}"))),
            None => Ok(default),
        }
    };
    let (k_min, k_max) = (parse("k_min", 1)?, parse("k_max", 10)?);
    if k_min == 0 || k_min > k_max {
        return Err(WorkbenchError::Invalid(format!("bad k range {k_min}..={k_max}")).into());
    }
    let points = blocking(move || s.workspace().elbow(k_min..=k_max)).await?;
    Ok(envelope(points).into_response())
}
