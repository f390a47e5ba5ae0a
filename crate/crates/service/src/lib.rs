//! Local HTTP API over scope documents, assessments, plans and timelines.

pub mod error;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{PathRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use ratqual_core::assessment::{assess, AssessmentInput, AssessmentResult};
use ratqual_core::monitoring::{export_csv, record_snapshot, trend_report, Snapshot};
use ratqual_core::planner::{explain_scenario, plan, ActionCostModel, Scenario};
use ratqual_core::scope::{check_coverage, validate_scope, CollaborationScope};
use ratqual_core::taxonomy::{catalog, Catalog, CharacteristicId};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::Mutex;

pub use error::{ApiError, ErrorCode};
pub use store::Repository;

pub const API_PREFIX: &str = "/api/v1";

struct AppState {
    repo: Repository,
    // Serializes every mutation of scope documents and snapshot stores.
    writes: Mutex<()>,
}

type Shared = State<Arc<AppState>>;
type ApiResult<T> = Result<T, ApiError>;

pub fn router(home: impl Into<PathBuf>) -> Router {
    let state = Arc::new(AppState {
        repo: Repository::new(home),
        writes: Mutex::new(()),
    });
    let characteristic = "/scopes/{id}/characteristics/{c}";
    let api = Router::new()
        .route("/catalog", get(get_catalog))
        .route("/scopes", get(list_scopes).post(create_scope))
        .route("/scopes/{id}", get(get_scope).put(update_scope))
        .route(&format!("{characteristic}/assess"), post(handle_assess))
        .route(&format!("{characteristic}/plan"), post(handle_plan))
        .route(&format!("{characteristic}/timeline"), get(handle_timeline))
        .method_not_allowed_fallback(|| async {
            ApiError::validation("method not allowed").into_response_with(StatusCode::METHOD_NOT_ALLOWED)
        });
    Router::new()
        .nest(API_PREFIX, api)
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .with_state(state)
}

impl ApiError {
    fn into_response_with(self, status: StatusCode) -> Response {
        (status, Json(self)).into_response()
    }
}

/// Serves the API on `listener` until Ctrl-C.
pub async fn serve(listener: TcpListener, home: impl Into<PathBuf>) -> std::io::Result<()> {
    axum::serve(listener, router(home))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

pub async fn bind(addr: SocketAddr) -> std::io::Result<TcpListener> {
    TcpListener::bind(addr).await
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| {
        ApiError::validation(format!("malformed request body: {e}"))
            .with_details(serde_json::json!({ "line": e.line(), "column": e.column() }))
    })
}

fn parse_optional_body<T: DeserializeOwned + Default>(body: &Bytes) -> ApiResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        Ok(T::default())
    } else {
        parse_body(body)
    }
}

fn path_params(path: Result<Path<(String, String)>, PathRejection>) -> ApiResult<(String, CharacteristicId)> {
    let Path((id, c)) = path.map_err(|e| ApiError::validation(e.body_text()))?;
    let characteristic = c.parse::<CharacteristicId>()?;
    Ok((id, characteristic))
}

async fn get_catalog() -> Json<Catalog> {
    Json(catalog())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScopeSummary {
    pub scope_id: String,
    pub name: String,
    pub revision: u64,
    pub characteristics: Vec<CharacteristicId>,
}

async fn list_scopes(State(app): Shared) -> ApiResult<Json<Vec<ScopeSummary>>> {
    let summaries = app
        .repo
        .list()?
        .into_iter()
        .map(|s| ScopeSummary {
            characteristics: s.assessments.keys().copied().collect(),
            scope_id: s.scope_id,
            name: s.name,
            revision: s.revision,
        })
        .collect();
    Ok(Json(summaries))
}

async fn create_scope(State(app): Shared, body: Bytes) -> ApiResult<(StatusCode, Json<CollaborationScope>)> {
    let scope: CollaborationScope = parse_body(&body)?;
    validate_scope(&scope).into_result()?;
    let _guard = app.writes.lock().await;
    app.repo.create(&scope)?;
    Ok((StatusCode::CREATED, Json(scope)))
}

async fn get_scope(
    State(app): Shared,
    path: Result<Path<String>, PathRejection>,
) -> ApiResult<Json<CollaborationScope>> {
    let Path(id) = path.map_err(|e| ApiError::validation(e.body_text()))?;
    Ok(Json(app.repo.get(&id)?))
}

async fn update_scope(
    State(app): Shared,
    path: Result<Path<String>, PathRejection>,
    body: Bytes,
) -> ApiResult<Json<CollaborationScope>> {
    let Path(id) = path.map_err(|e| ApiError::validation(e.body_text()))?;
    let scope: CollaborationScope = parse_body(&body)?;
    let _guard = app.writes.lock().await;
    app.repo.get(&id)?;
    validate_scope(&scope).into_result()?;
    Ok(Json(app.repo.update(&id, scope)?))
}

/// Uses the override when given, otherwise the scope's stored assessment.
fn resolve_input(
    scope: &CollaborationScope,
    characteristic: CharacteristicId,
    supplied: Option<AssessmentInput>,
) -> ApiResult<AssessmentInput> {
    match supplied {
        None => Ok(scope.assessment_input(characteristic)?),
        Some(input) => {
            if input.characteristic != characteristic {
                return Err(ApiError::validation(format!(
                    "input is for {} but the request is for {characteristic}",
                    input.characteristic
                ))
                .with_details(serde_json::json!({ "field": "input.characteristic" })));
            }
            input.validate().map_err(|e| e.within("input"))?;
            check_coverage(scope, &input.org_maturities).map_err(|e| e.within("input"))?;
            Ok(input)
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssessRequest {
    #[serde(default)]
    pub input: Option<AssessmentInput>,
    #[serde(default)]
    pub taken_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
pub struct AssessQuery {
    #[serde(default)]
    pub record: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AssessResponse {
    pub scope_id: String,
    pub characteristic: CharacteristicId,
    pub input: AssessmentInput,
    pub result: AssessmentResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<Snapshot>,
}

async fn handle_assess(
    State(app): Shared,
    path: Result<Path<(String, String)>, PathRejection>,
    query: Result<Query<AssessQuery>, QueryRejection>,
    body: Bytes,
) -> ApiResult<Json<AssessResponse>> {
    let (id, characteristic) = path_params(path)?;
    let Query(query) = query.map_err(|e| ApiError::validation(e.body_text()))?;
    let request: AssessRequest = parse_optional_body(&body)?;
    let scope = app.repo.get(&id)?;
    let input = resolve_input(&scope, characteristic, request.input)?;
    let result = assess(&input)?;
    let snapshot = if query.record {
        let _guard = app.writes.lock().await;
        let store = app.repo.snapshots(&id);
        Some(record_snapshot(&store, &id, characteristic, &input, request.label, request.taken_at)?)
    } else {
        None
    };
    Ok(Json(AssessResponse {
        scope_id: id,
        characteristic,
        input,
        result,
        snapshot,
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanRequest {
    pub target: f64,
    #[serde(default)]
    pub costs: Option<ActionCostModel>,
    #[serde(default)]
    pub input: Option<AssessmentInput>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PlanResponse {
    pub scope_id: String,
    pub scenario: Scenario,
    pub explanation: Vec<String>,
}

async fn handle_plan(
    State(app): Shared,
    path: Result<Path<(String, String)>, PathRejection>,
    body: Bytes,
) -> ApiResult<Json<PlanResponse>> {
    let (id, characteristic) = path_params(path)?;
    let request: PlanRequest = parse_body(&body)?;
    let scope = app.repo.get(&id)?;
    let input = resolve_input(&scope, characteristic, request.input)?;
    let costs = request.costs.unwrap_or_default();
    let scenario = plan(&input, request.target, &costs)?;
    Ok(Json(PlanResponse {
        scope_id: id,
        explanation: explain_scenario(&scenario),
        scenario,
    }))
}

#[derive(Debug, Default, Deserialize)]
pub struct TimelineQuery {
    #[serde(default)]
    pub from: Option<DateTime<Utc>>,
    #[serde(default)]
    pub to: Option<DateTime<Utc>>,
    #[serde(default)]
    pub format: Option<String>,
}

fn wants_csv(query: &TimelineQuery, headers: &HeaderMap) -> ApiResult<bool> {
    match query.format.as_deref() {
        Some("csv") => return Ok(true),
        Some("json") => return Ok(false),
        Some(other) => {
            return Err(ApiError::validation(format!("unknown format `{other}` (expected csv or json)")))
        }
        None => {}
    }
    Ok(headers
        .get_all(header::ACCEPT)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(','))
        .any(|v| v.split(';').next().unwrap_or("").trim().eq_ignore_ascii_case("text/csv")))
}

async fn handle_timeline(
    State(app): Shared,
    path: Result<Path<(String, String)>, PathRejection>,
    query: Result<Query<TimelineQuery>, QueryRejection>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let (id, characteristic) = path_params(path)?;
    let Query(query) = query.map_err(|e| ApiError::validation(e.body_text()))?;
    app.repo.get(&id)?;
    let report = trend_report(&app.repo.snapshots(&id), &id, characteristic, query.from, query.to)?;
    if wants_csv(&query, &headers)? {
        Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], export_csv(&report)).into_response())
    } else {
        Ok(Json(report).into_response())
    }
}
