//! HTTP routes.
//!
//! Public routes serve the questionnaire, rule lookups and the beep
//! classifier. Everything that mutates the rule base lives under `/admin` so
//! a reverse proxy can gate it.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use kbts_core::agent::{Agent, AgentError, SyncReport};
use kbts_core::fuzzy::{BeepPattern, FuzzyEngine, FuzzyError, LinguisticValue};
use kbts_core::inference::{
    build_decision_tree, DecisionTree, InferenceError, Question, Session, SessionError,
};
use kbts_core::rule_model::{match_key, Rule, RuleDraft, RuleError, RuleUpdate};
use kbts_core::RuleStore;

use crate::sessions::SessionRegistry;

const REPORTS_LIMIT: usize = 50;

pub struct AppState {
    pub store: Arc<RuleStore>,
    pub fuzzy: FuzzyEngine,
    pub sessions: SessionRegistry,
    pub agent: Arc<Agent>,
    tree_cache: Mutex<Option<Arc<DecisionTree>>>,
}

impl AppState {
    pub fn new(
        store: Arc<RuleStore>,
        fuzzy: FuzzyEngine,
        agent: Arc<Agent>,
        sessions: SessionRegistry,
    ) -> Self {
        Self {
            store,
            fuzzy,
            sessions,
            agent,
            tree_cache: Mutex::new(None),
        }
    }

    /// Tree for the current rule-base version, rebuilt only after writes.
    fn current_tree(&self) -> Result<Arc<DecisionTree>, InferenceError> {
        let snapshot = self.store.snapshot();
        let mut cache = self.tree_cache.lock().unwrap();
        if let Some(tree) = cache
            .as_ref()
            .filter(|t| t.rulebase_version == snapshot.version())
        {
            return Ok(tree.clone());
        }
        let tree = Arc::new(build_decision_tree(&snapshot)?);
        *cache = Some(tree.clone());
        Ok(tree)
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, message: impl ToString) -> Self {
        Self {
            status,
            body: json!({ "error": kind, "message": message.to_string() }),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<RuleError> for ApiError {
    fn from(e: RuleError) -> Self {
        let (status, kind) = match &e {
            RuleError::EmptyField(_) => (StatusCode::UNPROCESSABLE_ENTITY, "EmptyField"),
            RuleError::DuplicateRule { .. } => (StatusCode::CONFLICT, "DuplicateRule"),
            RuleError::NotFound(_) => (StatusCode::NOT_FOUND, "NotFound"),
            RuleError::Parse { .. } => (StatusCode::BAD_REQUEST, "ParseError"),
            RuleError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "IoError"),
        };
        Self::new(status, kind, e)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::InvalidChoice {
                ref valid_options, ..
            } => Self {
                status: StatusCode::BAD_REQUEST,
                body: json!({ "error": "InvalidChoice", "message": e.to_string(), "valid_options": valid_options }),
            },
            SessionError::SessionClosed => Self::new(StatusCode::GONE, "SessionClosed", e),
        }
    }
}

impl From<InferenceError> for ApiError {
    fn from(e: InferenceError) -> Self {
        Self::new(StatusCode::CONFLICT, "EmptyRuleBase", e)
    }
}

impl From<FuzzyError> for ApiError {
    fn from(e: FuzzyError) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "NegativeDuration", e)
    }
}

impl From<AgentError> for ApiError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Rules(e) => e.into(),
            other => Self::new(StatusCode::BAD_REQUEST, "AgentNotConfigured", other),
        }
    }
}

fn join_error(e: tokio::task::JoinError) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/answer", post(answer))
        .route("/rules", get(list_rules))
        .route("/rules/{id}", get(get_rule))
        .route("/admin/rules", post(add_rule))
        .route("/admin/rules/{id}", put(update_rule).delete(delete_rule))
        .route("/beep", post(beep))
        .route("/admin/agent/sync", post(agent_sync))
        .route("/admin/agent/reports", get(agent_reports))
        .with_state(state)
}

async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let snapshot = state.store.snapshot();
    Json(json!({
        "status": "ok",
        "rulebase_version": snapshot.version(),
        "rule_count": snapshot.len(),
    }))
}

#[derive(Serialize)]
struct SessionCreated {
    session_id: String,
    question: Question,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let tree = state.current_tree()?;
    let (session, question) = Session::new(tree);
    let session_id = state.sessions.insert(session);
    Ok((
        StatusCode::CREATED,
        Json(SessionCreated {
            session_id,
            question,
        }),
    ))
}

#[derive(Deserialize)]
struct AnswerRequest {
    choice: String,
}

async fn answer(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<AnswerRequest>,
) -> Result<Json<kbts_core::inference::Step>, ApiError> {
    let session = state.sessions.get(&id).ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "SessionNotFound",
            format!("no live session {id}"),
        )
    })?;
    let mut session = session.lock().await;
    Ok(Json(session.answer(&body.choice)?))
}

#[derive(Deserialize)]
struct RuleFilter {
    category: Option<String>,
}

async fn list_rules(
    State(state): State<Arc<AppState>>,
    Query(filter): Query<RuleFilter>,
) -> Json<Vec<Rule>> {
    let snapshot = state.store.snapshot();
    let category = filter.category.as_deref().map(match_key);
    Json(
        snapshot
            .rules()
            .iter()
            .filter(|r| {
                category
                    .as_ref()
                    .is_none_or(|c| match_key(&r.condition_a) == *c)
            })
            .cloned()
            .collect(),
    )
}

async fn get_rule(
    State(state): State<Arc<AppState>>,
    Path(id): Path<u64>,
) -> Result<Json<Rule>, ApiError> {
    state
        .store
        .snapshot()
        .get(id)
        .cloned()
        .map(Json)
        .ok_or_else(|| RuleError::NotFound(id).into())
}

async fn add_rule(
    State(state): State<Arc<AppState>>,
    Json(draft): Json<RuleDraft>,
) -> Result<(StatusCode, Json<Rule>), ApiError> {
    let rule = tokio::task::spawn_blocking(move || state.store.write(|rb| rb.add_rule(&draft)))
        .await
        .map_err(join_error)??;
    Ok((StatusCode::CREATED, Json(rule)))
}

async fn update_rule(
    State(state): State<Arc<AppState>>,
    Path(id): Path<u64>,
    Json(update): Json<RuleUpdate>,
) -> Result<Json<Rule>, ApiError> {
    let rule =
        tokio::task::spawn_blocking(move || state.store.write(|rb| rb.update_rule(id, &update)))
            .await
            .map_err(join_error)??;
    Ok(Json(rule))
}

async fn delete_rule(
    State(state): State<Arc<AppState>>,
    Path(id): Path<u64>,
) -> Result<StatusCode, ApiError> {
    tokio::task::spawn_blocking(move || state.store.write(|rb| rb.delete_rule(id)))
        .await
        .map_err(join_error)??;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Serialize)]
struct BeepResponse {
    linguistic: LinguisticValue,
    message: &'static str,
    memberships: BTreeMap<LinguisticValue, f64>,
}

async fn beep(
    State(state): State<Arc<AppState>>,
    Json(pattern): Json<BeepPattern>,
) -> Result<Json<BeepResponse>, ApiError> {
    let diagnosis = state.fuzzy.diagnose_beep(&pattern)?;
    let memberships = state.fuzzy.fuzzify(pattern.duration_seconds)?;
    Ok(Json(BeepResponse {
        linguistic: diagnosis.linguistic,
        message: diagnosis.message,
        memberships,
    }))
}

async fn agent_sync(State(state): State<Arc<AppState>>) -> Result<Json<SyncReport>, ApiError> {
    let report = tokio::task::spawn_blocking(move || state.agent.sync_now())
        .await
        .map_err(join_error)??;
    Ok(Json(report))
}

async fn agent_reports(State(state): State<Arc<AppState>>) -> Json<Vec<SyncReport>> {
    let mut reports = state.agent.recent_reports();
    let skip = reports.len().saturating_sub(REPORTS_LIMIT);
    reports.drain(..skip);
    Json(reports)
}
