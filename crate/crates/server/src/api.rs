use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Request, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use prefstack::infer::{Engine, Resolution, Session, TranscriptRecord};
use prefstack::io::DemoFile;
use prefstack::model::canonicalize;
use prefstack::train::{train, PreferenceModel, TrainConfig};
use prefstack::{Action, ActionKind, SecondaryActionSet, TaskDefinition, TimeStep};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::state::{now_ms, ApiSession, AppState};

type ApiResult<T> = Result<T, ApiError>;

/// JSON body extractor whose rejections use the service error body.
pub struct ApiJson<T>(pub T);

impl<S, T> FromRequest<S> for ApiJson<T>
where
    S: Send + Sync,
    T: DeserializeOwned,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Self(v)),
            Err(rejection) => Err(invalid_body(rejection)),
        }
    }
}

fn invalid_body(rejection: JsonRejection) -> ApiError {
    let status = match rejection {
        JsonRejection::MissingJsonContentType(_) => StatusCode::UNSUPPORTED_MEDIA_TYPE,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    };
    ApiError::new(status, "invalid_body", rejection.body_text())
}

#[derive(Debug, Deserialize)]
pub struct TrainRequest {
    pub task: TaskDefinition,
    pub demos: Vec<DemoFile>,
    #[serde(default)]
    pub config: TrainConfig,
    #[serde(default)]
    pub model_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster_id: usize,
    pub members: Vec<String>,
    pub prior: f64,
    pub representative: Vec<SecondaryActionSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSummary {
    pub identity: SecondaryActionSet,
    pub threshold: f64,
    pub cluster_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model_id: String,
    pub task_id: String,
    pub config: TrainConfig,
    pub users: usize,
    pub high_threshold: f64,
    pub dominant_high_clusters: usize,
    pub high_clusters: Vec<ClusterSummary>,
    pub events: Vec<EventSummary>,
}

impl ModelSummary {
    pub fn new(model_id: &str, model: &PreferenceModel) -> Self {
        Self {
            model_id: model_id.to_string(),
            task_id: model.task_id.clone(),
            config: model.config,
            users: model.demonstrations.len(),
            high_threshold: model.high_threshold,
            dominant_high_clusters: model.dominant_high_clusters(),
            high_clusters: model
                .high_clusters
                .iter()
                .map(|c| ClusterSummary {
                    cluster_id: c.cluster_id,
                    members: c.members.clone(),
                    prior: c.prior,
                    representative: c.representative.clone(),
                })
                .collect(),
            events: model
                .low_clusters
                .iter()
                .map(|e| EventSummary {
                    identity: e.identity.clone(),
                    threshold: e.threshold,
                    cluster_sizes: e.clusters.iter().map(|c| c.members.len()).collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainResponse {
    pub model_id: String,
    pub summary: ModelSummary,
}

#[derive(Debug, Default, Deserialize)]
pub struct CreateSessionRequest {
    pub model_id: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub resolution: Option<Resolution>,
    #[serde(default)]
    pub auto_resolve: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSessionResponse {
    pub session_id: String,
    pub model_id: String,
    pub seed: u64,
    pub initial_prediction: SecondaryActionSet,
    pub exhausted: bool,
}

#[derive(Debug, Deserialize)]
pub struct PrimaryRequest {
    pub action_id: String,
    /// Secondary actions the user actually performed before this primary.
    #[serde(default)]
    pub secondary: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimaryResponse {
    pub prediction: SecondaryActionSet,
    pub exhausted: bool,
    pub posterior_high: Vec<f64>,
    pub step: usize,
}

#[derive(Debug, Deserialize)]
pub struct FeedbackRequest {
    pub accepted: bool,
    #[serde(default)]
    pub actual: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackResponse {
    pub status: String,
    pub resolved: SecondaryActionSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowPosterior {
    pub identity: SecondaryActionSet,
    pub posterior: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub model_id: String,
    pub seed: u64,
    pub resolution: Resolution,
    pub auto_resolve: bool,
    pub step: usize,
    pub steps: Vec<TimeStep>,
    pub transcript: Vec<TranscriptRecord>,
    pub posterior_high: Vec<f64>,
    pub committed_high: Option<usize>,
    pub low_posterior: Option<LowPosterior>,
    pub pending: Option<SecondaryActionSet>,
    pub exhausted: bool,
    pub created_at_ms: u64,
    pub last_event_at_ms: u64,
}

fn view(id: &str, s: &ApiSession) -> SessionView {
    let session = &s.session;
    SessionView {
        session_id: id.to_string(),
        model_id: s.model_id.clone(),
        seed: session.seed(),
        resolution: session.resolution(),
        auto_resolve: s.auto_resolve,
        step: session.steps().len(),
        steps: session.steps().to_vec(),
        transcript: session.transcript().to_vec(),
        posterior_high: session.posterior_high().to_vec(),
        committed_high: session.committed_high(),
        low_posterior: session.low_posterior().map(|(identity, p)| LowPosterior {
            identity: identity.clone(),
            posterior: p.to_vec(),
        }),
        pending: session.pending_prediction().cloned(),
        exhausted: session.is_exhausted(),
        created_at_ms: s.created_at_ms,
        last_event_at_ms: s.last_event_at_ms,
    }
}

/// Canonical set of secondary action ids.
pub fn secondary_set(ids: &[String], task: &TaskDefinition) -> prefstack::Result<SecondaryActionSet> {
    let mut set = SecondaryActionSet::noop();
    for id in ids {
        match canonicalize(id, task)? {
            Action::Secondary(token) => {
                set.insert(token);
            }
            other => {
                return Err(prefstack::Error::WrongKind {
                    id: id.clone(),
                    expected: ActionKind::Secondary,
                    found: other.kind(),
                })
            }
        }
    }
    Ok(set)
}

fn check_primary(id: &str, task: &TaskDefinition) -> prefstack::Result<()> {
    match canonicalize(id, task)? {
        Action::Primary(_) => Ok(()),
        other => Err(prefstack::Error::WrongKind {
            id: id.to_string(),
            expected: ActionKind::Primary,
            found: other.kind(),
        }),
    }
}

fn valid_model_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
        && !id.starts_with('.')
}

async fn create_model(
    State(state): State<Arc<AppState>>,
    ApiJson(req): ApiJson<TrainRequest>,
) -> ApiResult<impl IntoResponse> {
    let model_id = match req.model_id {
        Some(id) if !valid_model_id(&id) => {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_model_id",
                format!("model id `{id}` may only contain letters, digits, `-`, `_` and `.`"),
            ))
        }
        Some(id) if state.model(&id).is_some() => {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "model_exists",
                format!("model `{id}` already exists"),
            ))
        }
        Some(id) => id,
        None => uuid::Uuid::new_v4().simple().to_string(),
    };
    let TrainRequest {
        task,
        demos,
        config,
        ..
    } = req;
    let model = tokio::task::spawn_blocking(move || -> prefstack::Result<PreferenceModel> {
        task.check()?;
        let demos = demos
            .into_iter()
            .map(|d| d.into_demonstration(&task))
            .collect::<prefstack::Result<Vec<_>>>()?;
        train(&demos, &task, &config)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
    .map_err(ApiError::invalid_corpus)?;
    let summary = ModelSummary::new(&model_id, &model);
    state
        .insert_model(model_id.clone(), model)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", format!("{e:#}")))?;
    tracing::info!(model_id, users = summary.users, "trained model");
    Ok((StatusCode::CREATED, Json(TrainResponse { model_id, summary })))
}

async fn get_model(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<ModelSummary>> {
    let engine = state.model(&id).ok_or_else(|| ApiError::unknown_model(&id))?;
    Ok(Json(ModelSummary::new(&id, engine.model())))
}

async fn list_models(State(state): State<Arc<AppState>>) -> Json<Vec<String>> {
    Json(state.model_ids())
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    ApiJson(req): ApiJson<CreateSessionRequest>,
) -> ApiResult<impl IntoResponse> {
    let engine: Arc<Engine> = state
        .model(&req.model_id)
        .ok_or_else(|| ApiError::unknown_model(&req.model_id))?;
    let seed = req.seed.unwrap_or(state.config.default_seed);
    let mut session = Session::new(engine, req.resolution.unwrap_or_default(), seed);
    let prediction = session.predict();
    let session_id = uuid::Uuid::new_v4().simple().to_string();
    let now = now_ms();
    state.insert_session(
        session_id.clone(),
        ApiSession {
            model_id: req.model_id.clone(),
            session,
            auto_resolve: req.auto_resolve.unwrap_or(state.config.auto_resolve),
            created_at_ms: now,
            last_event_at_ms: now,
        },
    );
    tracing::debug!(session_id, model_id = req.model_id, seed, "created session");
    Ok((
        StatusCode::CREATED,
        Json(CreateSessionResponse {
            session_id,
            model_id: req.model_id,
            seed,
            initial_prediction: prediction.set,
            exhausted: prediction.exhausted,
        }),
    ))
}

async fn post_primary(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<PrimaryRequest>,
) -> ApiResult<Json<PrimaryResponse>> {
    let entry = state.session(&id).ok_or_else(|| ApiError::unknown_session(&id))?;
    let mut guard = entry.lock().unwrap();
    let s = &mut *guard;
    let task = &s.session.engine().model().task;
    check_primary(&req.action_id, task)?;
    let observed = req
        .secondary
        .as_deref()
        .map(|ids| secondary_set(ids, task))
        .transpose()?;
    if s.auto_resolve {
        if let Some(pending) = s.session.pending_prediction().cloned() {
            match observed {
                Some(actual) if actual != pending => s.session.observe_feedback(false, Some(actual))?,
                _ => s.session.observe_feedback(true, None)?,
            }
        }
    }
    s.session
        .observe_primary(&Action::Primary(req.action_id.clone()))?;
    let prediction = s.session.predict();
    s.last_event_at_ms = now_ms();
    Ok(Json(PrimaryResponse {
        prediction: prediction.set,
        exhausted: prediction.exhausted,
        posterior_high: s.session.posterior_high().to_vec(),
        step: s.session.steps().len(),
    }))
}

async fn post_feedback(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<FeedbackRequest>,
) -> ApiResult<Json<FeedbackResponse>> {
    let entry = state.session(&id).ok_or_else(|| ApiError::unknown_session(&id))?;
    let mut guard = entry.lock().unwrap();
    let s = &mut *guard;
    let actual = req
        .actual
        .as_deref()
        .map(|ids| secondary_set(ids, &s.session.engine().model().task))
        .transpose()?;
    s.session.observe_feedback(req.accepted, actual)?;
    s.last_event_at_ms = now_ms();
    let resolved = s
        .session
        .transcript()
        .last()
        .and_then(|r| r.actual.clone())
        .unwrap_or_default();
    Ok(Json(FeedbackResponse {
        status: "ok".into(),
        resolved,
    }))
}

async fn get_session(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<SessionView>> {
    let entry = state.session(&id).ok_or_else(|| ApiError::unknown_session(&id))?;
    let guard = entry.lock().unwrap();
    Ok(Json(view(&id, &guard)))
}

/// Transcript as one JSON record per line.
async fn get_transcript(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    let entry = state.session(&id).ok_or_else(|| ApiError::unknown_session(&id))?;
    let guard = entry.lock().unwrap();
    let mut body = String::new();
    for rec in guard.session.transcript() {
        body.push_str(&serde_json::to_string(rec).expect("records serialize"));
        body.push('\n');
    }
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/models", post(create_model).get(list_models))
        .route("/v1/models/{id}", get(get_model))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/primary", post(post_primary))
        .route("/v1/sessions/{id}/feedback", post(post_feedback))
        .route("/v1/sessions/{id}/transcript", get(get_transcript))
        .fallback(not_found)
        .with_state(state)
}
