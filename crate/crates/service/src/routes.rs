use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::RwLock;
use xeff_core::api::{
    CatalogEntry, CreateSession, EfficacyView, ExplanationView, FeedbackRequest, FeedbackResponse, QuizPrompt,
    QuizRequest, QuizView, SatisfactionRequest, SessionInfo,
};
use xeff_core::catalog::ItemId;
use xeff_core::efficacy::EfficacyScore;
use xeff_core::recommend::RegressionTree;
use xeff_core::session::{seed_for_name, Context, Event, LogRecord, RecommendationList, SelfAssessment, Session};

use crate::{ApiError, AppState, SessionHandle};

type Shared = State<Arc<AppState>>;
type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/catalog/onboarding", get(onboarding))
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}/recommendations", get(recommendations))
        .route("/sessions/{id}/recommendations:next", post(next))
        .route("/sessions/{id}/items/{item}/explanation", get(explanation))
        .route("/sessions/{id}/feedback", post(feedback))
        .route("/sessions/{id}/satisfaction", post(satisfaction))
        .route("/sessions/{id}/quiz", get(quiz).post(submit_quiz))
        .route("/sessions/{id}/assessment", post(assessment))
        .route("/sessions/{id}/efficacy", get(efficacy))
        .route("/sessions/{id}/tree", get(tree))
        .with_state(state)
}

async fn lookup(state: &AppState, id: &str) -> Result<SessionHandle, ApiError> {
    state
        .sessions
        .read()
        .await
        .get(id)
        .cloned()
        .ok_or_else(|| ApiError::NoSession(id.to_string()))
}

/// Runs `f` on the session under its write lock, off the async runtime. The
/// event it returns is logged before the lock is released; if logging fails
/// the session is rolled back.
async fn mutate<T, F>(state: Arc<AppState>, id: String, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Context, &mut Session) -> xeff_core::Result<(T, Option<Event>)> + Send + 'static,
{
    let handle = lookup(&state, &id).await?;
    let mut guard = handle.write_owned().await;
    tokio::task::spawn_blocking(move || {
        let snapshot = state.logs.as_ref().map(|_| guard.clone());
        let (out, event) = f(&state.ctx, &mut guard)?;
        if let (Some(event), Some(logs)) = (event, &state.logs) {
            let record = LogRecord::now(&guard.id, guard.trial, event);
            if let Err(e) = logs.append(&[record]) {
                if let Some(s) = snapshot {
                    *guard = s;
                }
                return Err(ApiError::Internal(format!("session log write failed: {e}")));
            }
        }
        Ok(out)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?
}

async fn read<T, F>(state: &AppState, id: &str, f: F) -> Result<T, ApiError>
where
    F: FnOnce(&Context, &Session) -> xeff_core::Result<T>,
{
    let handle = lookup(state, id).await?;
    let guard = handle.read().await;
    Ok(f(&state.ctx, &guard)?)
}

async fn health(State(state): Shared) -> Json<Value> {
    let n = state.sessions.read().await.len();
    Json(json!({ "status": "ok", "sessions": n, "catalog": state.ctx.catalog.digest() }))
}

#[derive(Debug, Deserialize)]
struct OnboardingQuery {
    count: Option<usize>,
}

/// Spread-out items for the participant to rate before the first list.
async fn onboarding(State(state): Shared, Query(q): Query<OnboardingQuery>) -> ApiResult<Vec<CatalogEntry>> {
    let count = q.count.unwrap_or(10).clamp(1, 50);
    let ids = state.ctx.embed.index.representatives(count, state.seed);
    let out = ids
        .into_iter()
        .map(|id| {
            let item = state.ctx.catalog.item(id)?;
            Ok(CatalogEntry {
                item: id,
                title: item.title.clone(),
                features: item.features.iter().cloned().collect(),
            })
        })
        .collect::<xeff_core::Result<Vec<_>>>()?;
    Ok(Json(out))
}

fn valid_id(id: &str) -> bool {
    (1..=64).contains(&id.len()) && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

async fn create(State(state): Shared, Json(req): Json<CreateSession>) -> Result<(StatusCode, Json<RecommendationList>), ApiError> {
    let id = req.id.clone().unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string());
    if !valid_id(&id) {
        return Err(xeff_core::Error::InvalidArgument(format!("session id `{id}` must be 1-64 of [A-Za-z0-9_-]")).into());
    }
    if state.sessions.read().await.contains_key(&id) {
        return Err(ApiError::Conflict(format!("session `{id}` already exists")));
    }
    let seed = req.seed.unwrap_or_else(|| seed_for_name(state.seed, &id));
    let config = req.config.unwrap_or(state.defaults);
    let st = state.clone();
    let sid = id.clone();
    let (session, records, list) = tokio::task::spawn_blocking(move || -> xeff_core::Result<_> {
        let (s, events) = Session::create(&st.ctx, &sid, req.group, seed, config, req.onboarding)?;
        let records: Vec<LogRecord> = events.into_iter().map(|e| LogRecord::now(&s.id, s.trial, e)).collect();
        let list = s.recommendation_list(&st.ctx)?;
        Ok((s, records, list))
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;

    let mut sessions = state.sessions.write().await;
    if sessions.contains_key(&id) {
        return Err(ApiError::Conflict(format!("session `{id}` already exists")));
    }
    if let Some(logs) = &state.logs {
        if logs.file_for(&id).exists() {
            return Err(ApiError::Conflict(format!("a log for session `{id}` already exists")));
        }
        logs.append(&records)
            .map_err(|e| ApiError::Internal(format!("session log write failed: {e}")))?;
    }
    sessions.insert(id, Arc::new(RwLock::new(session)));
    Ok((StatusCode::CREATED, Json(list)))
}

async fn list(State(state): Shared) -> Json<Vec<SessionInfo>> {
    let handles: Vec<SessionHandle> = state.sessions.read().await.values().cloned().collect();
    let mut out = Vec::with_capacity(handles.len());
    for h in handles {
        let s = h.read().await;
        out.push(SessionInfo {
            id: s.id.clone(),
            group: s.group,
            trial: s.trial,
        });
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Json(out)
}

async fn recommendations(State(state): Shared, Path(id): Path<String>) -> ApiResult<RecommendationList> {
    read(&state, &id, |ctx, s| s.recommendation_list(ctx)).await.map(Json)
}

async fn next(State(state): Shared, Path(id): Path<String>) -> ApiResult<RecommendationList> {
    mutate(state, id, |ctx, s| {
        let e = s.next_recommendations(ctx)?;
        Ok((s.recommendation_list(ctx)?, Some(e)))
    })
    .await
    .map(Json)
}

async fn explanation(State(state): Shared, Path((id, item)): Path<(String, u32)>) -> ApiResult<ExplanationView> {
    mutate(state, id, move |ctx, s| {
        let item = ItemId(item);
        let (explanations, e) = s.view(ctx, item)?;
        let expected_rating = s
            .recommendations
            .iter()
            .find(|p| p.item == item)
            .map_or(f64::NAN, |p| p.expected_rating);
        let view = ExplanationView {
            session: s.id.clone(),
            trial: s.trial,
            item,
            title: ctx.catalog.item(item)?.title.clone(),
            expected_rating,
            sliders_read_only: s.sliders_read_only(),
            explanations,
        };
        Ok((view, Some(e)))
    })
    .await
    .map(Json)
}

async fn feedback(State(state): Shared, Path(id): Path<String>, Json(req): Json<FeedbackRequest>) -> ApiResult<FeedbackResponse> {
    mutate(state, id, |ctx, s| {
        let e = s.submit_feedback(ctx, req.events)?;
        let applied = match &e {
            Some(Event::Feedback { events, .. }) => events.len(),
            _ => 0,
        };
        let out = FeedbackResponse {
            applied,
            recommendations: s.recommendation_list(ctx)?,
        };
        Ok((out, e))
    })
    .await
    .map(Json)
}

async fn satisfaction(
    State(state): Shared,
    Path(id): Path<String>,
    Json(req): Json<SatisfactionRequest>,
) -> ApiResult<EfficacyScore> {
    mutate(state, id, |ctx, s| {
        let e = s.mark(ctx, req.marks)?;
        Ok((s.efficacy()?, Some(e)))
    })
    .await
    .map(Json)
}

async fn quiz(State(state): Shared, Path(id): Path<String>) -> ApiResult<QuizView> {
    read(&state, &id, |ctx, s| {
        let questions = s
            .quiz(ctx)?
            .into_iter()
            .map(|q| {
                Ok(QuizPrompt {
                    item: q.item,
                    title: ctx.catalog.item(q.item)?.title.clone(),
                    feature: q.feature,
                })
            })
            .collect::<xeff_core::Result<_>>()?;
        Ok(QuizView {
            session: s.id.clone(),
            trial: s.trial,
            questions,
        })
    })
    .await
    .map(Json)
}

async fn submit_quiz(State(state): Shared, Path(id): Path<String>, Json(req): Json<QuizRequest>) -> ApiResult<EfficacyScore> {
    mutate(state, id, |ctx, s| {
        let (score, e) = s.submit_quiz(ctx, req.answers)?;
        Ok((score, Some(e)))
    })
    .await
    .map(Json)
}

async fn assessment(
    State(state): Shared,
    Path(id): Path<String>,
    Json(req): Json<SelfAssessment>,
) -> Result<StatusCode, ApiError> {
    mutate(state, id, move |ctx, s| Ok(((), Some(s.assess(ctx, req)?)))).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn efficacy(State(state): Shared, Path(id): Path<String>) -> ApiResult<EfficacyView> {
    read(&state, &id, |_, s| {
        Ok(EfficacyView {
            session: s.id.clone(),
            group: s.group,
            current: s.efficacy()?,
            history: s.efficacy_history()?,
        })
    })
    .await
    .map(Json)
}

async fn tree(State(state): Shared, Path(id): Path<String>) -> ApiResult<RegressionTree> {
    read(&state, &id, |_, s| Ok(s.tree.clone())).await.map(Json)
}
