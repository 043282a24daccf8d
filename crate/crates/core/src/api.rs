//! JSON bodies exchanged between the session service and its clients.

use serde::{Deserialize, Serialize};

use crate::catalog::{FeatureId, ItemId};
use crate::efficacy::{EfficacyScore, SatisfactionMark};
use crate::explain::Explanation;
use crate::feedback::FeedbackEvent;
use crate::session::{Group, OnboardingRating, QuizAnswer, RecommendationList, SessionConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    /// Generated when absent.
    #[serde(default)]
    pub id: Option<String>,
    pub group: Group,
    /// Derived from the server seed and the session id when absent.
    #[serde(default)]
    pub seed: Option<u64>,
    pub onboarding: Vec<OnboardingRating>,
    /// Server defaults when absent.
    #[serde(default)]
    pub config: Option<SessionConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: String,
    pub group: Group,
    pub trial: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub item: ItemId,
    pub title: String,
    pub features: Vec<FeatureId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationView {
    pub session: String,
    pub trial: u32,
    pub item: ItemId,
    pub title: String,
    pub expected_rating: f64,
    pub sliders_read_only: bool,
    pub explanations: Vec<Explanation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRequest {
    pub events: Vec<FeedbackEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackResponse {
    /// Moves that changed a slider; zero when every move was a no-op.
    pub applied: usize,
    pub recommendations: RecommendationList,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatisfactionRequest {
    pub marks: Vec<SatisfactionMark>,
}

/// A quiz question as shown to the participant: whether it is genuine stays
/// on the server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizPrompt {
    pub item: ItemId,
    pub title: String,
    pub feature: FeatureId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizView {
    pub session: String,
    pub trial: u32,
    pub questions: Vec<QuizPrompt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizRequest {
    pub answers: Vec<QuizAnswer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficacyView {
    pub session: String,
    pub group: Group,
    pub current: EfficacyScore,
    pub history: Vec<EfficacyScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub error: String,
}
