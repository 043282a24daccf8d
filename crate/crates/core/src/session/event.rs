use serde::{Deserialize, Serialize};

use crate::catalog::{FeatureId, ItemId};
use crate::efficacy::{check_confidence, Judgment, QuizItem, SatisfactionMark};
use crate::error::{Error, Result};
use crate::feedback::FeedbackEvent;

use super::{Group, SessionConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnboardingRating {
    pub item: ItemId,
    pub rating: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizAnswer {
    pub item: ItemId,
    pub feature: FeatureId,
    pub judgment: Judgment,
    pub confidence: f64,
}

/// Post-trial questionnaire. SAM scales run 1 to 9, TLX scales 0 to 100.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfAssessment {
    pub valence: f64,
    pub dominance: f64,
    pub mental_demand: f64,
    pub performance: f64,
    pub effort: f64,
    pub frustration: f64,
    pub efficacy_self_rating: f64,
}

impl SelfAssessment {
    pub fn validate(&self) -> Result<()> {
        let sam = [
            ("valence", self.valence),
            ("dominance", self.dominance),
            ("efficacy_self_rating", self.efficacy_self_rating),
        ];
        for (name, v) in sam {
            if !(1.0..=9.0).contains(&v) {
                return Err(Error::invalid(format!("{name} = {v} outside [1, 9]")));
            }
        }
        let tlx = [
            ("mental_demand", self.mental_demand),
            ("performance", self.performance),
            ("effort", self.effort),
            ("frustration", self.frustration),
        ];
        for (name, v) in tlx {
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::invalid(format!("{name} = {v} outside [0, 100]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub group: Group,
    pub seed: u64,
    pub config: SessionConfig,
    pub onboarding: Vec<OnboardingRating>,
    pub catalog_digest: String,
}

/// Session state transitions. Every mutation of a session goes through one of
/// these, both live and during replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Event {
    Created(Created),
    /// Opens trial `trial`. `items` is the resulting list, checked on replay.
    Recommended {
        trial: u32,
        #[serde(default)]
        items: Vec<ItemId>,
    },
    Viewed {
        item: ItemId,
    },
    /// Slider moves from one detail view, applied in order, then one refit.
    Feedback {
        events: Vec<FeedbackEvent>,
        #[serde(default)]
        items: Vec<ItemId>,
    },
    Satisfaction {
        marks: Vec<SatisfactionMark>,
    },
    Quiz {
        answers: Vec<QuizAnswer>,
        /// Answers joined with ground truth; recomputed and checked on replay.
        #[serde(default)]
        scored: Vec<QuizItem>,
    },
    Assessment(SelfAssessment),
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::Created(_) => "created",
            Event::Recommended { .. } => "recommended",
            Event::Viewed { .. } => "viewed",
            Event::Feedback { .. } => "feedback",
            Event::Satisfaction { .. } => "satisfaction",
            Event::Quiz { .. } => "quiz",
            Event::Assessment(_) => "assessment",
        }
    }
}

pub(crate) fn validate_answers(answers: &[QuizAnswer]) -> Result<()> {
    answers.iter().try_for_each(|a| check_confidence(a.confidence))
}

/// One line of a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub ts: String,
    pub session: String,
    pub trial: u32,
    #[serde(flatten)]
    pub event: Event,
}

impl LogRecord {
    pub fn now(session: &str, trial: u32, event: Event) -> Self {
        Self {
            ts: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            session: session.to_string(),
            trial,
            event,
        }
    }
}
