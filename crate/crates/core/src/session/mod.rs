//! Event-sourced study session: onboarding, recommendation trials, slider
//! feedback, Like/Dislike marks, quiz and questionnaire.
//!
//! Every change is an [`Event`] applied by [`Session::apply`]. Live operations
//! apply to a copy and swap it in on success, so a failed operation leaves the
//! session untouched, and replaying a log rebuilds the same state.

pub mod event;
pub mod log;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, ItemId};
use crate::efficacy::{
    generate_quiz, satisfaction_count, understanding_score, EfficacyScore, LogisticMode, QuizItem, QuizQuestion,
    SatisfactionMark, DEFAULT_K, DEFAULT_QUIZ_SIZE,
};
use crate::embed::{EmbedModel, DEFAULT_POOL_SIZE};
use crate::error::{Error, Result};
use crate::explain::{explain_item, Explanation, LimeConfig, DETAIL_FEATURES, LIST_FEATURES};
use crate::feedback::{compute_adjustment, propagate, FeedbackConfig, FeedbackEvent, RatingAdjustment};
use crate::recommend::{fit_tree, recommend, PersonalDatum, Prediction, RegressionTree, TreeConfig, DEFAULT_LIST_SIZE};

pub use event::{Created, Event, LogRecord, OnboardingRating, QuizAnswer, SelfAssessment};

pub const MIN_ONBOARDING: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Feedback,
    NonFeedback,
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Group::Feedback => "feedback",
            Group::NonFeedback => "non_feedback",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub pool_size: usize,
    pub list_size: usize,
    pub list_features: usize,
    pub detail_features: usize,
    pub quiz_size: usize,
    pub tree: TreeConfig,
    pub lime: LimeConfig,
    pub feedback: FeedbackConfig,
    pub k: f64,
    pub mode: LogisticMode,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            pool_size: DEFAULT_POOL_SIZE,
            list_size: DEFAULT_LIST_SIZE,
            list_features: LIST_FEATURES,
            detail_features: DETAIL_FEATURES,
            quiz_size: DEFAULT_QUIZ_SIZE,
            tree: TreeConfig::default(),
            lime: LimeConfig::default(),
            feedback: FeedbackConfig::default(),
            k: DEFAULT_K,
            mode: LogisticMode::Literal,
        }
    }
}

/// Read-only inputs shared by all sessions.
#[derive(Debug, Clone)]
pub struct Context {
    pub catalog: Catalog,
    pub embed: EmbedModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedFeedback {
    pub event: FeedbackEvent,
    pub adjustment: RatingAdjustment,
    pub affected: Vec<ItemId>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u32,
    /// Every item shown in this trial's lists, including lists refreshed by feedback.
    pub displayed: BTreeSet<ItemId>,
    pub viewed: Vec<ItemId>,
    pub feedback: Vec<AppliedFeedback>,
    pub marks: Vec<SatisfactionMark>,
    pub quiz: Option<Vec<QuizItem>>,
    pub assessment: Option<SelfAssessment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendedItem {
    pub item: ItemId,
    pub title: String,
    pub rank: usize,
    pub expected_rating: f64,
    pub explanations: Vec<Explanation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationList {
    pub session: String,
    pub group: Group,
    pub trial: u32,
    pub sliders_read_only: bool,
    pub items: Vec<RecommendedItem>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub id: String,
    pub group: Group,
    pub seed: u64,
    pub config: SessionConfig,
    pub catalog_digest: String,
    pub trial: u32,
    pub onboarding: Vec<OnboardingRating>,
    pub pool: Vec<ItemId>,
    pub personal: Vec<PersonalDatum>,
    pub tree: RegressionTree,
    pub recommendations: Vec<Prediction>,
    explanations: BTreeMap<ItemId, Vec<Explanation>>,
    pub trials: Vec<TrialRecord>,
}

/// SplitMix64 finalizer over a combined word; derives per-item and per-trial seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable seed for a named entity such as a session id.
pub fn seed_for_name(base: u64, name: &str) -> u64 {
    use sha2::Digest;
    let h = sha2::Sha256::digest(name.as_bytes());
    mix_seed(base, u64::from_le_bytes(h[..8].try_into().expect("8 bytes")))
}

impl Session {
    /// Starts a session and opens trial 1. Returns the session and the events to log.
    pub fn create(
        ctx: &Context,
        id: &str,
        group: Group,
        seed: u64,
        config: SessionConfig,
        onboarding: Vec<OnboardingRating>,
    ) -> Result<(Self, Vec<Event>)> {
        let created = Created {
            group,
            seed,
            config,
            onboarding,
            catalog_digest: ctx.catalog.digest(),
        };
        let mut session = Self::from_created(ctx, id, &created)?;
        let opened = session.next_recommendations(ctx)?;
        Ok((session, vec![Event::Created(created), opened]))
    }

    /// Session state right after creation, before any trial is opened.
    pub fn from_created(ctx: &Context, id: &str, c: &Created) -> Result<Self> {
        if c.catalog_digest != ctx.catalog.digest() {
            return Err(Error::Replay("session was created against a different catalog".into()));
        }
        if c.onboarding.len() < MIN_ONBOARDING {
            return Err(Error::invalid(format!(
                "need at least {MIN_ONBOARDING} onboarding ratings, got {}",
                c.onboarding.len()
            )));
        }
        if c.config.list_size == 0 || c.config.pool_size == 0 {
            return Err(Error::invalid("list and pool sizes must be positive"));
        }
        let mut seen = BTreeSet::new();
        let mut personal = Vec::with_capacity(c.onboarding.len());
        for o in &c.onboarding {
            if !(crate::catalog::MIN_RATING..=crate::catalog::MAX_RATING).contains(&o.rating) {
                return Err(Error::invalid(format!("onboarding rating {} outside [0.5, 5]", o.rating)));
            }
            let encoding = ctx.catalog.encoded(o.item)?.clone();
            if !seen.insert(o.item) {
                return Err(Error::DuplicateItem(o.item));
            }
            personal.push(PersonalDatum::new(o.item, encoding, o.rating));
        }
        let pool = ctx
            .embed
            .index
            .candidate_pool(&seen, c.config.pool_size)
            .into_iter()
            .map(|cand| cand.item)
            .collect();
        let tree = fit_tree(&personal, &c.config.tree)?;
        Ok(Self {
            id: id.to_string(),
            group: c.group,
            seed: c.seed,
            config: c.config,
            catalog_digest: c.catalog_digest.clone(),
            trial: 0,
            onboarding: c.onboarding.clone(),
            pool,
            personal,
            tree,
            recommendations: Vec::new(),
            explanations: BTreeMap::new(),
            trials: Vec::new(),
        })
    }

    pub fn sliders_read_only(&self) -> bool {
        self.group == Group::NonFeedback
    }

    pub fn current_trial(&self) -> Option<&TrialRecord> {
        self.trials.last()
    }

    fn current_trial_mut(&mut self) -> Result<&mut TrialRecord> {
        self.trials.last_mut().ok_or(Error::invalid("no trial is open"))
    }

    pub fn recommended_ids(&self) -> Vec<ItemId> {
        self.recommendations.iter().map(|p| p.item).collect()
    }

    /// Applies one event in place. Callers wanting all-or-nothing semantics use
    /// the live operations, which go through [`Session::transact`].
    pub fn apply(&mut self, ctx: &Context, event: &Event) -> Result<()> {
        match event {
            Event::Created(_) => Err(Error::Replay("created event inside an existing session".into())),
            Event::Recommended { trial, items } => {
                if *trial != self.trial + 1 {
                    return Err(Error::invalid(format!("expected trial {}, got {trial}", self.trial + 1)));
                }
                self.trial = *trial;
                self.trials.push(TrialRecord {
                    trial: *trial,
                    ..TrialRecord::default()
                });
                self.refresh_list(ctx)?;
                self.check_items(items)
            }
            Event::Viewed { item } => {
                self.require_recommended(*item)?;
                self.current_trial_mut()?.viewed.push(*item);
                Ok(())
            }
            Event::Feedback { events, items } => {
                self.apply_feedback(ctx, events)?;
                self.check_items(items)
            }
            Event::Satisfaction { marks } => {
                let trial = self.current_trial_mut()?;
                if let Some(m) = marks.iter().find(|m| !trial.displayed.contains(&m.item)) {
                    return Err(Error::invalid(format!("item {} was not shown in trial {}", m.item, trial.trial)));
                }
                trial.marks.extend_from_slice(marks);
                Ok(())
            }
            Event::Quiz { answers, scored } => {
                let computed = self.score_quiz(ctx, answers)?;
                if !scored.is_empty() && *scored != computed {
                    return Err(Error::Replay("quiz scoring differs from the log".into()));
                }
                self.current_trial_mut()?.quiz = Some(computed);
                Ok(())
            }
            Event::Assessment(a) => {
                a.validate()?;
                self.current_trial_mut()?.assessment = Some(*a);
                Ok(())
            }
        }
    }

    fn check_items(&self, items: &[ItemId]) -> Result<()> {
        if !items.is_empty() && items != self.recommended_ids().as_slice() {
            return Err(Error::Replay("recommendation list differs from the log".into()));
        }
        Ok(())
    }

    fn require_recommended(&self, item: ItemId) -> Result<()> {
        if self.explanations.contains_key(&item) {
            Ok(())
        } else {
            Err(Error::invalid(format!("item {item} is not in the current recommendations")))
        }
    }

    /// Applies `event` to a copy and swaps it in only on success.
    pub fn transact(&mut self, ctx: &Context, event: &Event) -> Result<()> {
        let mut next = self.clone();
        next.apply(ctx, event)?;
        *self = next;
        Ok(())
    }

    fn lime_config(&self, item: ItemId) -> LimeConfig {
        self.config.lime.with_seed(mix_seed(self.seed, u64::from(item.0)))
    }

    fn refresh_list(&mut self, ctx: &Context) -> Result<()> {
        let encodings = self
            .pool
            .iter()
            .map(|&id| Ok((id, ctx.catalog.encoded(id)?)))
            .collect::<Result<Vec<_>>>()?;
        self.recommendations = recommend(&encodings, &self.tree, self.config.list_size)?;
        let mut explanations = BTreeMap::new();
        for p in &self.recommendations {
            let enc = ctx.catalog.encoded(p.item)?;
            let ex = explain_item(p.item, enc, ctx.catalog.encoding(), &self.tree, &self.lime_config(p.item))?;
            explanations.insert(p.item, ex);
            // displayed items join the personal data at their expected rating
            if !self.personal.iter().any(|d| d.item == p.item) {
                self.personal.push(PersonalDatum::new(p.item, enc.clone(), p.expected_rating));
            }
        }
        self.explanations = explanations;
        let shown = self.recommended_ids();
        self.current_trial_mut()?.displayed.extend(shown);
        Ok(())
    }

    fn apply_feedback(&mut self, ctx: &Context, events: &[FeedbackEvent]) -> Result<()> {
        if self.group == Group::NonFeedback {
            return Err(Error::GroupPolicy);
        }
        if events.is_empty() {
            return Err(Error::Empty("feedback events"));
        }
        let mut applied = Vec::with_capacity(events.len());
        for e in events {
            e.validate()?;
            if e.trial != self.trial {
                return Err(Error::invalid(format!("feedback for trial {} in trial {}", e.trial, self.trial)));
            }
            let detail = self.explanation(e.item)?;
            if !detail.iter().any(|x| x.feature == e.feature) {
                return Err(Error::invalid(format!("feature {} is not adjustable on item {}", e.feature, e.item)));
            }
            let r = self
                .personal
                .iter()
                .find(|d| d.item == e.item)
                .map(|d| d.rating)
                .ok_or(Error::UnknownItem(e.item))?;
            let adjustment = compute_adjustment(e, r, &self.config.feedback)?;
            let affected = propagate(&adjustment, &mut self.personal, &ctx.catalog)?;
            applied.push(AppliedFeedback {
                event: e.clone(),
                adjustment,
                affected,
            });
        }
        self.tree = fit_tree(&self.personal, &self.config.tree)?;
        self.current_trial_mut()?.feedback.extend(applied);
        self.refresh_list(ctx)
    }

    fn quiz_seed(&self) -> u64 {
        mix_seed(self.seed ^ 0x5155_495A, u64::from(self.trial))
    }

    /// Quiz for the current list. Deterministic until the list changes.
    pub fn quiz(&self, ctx: &Context) -> Result<Vec<QuizQuestion>> {
        if self.trial == 0 {
            return Err(Error::invalid("no trial is open"));
        }
        let displayed: Vec<(ItemId, Vec<Explanation>)> = self
            .recommendations
            .iter()
            .map(|p| (p.item, self.list_explanations(p.item)))
            .collect();
        generate_quiz(&displayed, &ctx.catalog, self.config.quiz_size, self.quiz_seed())
    }

    fn score_quiz(&self, ctx: &Context, answers: &[QuizAnswer]) -> Result<Vec<QuizItem>> {
        event::validate_answers(answers)?;
        let questions = self.quiz(ctx)?;
        if answers.len() != questions.len() {
            return Err(Error::invalid(format!(
                "quiz has {} questions, got {} answers",
                questions.len(),
                answers.len()
            )));
        }
        let mut scored = Vec::with_capacity(answers.len());
        let mut used = BTreeSet::new();
        for a in answers {
            let pos = questions
                .iter()
                .position(|q| q.item == a.item && q.feature == a.feature)
                .ok_or_else(|| Error::invalid(format!("({}, {}) is not a quiz question", a.item, a.feature)))?;
            if !used.insert(pos) {
                return Err(Error::invalid(format!("question ({}, {}) answered twice", a.item, a.feature)));
            }
            scored.push(QuizItem::answer(&questions[pos], a.judgment, a.confidence));
        }
        Ok(scored)
    }

    fn list_explanations(&self, item: ItemId) -> Vec<Explanation> {
        self.explanations
            .get(&item)
            .map(|e| e.iter().take(self.config.list_features).cloned().collect())
            .unwrap_or_default()
    }

    /// Detail-view explanations (top six by default) for a recommended item.
    pub fn explanation(&self, item: ItemId) -> Result<Vec<Explanation>> {
        self.require_recommended(item)?;
        Ok(self.explanations[&item]
            .iter()
            .take(self.config.detail_features)
            .cloned()
            .collect())
    }

    pub fn recommendation_list(&self, ctx: &Context) -> Result<RecommendationList> {
        let items = self
            .recommendations
            .iter()
            .map(|p| {
                Ok(RecommendedItem {
                    item: p.item,
                    title: ctx.catalog.item(p.item)?.title.clone(),
                    rank: p.rank,
                    expected_rating: p.expected_rating,
                    explanations: self.list_explanations(p.item),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RecommendationList {
            session: self.id.clone(),
            group: self.group,
            trial: self.trial,
            sliders_read_only: self.sliders_read_only(),
            items,
        })
    }

    pub fn efficacy_for(&self, trial: u32) -> Result<EfficacyScore> {
        let record = self
            .trials
            .iter()
            .find(|t| t.trial == trial)
            .ok_or_else(|| Error::invalid(format!("no trial {trial}")))?;
        let a = satisfaction_count(&record.marks);
        let x = match &record.quiz {
            Some(q) if !q.is_empty() => understanding_score(q)?,
            _ => 0.0,
        };
        EfficacyScore::compute(trial, a, x, self.config.k, self.config.mode)
    }

    pub fn efficacy(&self) -> Result<EfficacyScore> {
        self.efficacy_for(self.trial)
    }

    pub fn efficacy_history(&self) -> Result<Vec<EfficacyScore>> {
        self.trials.iter().map(|t| self.efficacy_for(t.trial)).collect()
    }

    /// Opens the next trial.
    pub fn next_recommendations(&mut self, ctx: &Context) -> Result<Event> {
        let mut event = Event::Recommended {
            trial: self.trial + 1,
            items: Vec::new(),
        };
        self.transact(ctx, &event)?;
        if let Event::Recommended { items, .. } = &mut event {
            *items = self.recommended_ids();
        }
        Ok(event)
    }

    pub fn view(&mut self, ctx: &Context, item: ItemId) -> Result<(Vec<Explanation>, Event)> {
        let event = Event::Viewed { item };
        self.transact(ctx, &event)?;
        Ok((self.explanation(item)?, event))
    }

    /// Applies a batch of slider moves. Moves that leave a slider where it was
    /// are dropped; if nothing is left the session is unchanged and `None` is
    /// returned.
    pub fn submit_feedback(&mut self, ctx: &Context, events: Vec<FeedbackEvent>) -> Result<Option<Event>> {
        if self.group == Group::NonFeedback {
            return Err(Error::GroupPolicy);
        }
        let events: Vec<FeedbackEvent> = events
            .into_iter()
            .filter(|e| e.omega_after != e.omega_before)
            .collect();
        if events.is_empty() {
            return Ok(None);
        }
        let mut event = Event::Feedback {
            events,
            items: Vec::new(),
        };
        self.transact(ctx, &event)?;
        if let Event::Feedback { items, .. } = &mut event {
            *items = self.recommended_ids();
        }
        Ok(Some(event))
    }

    pub fn mark(&mut self, ctx: &Context, marks: Vec<SatisfactionMark>) -> Result<Event> {
        let event = Event::Satisfaction { marks };
        self.transact(ctx, &event)?;
        Ok(event)
    }

    pub fn submit_quiz(&mut self, ctx: &Context, answers: Vec<QuizAnswer>) -> Result<(EfficacyScore, Event)> {
        let scored = self.score_quiz(ctx, &answers)?;
        let event = Event::Quiz { answers, scored };
        self.transact(ctx, &event)?;
        Ok((self.efficacy()?, event))
    }

    pub fn assess(&mut self, ctx: &Context, assessment: SelfAssessment) -> Result<Event> {
        let event = Event::Assessment(assessment);
        self.transact(ctx, &event)?;
        Ok(event)
    }
}
