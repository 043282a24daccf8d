//! Simulated participants driving full sessions, for desk-scale comparison of
//! the feedback and non-feedback conditions.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::stats::{mean, two_sample_t, TTest};
use crate::catalog::{Catalog, FeatureId, Item, ItemId};
use crate::analysis::report::summarize_log;
use crate::eeg::io::Recording;
use crate::eeg::synthetic::{synthesize, SyntheticConfig};
use crate::efficacy::{EfficacyScore, Judgment, QuizQuestion, SatisfactionMark, Verdict};
use crate::error::{Error, Result};
use crate::feedback::FeedbackEvent;
use crate::session::{mix_seed, seed_for_name, Context, Group, LogRecord, OnboardingRating, QuizAnswer, SelfAssessment, Session, SessionConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub sessions_per_group: usize,
    pub trials: u32,
    /// Like threshold on the hidden utility (rating scale).
    pub tau: f64,
    /// Probability of flipping a quiz judgment.
    pub eta: f64,
    /// Fraction of the gap to the hidden weight covered by one slider move.
    pub step: f64,
    pub detail_views: usize,
    /// Sliders closer than this to the hidden weight are left alone.
    pub min_disagreement: f64,
    /// Most sliders moved per detail view, largest disagreement first.
    pub moves_per_view: usize,
    /// Predictions within this distance of the hidden utility are left alone.
    pub rating_tolerance: f64,
    pub onboarding: usize,
    pub seed: u64,
    pub session: SessionConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            sessions_per_group: 30,
            trials: 10,
            tau: 3.5,
            eta: 0.2,
            step: 0.5,
            detail_views: 3,
            min_disagreement: 10.0,
            moves_per_view: 6,
            rating_tolerance: 0.1,
            onboarding: 5,
            seed: 0,
            session: SessionConfig::default(),
        }
    }
}

/// A participant with fixed hidden feature preferences in [0, 100].
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedUser {
    pub weights: BTreeMap<FeatureId, f64>,
    pub tau: f64,
    pub eta: f64,
    pub step: f64,
    rng: ChaCha8Rng,
}

impl SimulatedUser {
    /// Likes the features of one randomly chosen anchor item (weights in
    /// [65, 100]) and is lukewarm about everything else (weights in [0, 35]).
    pub fn generate(catalog: &Catalog, cfg: &SimConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let anchor = &catalog.items()[rng.random_range(0..catalog.len())];
        let mut weights = BTreeMap::new();
        for item in catalog.items() {
            for f in &item.features {
                weights.entry(f.clone()).or_insert(0.0);
            }
        }
        for (f, w) in weights.iter_mut() {
            *w = if anchor.features.contains(f) {
                rng.random_range(65.0..=100.0)
            } else {
                rng.random_range(0.0..=35.0)
            };
        }
        Self {
            weights,
            tau: cfg.tau,
            eta: cfg.eta,
            step: cfg.step,
            rng,
        }
    }

    pub fn weight(&self, f: &FeatureId) -> f64 {
        self.weights.get(f).copied().unwrap_or(0.0)
    }

    /// Hidden rating in [0.5, 5]: affine in the mean weight of the item's features.
    pub fn utility(&self, item: &Item) -> f64 {
        if item.features.is_empty() {
            return 0.5;
        }
        let m = item.features.iter().map(|f| self.weight(f)).sum::<f64>() / item.features.len() as f64;
        0.5 + 4.5 * m / 100.0
    }

    pub fn verdict(&self, item: &Item) -> Verdict {
        if self.utility(item) >= self.tau {
            Verdict::Like
        } else {
            Verdict::Dislike
        }
    }

    /// How well a displayed weight matches the participant's own sense of the
    /// feature's importance, in [0, 1].
    pub fn alignment(&self, f: &FeatureId, displayed: f64) -> f64 {
        1.0 - (displayed - self.weight(f)).abs() / 100.0
    }

    /// Answers one quiz question. The answer is right with probability
    /// `(1 - eta) * alignment`, and confidence grows with alignment.
    pub fn answer(&mut self, q: &QuizQuestion, displayed: f64) -> (Judgment, f64) {
        let align = self.alignment(&q.feature, displayed).clamp(0.0, 1.0);
        let right = self.rng.random_bool((1.0 - self.eta) * align);
        let judgment = if right == q.is_genuine { Judgment::Correct } else { Judgment::Incorrect };
        (judgment, 1.0 + 8.0 * align)
    }

    /// New slider position after one move toward the hidden weight.
    pub fn slide(&self, f: &FeatureId, before: f64) -> f64 {
        (before + self.step * (self.weight(f) - before)).round().clamp(0.0, 100.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub session: String,
    pub group: Group,
    pub scores: Vec<EfficacyScore>,
    #[serde(skip)]
    pub log: Vec<LogRecord>,
}

impl SessionOutcome {
    pub fn xi(&self) -> Vec<f64> {
        self.scores.iter().map(|s| s.xi).collect()
    }
}

/// Items the participant has already watched, rated by hidden utility: half
/// drawn from their twenty favourite items, the rest from anywhere.
fn onboarding_for(ctx: &Context, user: &SimulatedUser, n: usize, seed: u64) -> Result<Vec<OnboardingRating>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_taste: Vec<(ItemId, f64)> = ctx.catalog.items().iter().map(|i| (i.id, user.utility(i))).collect();
    by_taste.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let favourites = by_taste.len().min(20);
    let liked = n.div_ceil(2).min(favourites);
    let mut picked: Vec<(ItemId, f64)> = by_taste[..favourites].choose_multiple(&mut rng, liked).copied().collect();
    let rest: Vec<(ItemId, f64)> = by_taste
        .iter()
        .filter(|c| !picked.iter().any(|p| p.0 == c.0))
        .copied()
        .collect();
    picked.extend(rest.choose_multiple(&mut rng, n - liked).copied());
    Ok(picked
        .into_iter()
        .map(|(item, u)| OnboardingRating {
            item,
            rating: ((u * 2.0).round() / 2.0).clamp(0.5, 5.0),
        })
        .collect())
}

fn assessment_from(score: &EfficacyScore, list_size: usize) -> SelfAssessment {
    let frac = if list_size == 0 { 0.0 } else { score.xi / list_size as f64 };
    let satisfied = f64::from(score.a) / list_size.max(1) as f64;
    SelfAssessment {
        valence: 1.0 + 8.0 * satisfied,
        dominance: 5.0,
        mental_demand: 50.0,
        performance: 100.0 * frac,
        effort: 50.0,
        frustration: 100.0 * (1.0 - satisfied),
        efficacy_self_rating: 1.0 + 8.0 * frac,
    }
}

/// Runs one participant through `cfg.trials` trials.
pub fn run_session(ctx: &Context, cfg: &SimConfig, group: Group, index: usize) -> Result<SessionOutcome> {
    // both groups draw the same participants, so group is the only difference
    let seed = mix_seed(cfg.seed, index as u64);
    let id = format!("sim-{group}-{index:03}");
    let mut user = SimulatedUser::generate(&ctx.catalog, cfg, seed);
    let mut log = Vec::new();
    if cfg.trials == 0 {
        return Ok(SessionOutcome {
            session: id,
            group,
            scores: Vec::new(),
            log,
        });
    }
    let onboarding = onboarding_for(ctx, &user, cfg.onboarding, mix_seed(seed, 1))?;
    let (mut s, events) = Session::create(ctx, &id, group, seed, cfg.session, onboarding)?;
    let record = |s: &Session, log: &mut Vec<LogRecord>, e| log.push(LogRecord::now(&s.id, s.trial, e));
    for e in events {
        record(&s, &mut log, e);
    }
    let mut scores = Vec::with_capacity(cfg.trials as usize);
    for t in 1..=cfg.trials {
        if t > 1 {
            let e = s.next_recommendations(ctx)?;
            record(&s, &mut log, e);
        }
        let mut adjusted = std::collections::BTreeSet::new();
        for v in 0..cfg.detail_views.min(s.recommendations.len()) {
            let item = s.recommendations[v].item;
            let predicted = s.recommendations[v].expected_rating;
            let (detail, e) = s.view(ctx, item)?;
            record(&s, &mut log, e);
            // only moves that push the prediction toward the participant's own rating
            let error = user.utility(ctx.catalog.item(item)?) - predicted;
            if group == Group::Feedback && error.abs() >= cfg.rating_tolerance {
                let mut candidates: Vec<_> = detail
                    .iter()
                    .filter(|x| (user.weight(&x.feature) - x.weight).abs() >= cfg.min_disagreement)
                    .filter(|x| (user.weight(&x.feature) - x.weight).signum() == error.signum())
                    .filter(|x| !adjusted.contains(&x.feature))
                    .collect();
                candidates.sort_by(|a, b| {
                    let gap = |x: &&crate::explain::Explanation| (user.weight(&x.feature) - x.weight).abs();
                    gap(b).total_cmp(&gap(a))
                });
                candidates.truncate(cfg.moves_per_view);
                let moves: Vec<FeedbackEvent> = candidates
                    .into_iter()
                    .inspect(|x| {
                        adjusted.insert(x.feature.clone());
                    })
                    .map(|x| FeedbackEvent {
                        trial: s.trial,
                        item,
                        feature: x.feature.clone(),
                        omega_before: x.weight.round(),
                        omega_after: user.slide(&x.feature, x.weight.round()),
                    })
                    .collect();
                if let Some(e) = s.submit_feedback(ctx, moves)? {
                    record(&s, &mut log, e);
                }
            }
        }
        let marks: Vec<SatisfactionMark> = s
            .recommendations
            .iter()
            .map(|p| {
                Ok(SatisfactionMark {
                    item: p.item,
                    verdict: user.verdict(ctx.catalog.item(p.item)?),
                })
            })
            .collect::<Result<_>>()?;
        let e = s.mark(ctx, marks)?;
        record(&s, &mut log, e);
        match s.quiz(ctx) {
            Ok(questions) => {
                let shown: BTreeMap<(ItemId, FeatureId), f64> = s
                    .recommendation_list(ctx)?
                    .items
                    .into_iter()
                    .flat_map(|i| i.explanations.into_iter().map(move |e| ((i.item, e.feature), e.weight)))
                    .collect();
                let answers = questions
                    .iter()
                    .map(|q| {
                        let displayed = shown.get(&(q.item, q.feature.clone())).copied().unwrap_or(0.0);
                        let (judgment, confidence) = user.answer(q, displayed);
                        QuizAnswer {
                            item: q.item,
                            feature: q.feature.clone(),
                            judgment,
                            confidence,
                        }
                    })
                    .collect();
                let (_, e) = s.submit_quiz(ctx, answers)?;
                record(&s, &mut log, e);
            }
            Err(Error::Empty(_)) => {}
            Err(e) => return Err(e),
        }
        let score = s.efficacy()?;
        let e = s.assess(ctx, assessment_from(&score, cfg.session.list_size))?;
        record(&s, &mut log, e);
        scores.push(score);
    }
    Ok(SessionOutcome {
        session: id,
        group,
        scores,
        log,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub group: Group,
    /// Mean ξ across sessions, per trial.
    pub per_trial_mean: Vec<f64>,
    pub first_five_mean: Option<f64>,
    pub last_five_mean: Option<f64>,
    pub sessions: Vec<SessionOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub groups: Vec<GroupReport>,
    /// Feedback vs non-feedback on per-session mean ξ over the last five trials.
    pub last_five_t: Option<TTest>,
    /// Feedback vs non-feedback on last-trial ξ.
    pub last_trial_t: Option<TTest>,
}

impl SimReport {
    pub fn group(&self, g: Group) -> Option<&GroupReport> {
        self.groups.iter().find(|r| r.group == g)
    }
}

fn window_mean(xi: &[f64], range: std::ops::Range<usize>) -> Option<f64> {
    let v = xi.get(range)?;
    (!v.is_empty()).then(|| mean(v))
}

fn first_five(xi: &[f64]) -> Option<f64> {
    window_mean(xi, 0..xi.len().min(5))
}

fn last_five(xi: &[f64]) -> Option<f64> {
    window_mean(xi, xi.len().saturating_sub(5)..xi.len())
}

pub fn run_simulation(ctx: &Context, cfg: &SimConfig) -> Result<SimReport> {
    let mut groups = Vec::new();
    for group in [Group::Feedback, Group::NonFeedback] {
        let sessions = (0..cfg.sessions_per_group)
            .into_par_iter()
            .map(|i| run_session(ctx, cfg, group, i))
            .collect::<Result<Vec<_>>>()?;
        let trials = cfg.trials as usize;
        let per_trial_mean: Vec<f64> = if sessions.is_empty() {
            Vec::new()
        } else {
            (0..trials)
                .map(|t| mean(&sessions.iter().map(|s| s.scores[t].xi).collect::<Vec<_>>()))
                .collect()
        };
        groups.push(GroupReport {
            group,
            first_five_mean: first_five(&per_trial_mean),
            last_five_mean: last_five(&per_trial_mean),
            per_trial_mean,
            sessions,
        });
    }
    let per_session = |g: &GroupReport, f: fn(&[f64]) -> Option<f64>| -> Vec<f64> {
        g.sessions.iter().filter_map(|s| f(&s.xi())).collect()
    };
    let test = |f: fn(&[f64]) -> Option<f64>| {
        let a = per_session(&groups[0], f);
        let b = per_session(&groups[1], f);
        two_sample_t(&a, &b).ok()
    };
    let last_five_t = test(last_five);
    let last_trial_t = test(|x| x.last().copied());
    Ok(SimReport {
        config: *cfg,
        groups,
        last_five_t,
        last_trial_t,
    })
}

/// Per-trial mean ξ rows `(group, trial, mean)` for CSV output.
pub fn curve_rows(report: &SimReport) -> Vec<(Group, u32, f64)> {
    report
        .groups
        .iter()
        .flat_map(|g| {
            g.per_trial_mean
                .iter()
                .enumerate()
                .map(move |(t, &m)| (g.group, t as u32 + 1, m))
        })
        .collect()
}

/// A synthetic recording for one simulated session. Each trial's drive is its
/// efficacy self-rating rescaled to [0, 1].
pub fn synthetic_recording(outcome: &SessionOutcome, cfg: &SyntheticConfig) -> Result<Recording> {
    let summary = summarize_log(&outcome.log)?;
    let trials: Vec<(u32, f64)> = summary
        .trials
        .iter()
        .filter_map(|t| Some((t.efficacy.trial, (t.assessment?.efficacy_self_rating - 1.0) / 8.0)))
        .collect();
    synthesize(&trials, &SyntheticConfig {
        seed: seed_for_name(cfg.seed, &outcome.session),
        ..*cfg
    })
}
