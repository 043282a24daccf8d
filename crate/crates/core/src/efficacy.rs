//! Explanatory efficacy: Like count times a logistic of the confidence-weighted
//! quiz score, and the quiz generator that feeds it.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, FeatureId, ItemId};
use crate::error::{Error, Result};
use crate::explain::Explanation;

pub const DEFAULT_K: f64 = 90.0;
pub const DEFAULT_QUIZ_SIZE: usize = 10;
pub const MIN_CONFIDENCE: f64 = 1.0;
pub const MAX_CONFIDENCE: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Judgment {
    Correct,
    Incorrect,
}

/// A quiz question: is `feature` one of the reasons `item` was recommended?
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizQuestion {
    pub item: ItemId,
    pub feature: FeatureId,
    pub is_genuine: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizItem {
    pub item: ItemId,
    pub feature: FeatureId,
    pub is_genuine: bool,
    pub judgment: Judgment,
    pub confidence: f64,
}

impl QuizItem {
    pub fn answer(q: &QuizQuestion, judgment: Judgment, confidence: f64) -> Self {
        Self {
            item: q.item,
            feature: q.feature.clone(),
            is_genuine: q.is_genuine,
            judgment,
            confidence,
        }
    }

    /// +1 when the judgment agrees with the truth, -1 otherwise.
    pub fn c_r(&self) -> f64 {
        if (self.judgment == Judgment::Correct) == self.is_genuine {
            1.0
        } else {
            -1.0
        }
    }

    pub fn understanding(&self) -> Result<f64> {
        check_confidence(self.confidence)?;
        Ok(self.c_r() * self.confidence)
    }
}

pub fn check_confidence(c: f64) -> Result<()> {
    if (MIN_CONFIDENCE..=MAX_CONFIDENCE).contains(&c) {
        Ok(())
    } else {
        Err(Error::invalid(format!("confidence {c} outside [1, 9]")))
    }
}

pub fn understanding_score(quiz: &[QuizItem]) -> Result<f64> {
    if quiz.is_empty() {
        return Err(Error::Empty("quiz"));
    }
    quiz.iter().map(QuizItem::understanding).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Like,
    Dislike,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SatisfactionMark {
    pub item: ItemId,
    pub verdict: Verdict,
}

/// Number of items whose latest verdict is Like.
pub fn satisfaction_count(marks: &[SatisfactionMark]) -> u32 {
    let mut last = BTreeMap::new();
    for m in marks {
        last.insert(m.item, m.verdict);
    }
    last.values().filter(|&&v| v == Verdict::Like).count() as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogisticMode {
    /// `1 / (1 + exp(-k x))`
    #[default]
    Literal,
    /// `1 / (1 + exp(-x / k))`
    Normalized,
}

pub fn logistic(x: f64, k: f64, mode: LogisticMode) -> Result<f64> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::invalid(format!("k must be positive, got {k}")));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("understanding score"));
    }
    let z = match mode {
        LogisticMode::Literal => k * x,
        LogisticMode::Normalized => x / k,
    };
    Ok(if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    })
}

pub fn efficacy(a: u32, x: f64, k: f64, mode: LogisticMode) -> Result<f64> {
    Ok(f64::from(a) * logistic(x, k, mode)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficacyScore {
    pub trial: u32,
    pub a: u32,
    pub x: f64,
    pub k: f64,
    pub mode: LogisticMode,
    pub xi: f64,
}

impl EfficacyScore {
    pub fn compute(trial: u32, a: u32, x: f64, k: f64, mode: LogisticMode) -> Result<Self> {
        Ok(Self {
            trial,
            a,
            x,
            k,
            mode,
            xi: efficacy(a, x, k, mode)?,
        })
    }
}

/// Builds a quiz from the explanations shown in a trial's list.
///
/// Half the questions are displayed (item, feature) pairs with positive weight;
/// the other half pair an item with one of its features that was not displayed
/// for it. No feature appears twice. When either pool runs short both halves
/// shrink to match.
pub fn generate_quiz(
    displayed: &[(ItemId, Vec<Explanation>)],
    catalog: &Catalog,
    n_items: usize,
    seed: u64,
) -> Result<Vec<QuizQuestion>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shown: BTreeSet<(ItemId, &FeatureId)> = displayed
        .iter()
        .flat_map(|(item, ex)| ex.iter().map(move |e| (*item, &e.feature)))
        .collect();

    let mut genuine: Vec<(ItemId, FeatureId)> = displayed
        .iter()
        .flat_map(|(item, ex)| ex.iter().filter(|e| e.weight > 0.0).map(move |e| (*item, e.feature.clone())))
        .collect();
    let mut distractors = Vec::new();
    for (item, _) in displayed {
        for f in &catalog.item(*item)?.features {
            if !shown.contains(&(*item, f)) {
                distractors.push((*item, f.clone()));
            }
        }
    }
    genuine.shuffle(&mut rng);
    distractors.shuffle(&mut rng);

    let half = n_items / 2;
    let mut used = BTreeSet::new();
    let pick = |pool: Vec<(ItemId, FeatureId)>, used: &mut BTreeSet<FeatureId>| {
        let mut out = Vec::new();
        for (item, f) in pool {
            if out.len() == half {
                break;
            }
            if used.insert(f.clone()) {
                out.push((item, f));
            }
        }
        out
    };
    let g = pick(genuine, &mut used);
    let d = pick(distractors, &mut used);
    let per_side = g.len().min(d.len());
    if per_side < half {
        log::warn!("quiz reduced to {} questions (requested {n_items})", 2 * per_side);
    }
    if per_side == 0 {
        return Err(Error::Empty("quiz candidates"));
    }
    let mut quiz: Vec<QuizQuestion> = g
        .into_iter()
        .take(per_side)
        .map(|(item, feature)| QuizQuestion {
            item,
            feature,
            is_genuine: true,
        })
        .chain(d.into_iter().take(per_side).map(|(item, feature)| QuizQuestion {
            item,
            feature,
            is_genuine: false,
        }))
        .collect();
    quiz.shuffle(&mut rng);
    Ok(quiz)
}
