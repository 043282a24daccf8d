//! Slider feedback: turns a weight change on one feature into a rating shift
//! for every personal datum carrying that feature.

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, FeatureId, ItemId, MAX_RATING, MIN_RATING};
use crate::error::{Error, Result};
use crate::recommend::{clamp_rating, PersonalDatum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackConfig {
    pub c_genre: f64,
    pub c_other: f64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            c_genre: 0.15,
            c_other: 0.3,
        }
    }
}

impl FeedbackConfig {
    pub fn coefficient(&self, feature: &FeatureId) -> f64 {
        if feature.is_genre() {
            self.c_genre
        } else {
            self.c_other
        }
    }
}

/// One slider move in a detail view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub trial: u32,
    pub item: ItemId,
    pub feature: FeatureId,
    pub omega_before: f64,
    pub omega_after: f64,
}

impl FeedbackEvent {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("omega_before", self.omega_before), ("omega_after", self.omega_after)] {
            if !(0.0..=100.0).contains(&w) {
                return Err(Error::invalid(format!("{name} = {w} outside [0, 100]")));
            }
        }
        if self.omega_before == self.omega_after {
            return Err(Error::invalid("slider did not move"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingAdjustment {
    pub feature: FeatureId,
    pub delta: f64,
    pub c: f64,
    pub r: f64,
}

pub fn compute_adjustment(event: &FeedbackEvent, r: f64, cfg: &FeedbackConfig) -> Result<RatingAdjustment> {
    if !(MIN_RATING..=MAX_RATING).contains(&r) {
        return Err(Error::invalid(format!("expected rating {r} outside [0.5, 5]")));
    }
    let c = cfg.coefficient(&event.feature);
    Ok(RatingAdjustment {
        feature: event.feature.clone(),
        delta: c * r * (event.omega_after - event.omega_before) / 100.0,
        c,
        r,
    })
}

/// Adds the adjustment to every datum whose item carries the feature and
/// returns the ids touched, in data order.
pub fn propagate(adjustment: &RatingAdjustment, data: &mut [PersonalDatum], catalog: &Catalog) -> Result<Vec<ItemId>> {
    let mut affected = Vec::new();
    for d in data.iter_mut() {
        if catalog.item(d.item)?.has_feature(&adjustment.feature) {
            d.rating = clamp_rating(d.rating + adjustment.delta);
            affected.push(d.item);
        }
    }
    Ok(affected)
}
