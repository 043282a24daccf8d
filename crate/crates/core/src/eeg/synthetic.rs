//! Synthetic recordings for exercising the pipeline without a headset.
//!
//! Each channel mixes a few oscillations per band with white noise. A per-trial
//! drive in [0, 1] scales the left-hemisphere alpha and beta amplitudes, so
//! lateralization tracks the drive.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::io::{Recording, TrialBoundary};
use super::{Band, Montage, CHANNELS_32, DEFAULT_SAMPLE_RATE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub sample_rate: f64,
    pub trial_seconds: f64,
    /// Oscillation amplitude per band component, µV.
    pub amplitude: f64,
    pub noise_sd: f64,
    /// Relative left-hemisphere gain at drive 1 versus drive 0.
    pub effect: f64,
    /// Per-trial probability of a 150 µV blink transient.
    pub artifact_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
            trial_seconds: 4.0,
            amplitude: 6.0,
            noise_sd: 3.0,
            effect: 0.8,
            artifact_rate: 0.0,
            seed: 0,
        }
    }
}

/// One recording with a trial per `(trial, drive)` entry, laid end to end.
pub fn synthesize(trials: &[(u32, f64)], cfg: &SyntheticConfig) -> Result<Recording> {
    if !(cfg.sample_rate > 2.0 * Band::Gamma.edges().1) {
        return Err(Error::invalid(format!("sample rate {} too low for gamma", cfg.sample_rate)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
    let montage = Montage::default();
    let left: BTreeSet<&str> = montage.pairs.iter().map(|(l, _)| l.as_str()).collect();
    let channels: Vec<String> = CHANNELS_32.iter().map(|c| c.to_string()).collect();
    let per_trial = (cfg.trial_seconds * cfg.sample_rate).round() as usize;
    let total = per_trial * trials.len();
    let mut data = vec![Vec::with_capacity(total); channels.len()];
    let mut boundaries = Vec::with_capacity(trials.len());

    for (k, &(trial, drive)) in trials.iter().enumerate() {
        let drive = drive.clamp(0.0, 1.0);
        let t0 = (k * per_trial) as f64 / cfg.sample_rate;
        boundaries.push(TrialBoundary {
            trial,
            start_s: t0,
            end_s: t0 + cfg.trial_seconds,
        });
        let blink = rng.random_bool(cfg.artifact_rate.clamp(0.0, 1.0));
        let blink_at = rng.random_range(0..per_trial.max(1));
        for (c, name) in channels.iter().enumerate() {
            let mut comps = Vec::new();
            for band in Band::ALL {
                let (lo, hi) = band.edges();
                let mut amp = cfg.amplitude;
                if matches!(band, Band::Alpha | Band::Beta) && left.contains(name.as_str()) {
                    amp *= 1.0 + cfg.effect * (drive - 0.5);
                }
                for _ in 0..3 {
                    let f = rng.random_range(lo + 0.5..hi - 0.5);
                    let phase = rng.random_range(0.0..2.0 * PI);
                    comps.push((amp / 3f64.sqrt(), f, phase));
                }
            }
            for i in 0..per_trial {
                let t = i as f64 / cfg.sample_rate;
                let mut v: f64 = comps.iter().map(|(a, f, p)| a * (2.0 * PI * f * t + p).sin()).sum();
                v += noise.sample(&mut rng);
                if blink && name.starts_with("Fp") && i.abs_diff(blink_at) < 8 {
                    v += 150.0;
                }
                data[c].push(v);
            }
        }
    }
    let times = (0..total).map(|i| i as f64 / cfg.sample_rate).collect();
    Ok(Recording {
        sample_rate: cfg.sample_rate,
        montage,
        channels,
        times,
        data,
        boundaries,
    })
}
