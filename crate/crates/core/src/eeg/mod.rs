//! EEG epochs and per-trial spectral features: band power, differential
//! entropy, hemispheric asymmetry and asymmetric DE.

pub mod filter;
pub mod io;
pub mod synthetic;

use std::f64::consts::{E, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use filter::BandPass;

pub const DEFAULT_SAMPLE_RATE: f64 = 128.0;
pub const ARTIFACT_THRESHOLD_UV: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Theta,
    Alpha,
    Beta,
    Gamma,
}

impl Band {
    pub const ALL: [Band; 4] = [Band::Theta, Band::Alpha, Band::Beta, Band::Gamma];

    pub fn edges(self) -> (f64, f64) {
        match self {
            Band::Theta => (4.0, 7.0),
            Band::Alpha => (8.0, 13.0),
            Band::Beta => (14.0, 29.0),
            Band::Gamma => (30.0, 47.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Band::Theta => "theta",
            Band::Alpha => "alpha",
            Band::Beta => "beta",
            Band::Gamma => "gamma",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// 32-channel 10-20 layout.
pub const CHANNELS_32: [&str; 32] = [
    "Fp1", "AF3", "F3", "F7", "FC5", "FC1", "C3", "T7", "CP5", "CP1", "P3", "P7", "PO3", "O1", "Oz", "Pz", "Fp2", "AF4",
    "Fz", "F4", "F8", "FC6", "FC2", "Cz", "C4", "T8", "CP6", "CP2", "P4", "P8", "PO4", "O2",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Montage {
    pub pairs: Vec<(String, String)>,
}

impl Default for Montage {
    fn default() -> Self {
        let pairs = [
            ("Fp1", "Fp2"),
            ("AF3", "AF4"),
            ("F7", "F8"),
            ("F3", "F4"),
            ("FC5", "FC6"),
            ("FC1", "FC2"),
            ("T7", "T8"),
            ("C3", "C4"),
            ("CP5", "CP6"),
            ("CP1", "CP2"),
            ("P7", "P8"),
            ("P3", "P4"),
            ("O1", "O2"),
        ];
        Self {
            pairs: pairs.iter().map(|(l, r)| (l.to_string(), r.to_string())).collect(),
        }
    }
}

impl Montage {
    pub fn validate(&self) -> Result<()> {
        for (l, r) in &self.pairs {
            if l == r {
                return Err(Error::invalid(format!("montage pair ({l}, {r}) repeats a channel")));
            }
        }
        Ok(())
    }
}

/// One trial's recording, channels × samples in microvolts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EegEpoch {
    pub trial: u32,
    pub sample_rate: f64,
    pub channels: Vec<String>,
    pub samples: Vec<Vec<f64>>,
}

impl EegEpoch {
    pub fn new(trial: u32, sample_rate: f64, channels: Vec<String>, samples: Vec<Vec<f64>>) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::invalid(format!("sample rate {sample_rate}")));
        }
        if channels.len() != samples.len() {
            return Err(Error::ShapeMismatch {
                expected: channels.len(),
                got: samples.len(),
            });
        }
        let len = samples.first().map_or(0, Vec::len);
        if let Some(bad) = samples.iter().find(|s| s.len() != len) {
            return Err(Error::ShapeMismatch {
                expected: len,
                got: bad.len(),
            });
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("EEG samples"));
        }
        Ok(Self {
            trial,
            sample_rate,
            channels,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels.iter().position(|c| c == name).map(|i| self.samples[i].as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Prototype order; the band-pass has twice this order.
    pub prototype_order: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { prototype_order: 2 }
    }
}

pub fn bandpass(epoch: &EegEpoch, band: Band, cfg: &FilterConfig) -> Result<EegEpoch> {
    let (lo, hi) = band.edges();
    let filter = BandPass::butterworth(cfg.prototype_order, lo, hi, epoch.sample_rate)?;
    Ok(EegEpoch {
        trial: epoch.trial,
        sample_rate: epoch.sample_rate,
        channels: epoch.channels.clone(),
        samples: epoch.samples.iter().map(|ch| filter.filtfilt(ch)).collect(),
    })
}

/// Mean squared amplitude.
pub fn band_power(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Empty("EEG channel"));
    }
    Ok(x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64)
}

/// Gaussian differential entropy ½·ln(2πeσ²).
pub fn differential_entropy(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::Empty("EEG channel"));
    }
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    if var <= 0.0 {
        return Err(Error::ZeroVariance("EEG channel"));
    }
    Ok(0.5 * (2.0 * PI * E * var).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HasymVariant {
    /// ln L − ln R
    #[default]
    Log,
    /// (L − R) / (L + R)
    Rational,
}

pub fn hasym(left: f64, right: f64, variant: HasymVariant) -> Result<f64> {
    if !(left > 0.0 && right > 0.0) {
        return Err(Error::invalid(format!("asymmetry needs positive powers, got {left} and {right}")));
    }
    Ok(match variant {
        HasymVariant::Log => left.ln() - right.ln(),
        HasymVariant::Rational => (left - right) / (left + right),
    })
}

pub fn ade(de_left: f64, de_right: f64) -> f64 {
    de_left - de_right
}

/// Drops every `window`-sample block in which any channel exceeds
/// `threshold` in absolute value. Returns the cleaned epoch and the number of
/// dropped blocks.
pub fn reject_artifacts(epoch: &EegEpoch, threshold: f64, window: usize) -> Result<(EegEpoch, usize)> {
    if window == 0 {
        return Err(Error::invalid("artifact window must be positive"));
    }
    let n = epoch.len();
    let mut keep = Vec::with_capacity(n);
    let mut dropped = 0;
    for start in (0..n).step_by(window) {
        let end = (start + window).min(n);
        let bad = epoch.samples.iter().any(|ch| ch[start..end].iter().any(|v| v.abs() > threshold));
        if bad {
            dropped += 1;
        } else {
            keep.push(start..end);
        }
    }
    let samples = epoch
        .samples
        .iter()
        .map(|ch| keep.iter().flat_map(|r| ch[r.clone()].iter().copied()).collect())
        .collect();
    Ok((
        EegEpoch {
            trial: epoch.trial,
            sample_rate: epoch.sample_rate,
            channels: epoch.channels.clone(),
            samples,
        },
        dropped,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeFeature {
    pub band: Band,
    pub channel: String,
    pub power: f64,
    pub de: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFeature {
    pub band: Band,
    pub left: String,
    pub right: String,
    pub hasym: f64,
    pub ade: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFeatures {
    pub trial: u32,
    pub electrodes: Vec<ElectrodeFeature>,
    pub pairs: Vec<PairFeature>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Hasym,
    De,
    Ade,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 3] = [FeatureKind::Hasym, FeatureKind::De, FeatureKind::Ade];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Hasym => "HASYM",
            FeatureKind::De => "DE",
            FeatureKind::Ade => "ADE",
        }
    }
}

impl TrialFeatures {
    pub fn electrode(&self, band: Band, channel: &str) -> Option<&ElectrodeFeature> {
        self.electrodes.iter().find(|e| e.band == band && e.channel == channel)
    }

    /// Feature vector of one kind in one band, in montage or channel order.
    pub fn vector(&self, kind: FeatureKind, band: Band) -> Vec<f64> {
        match kind {
            FeatureKind::Hasym => self.pairs.iter().filter(|p| p.band == band).map(|p| p.hasym).collect(),
            FeatureKind::Ade => self.pairs.iter().filter(|p| p.band == band).map(|p| p.ade).collect(),
            FeatureKind::De => self.electrodes.iter().filter(|e| e.band == band).map(|e| e.de).collect(),
        }
    }

    /// Mean asymmetry over the montage pairs present in this trial.
    pub fn lateralization(&self, band: Band) -> Option<f64> {
        let v: Vec<f64> = self.pairs.iter().filter(|p| p.band == band).map(|p| p.hasym).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub filter: FilterConfig,
    pub hasym: HasymVariant,
    /// Minimum epoch length in seconds.
    pub min_seconds: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            filter: FilterConfig::default(),
            hasym: HasymVariant::Log,
            min_seconds: 1.0,
        }
    }
}

pub fn extract_features(epoch: &EegEpoch, montage: &Montage, cfg: &FeatureConfig) -> Result<TrialFeatures> {
    montage.validate()?;
    if epoch.duration() < cfg.min_seconds {
        return Err(Error::invalid(format!(
            "trial {} has {:.2} s of signal, need {}",
            epoch.trial,
            epoch.duration(),
            cfg.min_seconds
        )));
    }
    let mut electrodes = Vec::new();
    let mut pairs = Vec::new();
    for band in Band::ALL {
        let filtered = bandpass(epoch, band, &cfg.filter)?;
        let start = electrodes.len();
        for (name, x) in filtered.channels.iter().zip(&filtered.samples) {
            electrodes.push(ElectrodeFeature {
                band,
                channel: name.clone(),
                power: band_power(x)?,
                de: differential_entropy(x)?,
            });
        }
        let here = &electrodes[start..];
        for (l, r) in &montage.pairs {
            let find = |c: &str| here.iter().find(|e| &e.channel == c);
            let (Some(le), Some(re)) = (find(l), find(r)) else {
                log::warn!("trial {}: pair ({l}, {r}) missing from recording, skipped", epoch.trial);
                continue;
            };
            pairs.push(PairFeature {
                band,
                left: l.clone(),
                right: r.clone(),
                hasym: hasym(le.power, re.power, cfg.hasym)?,
                ade: ade(le.de, re.de),
            });
        }
    }
    Ok(TrialFeatures {
        trial: epoch.trial,
        electrodes,
        pairs,
    })
}

/// Mean lateralization over the later half of the trials minus the earlier
/// half; with an odd count the middle trial is left out.
pub fn lateralized_power_change(trials: &[TrialFeatures], band: Band) -> Result<f64> {
    if trials.len() < 2 {
        return Err(Error::invalid("lateralization change needs at least two trials"));
    }
    let lat: Vec<f64> = trials
        .iter()
        .map(|t| {
            t.lateralization(band)
                .ok_or_else(|| Error::invalid(format!("trial {} has no montage pairs", t.trial)))
        })
        .collect::<Result<_>>()?;
    let half = lat.len() / 2;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(mean(&lat[lat.len() - half..]) - mean(&lat[..half]))
}
