//! Three-class efficacy classifiers: linear one-vs-rest SVM and kNN, scored by
//! leave-one-out F1.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pca::PcaModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Low,
    Mid,
    High,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Low, Label::Mid, Label::High];

    /// Bins a 9-point rating: 1-3 low, 4-6 mid, 7-9 high. Continuous ratings
    /// split at 3.5 and 6.5.
    pub fn from_rating(r: f64) -> Result<Self> {
        if !(1.0..=9.0).contains(&r) {
            return Err(Error::invalid(format!("rating {r} outside [1, 9]")));
        }
        Ok(if r < 3.5 {
            Label::Low
        } else if r < 6.5 {
            Label::Mid
        } else {
            Label::High
        })
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTrial {
    pub features: Vec<f64>,
    pub label: Label,
}

/// Z-score parameters fit on a training set. Constant columns get unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[&[f64]]) -> Self {
        let d = rows.first().map_or(0, |r| r.len());
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v / n;
            }
        }
        let mut scale = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in scale.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        for s in &mut scale {
            *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
        }
        Self { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    pub tol: f64,
    pub max_epochs: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-4,
            max_epochs: 1000,
        }
    }
}

/// Binary hinge-loss linear SVM by dual coordinate descent. The last weight is
/// the bias (a constant-1 feature).
fn train_binary(x: &[Vec<f64>], y: &[f64], cfg: &SvmConfig) -> Vec<f64> {
    let d = x.first().map_or(0, Vec::len) + 1;
    let mut w = vec![0.0; d];
    let mut alpha = vec![0.0; x.len()];
    let q: Vec<f64> = x.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>() + 1.0).collect();
    let dot = |w: &[f64], r: &[f64]| r.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + w[d - 1];
    for _ in 0..cfg.max_epochs {
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..x.len() {
            let g = y[i] * dot(&w, &x[i]) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == cfg.c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / q[i]).clamp(0.0, cfg.c);
                let step = (alpha[i] - old) * y[i];
                for (wj, v) in w.iter_mut().zip(&x[i]) {
                    *wj += step * v;
                }
                w[d - 1] += step;
            }
        }
        if pg_max - pg_min < cfg.tol {
            break;
        }
    }
    w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub standardizer: Standardizer,
    /// One weight vector per class present in training, bias last.
    pub weights: Vec<(Label, Vec<f64>)>,
}

impl LinearSvm {
    pub fn train(trials: &[&LabeledTrial], cfg: &SvmConfig) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::Empty("training trials"));
        }
        let raw: Vec<&[f64]> = trials.iter().map(|t| t.features.as_slice()).collect();
        let standardizer = Standardizer::fit(&raw);
        let x: Vec<Vec<f64>> = raw.iter().map(|r| standardizer.apply(r)).collect();
        let present: Vec<Label> = Label::ALL
            .into_iter()
            .filter(|l| trials.iter().any(|t| t.label == *l))
            .collect();
        let weights = if present.len() == 1 {
            log::warn!("single-class training set; predicting {:?} everywhere", present[0]);
            vec![(present[0], vec![0.0; x[0].len() + 1])]
        } else {
            present
                .into_iter()
                .map(|l| {
                    let y: Vec<f64> = trials.iter().map(|t| if t.label == l { 1.0 } else { -1.0 }).collect();
                    (l, train_binary(&x, &y, cfg))
                })
                .collect()
        };
        Ok(Self { standardizer, weights })
    }

    pub fn margins(&self, x: &[f64]) -> Vec<(Label, f64)> {
        let z = self.standardizer.apply(x);
        self.weights
            .iter()
            .map(|(l, w)| {
                let bias = w[w.len() - 1];
                (*l, z.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + bias)
            })
            .collect()
    }

    /// Largest margin; ties go to the earlier class in Low < Mid < High.
    pub fn predict(&self, x: &[f64]) -> Label {
        let mut best = (self.weights[0].0, f64::NEG_INFINITY);
        for (l, m) in self.margins(x) {
            if m > best.1 {
                best = (l, m);
            }
        }
        best.0
    }
}

/// Majority vote of the `k` nearest training trials (Euclidean). Distance ties
/// keep training order; vote ties go to the label of the nearest neighbor
/// among the tied labels.
pub fn knn_predict(train: &[&LabeledTrial], query: &[f64], k: usize) -> Result<Label> {
    if train.is_empty() {
        return Err(Error::Empty("kNN training set"));
    }
    if k == 0 || k > train.len() {
        return Err(Error::invalid(format!("k = {k} with {} training trials", train.len())));
    }
    let mut order: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, t)| (t.features.iter().zip(query).map(|(a, b)| (a - b).powi(2)).sum(), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let nearest = &order[..k];
    let mut votes = [0usize; 3];
    for &(_, i) in nearest {
        votes[train[i].label.index()] += 1;
    }
    let top = *votes.iter().max().expect("three classes");
    Ok(nearest
        .iter()
        .map(|&(_, i)| train[i].label)
        .find(|l| votes[l.index()] == top)
        .expect("some neighbor carries a top label"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Average {
    #[default]
    Macro,
    Micro,
}

/// F1 over the three classes. Under macro averaging a class with no true and
/// no predicted members scores 0.
pub fn f1_score(truth: &[Label], predicted: &[Label], average: Average) -> f64 {
    let mut tp = [0usize; 3];
    let mut fp = [0usize; 3];
    let mut fneg = [0usize; 3];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t == p {
            tp[t.index()] += 1;
        } else {
            fp[p.index()] += 1;
            fneg[t.index()] += 1;
        }
    }
    let f1 = |tp: usize, fp: usize, fneg: usize| {
        let denom = 2 * tp + fp + fneg;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    };
    match average {
        Average::Macro => (0..3).map(|c| f1(tp[c], fp[c], fneg[c])).sum::<f64>() / 3.0,
        Average::Micro => f1(tp.iter().sum(), fp.iter().sum(), fneg.iter().sum()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassifierSpec {
    Svm(SvmConfig),
    Knn { k: usize },
}

impl ClassifierSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::Svm(_) => "svm",
            ClassifierSpec::Knn { .. } => "knn",
        }
    }

    /// Trains on `train` and labels `query`.
    pub fn fit_predict(&self, train: &[&LabeledTrial], query: &[f64]) -> Result<Label> {
        match self {
            ClassifierSpec::Svm(cfg) => Ok(LinearSvm::train(train, cfg)?.predict(query)),
            ClassifierSpec::Knn { k } => knn_predict(train, query, (*k).min(train.len())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub classifier: ClassifierSpec,
    /// PCA output dimension fit inside each training fold; `None` skips PCA.
    pub pca_dim: Option<usize>,
    pub average: Average,
}

/// Leave-one-out predictions, one per trial.
pub fn loocv_predictions(trials: &[LabeledTrial], cfg: &CvConfig) -> Result<Vec<Label>> {
    if trials.len() < 3 {
        return Err(Error::invalid("leave-one-out needs at least three trials"));
    }
    (0..trials.len())
        .into_par_iter()
        .map(|held| {
            let train: Vec<&LabeledTrial> = trials
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != held)
                .map(|(_, t)| t)
                .collect();
            match cfg.pca_dim {
                Some(dim) => {
                    let rows: Vec<Vec<f64>> = train.iter().map(|t| t.features.clone()).collect();
                    let (pca, projected) = PcaModel::fit_transform(&rows, dim)?;
                    let reduced: Vec<LabeledTrial> = projected
                        .into_iter()
                        .zip(&train)
                        .map(|(features, t)| LabeledTrial {
                            features,
                            label: t.label,
                        })
                        .collect();
                    let refs: Vec<&LabeledTrial> = reduced.iter().collect();
                    cfg.classifier.fit_predict(&refs, &pca.transform(&trials[held].features))
                }
                None => cfg.classifier.fit_predict(&train, &trials[held].features),
            }
        })
        .collect()
}

pub fn loocv_f1(trials: &[LabeledTrial], cfg: &CvConfig) -> Result<f64> {
    let predicted = loocv_predictions(trials, cfg)?;
    let truth: Vec<Label> = trials.iter().map(|t| t.label).collect();
    Ok(f1_score(&truth, &predicted, cfg.average))
}
