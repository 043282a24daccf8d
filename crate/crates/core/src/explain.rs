//! LIME-style local explanations for a rating model over binary features.
//!
//! Perturbations remove active features at random; a kernel-weighted ridge
//! surrogate is fit to the model's predictions on those perturbations and its
//! positive coefficients are rescaled to display weights in [0, 100].

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{Encoding, FeatureEncoding, FeatureId, ItemId};
use crate::error::{Error, Result};
use crate::recommend::Regressor;

pub const LIST_FEATURES: usize = 3;
pub const DETAIL_FEATURES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    pub n_samples: usize,
    /// Kernel width; `None` uses `0.75 * sqrt(dimension)`.
    pub kernel_width: Option<f64>,
    pub ridge_lambda: f64,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            kernel_width: None,
            ridge_lambda: 1.0,
            seed: 0,
        }
    }
}

impl LimeConfig {
    pub fn kernel_width_for(&self, dimension: usize) -> f64 {
        self.kernel_width.unwrap_or(0.75 * (dimension as f64).sqrt())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    fn validate(&self, dimension: usize) -> Result<()> {
        if self.n_samples < dimension + 1 {
            return Err(Error::invalid(format!(
                "n_samples ({}) must be at least dimension + 1 ({})",
                self.n_samples,
                dimension + 1
            )));
        }
        let w = self.kernel_width_for(dimension);
        if !(w > 0.0) {
            return Err(Error::invalid("kernel width must be positive"));
        }
        if !(self.ridge_lambda >= 0.0) {
            return Err(Error::invalid("ridge lambda must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub item: ItemId,
    pub feature: FeatureId,
    /// Display weight in [0, 100].
    pub weight: f64,
    pub raw_coefficient: f64,
}

/// Fitted local surrogate: one coefficient per active slot of the explained item.
#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    pub active: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda_used: f64,
}

/// Kernel weight for a perturbation at Hamming distance `d`.
pub fn kernel(d: f64, width: f64) -> f64 {
    (-(d * d) / (width * width)).exp()
}

/// Weighted ridge regression with an unpenalized intercept. Returns
/// `(intercept, coefficients)`.
pub fn weighted_ridge(rows: &[Vec<f64>], targets: &[f64], weights: &[f64], lambda: f64) -> Option<(f64, Vec<f64>)> {
    let p = rows.first().map_or(0, Vec::len);
    let wsum: f64 = weights.iter().sum();
    if wsum <= 0.0 {
        return None;
    }
    let mut xbar = vec![0.0; p];
    let mut ybar = 0.0;
    for ((r, &y), &w) in rows.iter().zip(targets).zip(weights) {
        for (m, v) in xbar.iter_mut().zip(r) {
            *m += w * v;
        }
        ybar += w * y;
    }
    xbar.iter_mut().for_each(|m| *m /= wsum);
    ybar /= wsum;

    let mut a = DMatrix::<f64>::zeros(p, p);
    let mut b = DVector::<f64>::zeros(p);
    let mut xc = vec![0.0; p];
    for ((r, &y), &w) in rows.iter().zip(targets).zip(weights) {
        for (c, (v, m)) in xc.iter_mut().zip(r.iter().zip(&xbar)) {
            *c = v - m;
        }
        let yc = y - ybar;
        for i in 0..p {
            b[i] += w * xc[i] * yc;
            for j in 0..=i {
                a[(i, j)] += w * xc[i] * xc[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            a[(j, i)] = a[(i, j)];
        }
        a[(i, i)] += lambda;
    }
    let beta = a.cholesky()?.solve(&b);
    if beta.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let intercept = ybar - beta.iter().zip(&xbar).map(|(b, m)| b * m).sum::<f64>();
    Some((intercept, beta.iter().copied().collect()))
}

/// Draws perturbation masks over the active features: `true` keeps a feature,
/// each one is removed independently with probability 0.5.
pub fn sample_masks(k: usize, n: usize, seed: u64) -> Vec<Vec<bool>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..k).map(|_| rng.random_bool(0.5)).collect()).collect()
}

/// Applies a keep-mask over `active` slots to `base`.
pub fn perturb(base: &Encoding, active: &[usize], mask: &[bool]) -> Encoding {
    let mut e = base.clone();
    for (&slot, &keep) in active.iter().zip(mask) {
        if !keep {
            e.set(slot, false);
        }
    }
    e
}

pub fn fit_surrogate<M: Regressor + ?Sized>(encoding: &Encoding, model: &M, cfg: &LimeConfig) -> Result<Surrogate> {
    let dimension = encoding.len();
    if model.dimension() != dimension {
        return Err(Error::ShapeMismatch {
            expected: model.dimension(),
            got: dimension,
        });
    }
    cfg.validate(dimension)?;
    let active: Vec<usize> = encoding.active().collect();
    if active.is_empty() {
        return Err(Error::Empty("active features of explained item"));
    }
    let width = cfg.kernel_width_for(dimension);
    let masks = sample_masks(active.len(), cfg.n_samples, cfg.seed);
    let mut rows = Vec::with_capacity(masks.len());
    let mut targets = Vec::with_capacity(masks.len());
    let mut weights = Vec::with_capacity(masks.len());
    for mask in &masks {
        let removed = mask.iter().filter(|&&k| !k).count() as f64;
        targets.push(model.predict(&perturb(encoding, &active, mask))?);
        weights.push(kernel(removed, width));
        rows.push(mask.iter().map(|&k| f64::from(u8::from(k))).collect());
    }

    let mut lambda = cfg.ridge_lambda;
    let mut solution = weighted_ridge(&rows, &targets, &weights, lambda);
    if solution.is_none() {
        lambda = if lambda > 0.0 { lambda * 10.0 } else { 1e-3 };
        log::warn!("singular surrogate design, retrying with lambda = {lambda}");
        solution = weighted_ridge(&rows, &targets, &weights, lambda);
    }
    let (intercept, coefficients) = solution.ok_or(Error::DegenerateDesign)?;
    Ok(Surrogate {
        active,
        coefficients,
        intercept,
        lambda_used: lambda,
    })
}

/// Coefficients at or below this magnitude are solver noise and count as zero.
pub const COEFFICIENT_TOLERANCE: f64 = 1e-9;

/// Rescales signed coefficients to [0, 100] against the largest positive one.
pub fn display_weights(coefficients: &[f64]) -> Vec<f64> {
    let max_pos = coefficients
        .iter()
        .copied()
        .filter(|c| *c > COEFFICIENT_TOLERANCE)
        .fold(0.0, f64::max);
    coefficients
        .iter()
        .map(|&c| {
            if max_pos > 0.0 && c > COEFFICIENT_TOLERANCE {
                // ratio first so the maximum maps to exactly 100
                (c / max_pos * 100.0).min(100.0)
            } else {
                0.0
            }
        })
        .collect()
}

/// Explains one item's predicted rating. The result holds one explanation per
/// active feature, ordered as [`top_k`] would order them.
pub fn explain_item<M: Regressor + ?Sized>(
    item: ItemId,
    encoding: &Encoding,
    layout: &FeatureEncoding,
    model: &M,
    cfg: &LimeConfig,
) -> Result<Vec<Explanation>> {
    let surrogate = fit_surrogate(encoding, model, cfg)?;
    let weights = display_weights(&surrogate.coefficients);
    let mut out = surrogate
        .active
        .iter()
        .zip(surrogate.coefficients.iter().zip(weights))
        .map(|(&slot, (&raw, weight))| {
            let feature = layout
                .feature_at(slot)
                .cloned()
                .ok_or_else(|| Error::invalid(format!("slot {slot} has no feature")))?;
            Ok(Explanation {
                item,
                feature,
                weight,
                raw_coefficient: raw,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    sort_explanations(&mut out);
    Ok(out)
}

fn sort_explanations(v: &mut [Explanation]) {
    v.sort_by(|a, b| {
        b.weight
            .total_cmp(&a.weight)
            .then_with(|| a.feature.name.cmp(&b.feature.name))
            .then_with(|| a.feature.kind.cmp(&b.feature.kind))
    });
}

/// Top `k` by weight, ties by feature name.
pub fn top_k(explanations: &[Explanation], k: usize) -> Vec<Explanation> {
    let mut v = explanations.to_vec();
    sort_explanations(&mut v);
    v.truncate(k);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::synthetic::bundled_corpus;
    use crate::recommend::RegressionTree;

    /// Rating model defined by a closure, for constructing known attributions.
    struct FnModel<F>(usize, F);

    impl<F: Fn(&Encoding) -> f64> Regressor for FnModel<F> {
        fn dimension(&self) -> usize {
            self.0
        }
        fn predict(&self, x: &Encoding) -> Result<f64> {
            Ok((self.1)(x))
        }
    }

    fn expl(name: &str, w: f64) -> Explanation {
        Explanation {
            item: ItemId(1),
            feature: FeatureId::tag(name),
            weight: w,
            raw_coefficient: w / 100.0,
        }
    }

    #[test]
    fn constant_model_gives_zero_weights() {
        let cat = bundled_corpus();
        let item = &cat.items()[0];
        let enc = cat.encoded(item.id).unwrap();
        let tree = RegressionTree::constant(28, 3.0);
        let ex = explain_item(item.id, enc, cat.encoding(), &tree, &LimeConfig::default()).unwrap();
        assert_eq!(ex.len(), enc.count_active());
        for e in &ex {
            assert!(e.raw_coefficient.abs() < COEFFICIENT_TOLERANCE);
            assert_eq!(e.weight, 0.0);
        }
    }

    #[test]
    fn single_split_feature_gets_full_weight() {
        let enc = Encoding::with_active(28, &[1, 4, 9, 22]);
        let model = FnModel(28, |x: &Encoding| if x.get(9) { 5.0 } else { 3.0 });
        let s = fit_surrogate(&enc, &model, &LimeConfig::default()).unwrap();
        let w = display_weights(&s.coefficients);
        let j = s.active.iter().position(|&a| a == 9).unwrap();
        assert_eq!(w[j], 100.0);
        assert!(w.iter().enumerate().all(|(i, &v)| i == j || v < 100.0));
        assert!((s.coefficients[j] - 2.0).abs() < 0.1, "{}", s.coefficients[j]);
    }

    #[test]
    fn same_seed_same_explanations() {
        let cat = bundled_corpus();
        let item = &cat.items()[3];
        let enc = cat.encoded(item.id).unwrap();
        let model = FnModel(28, |x: &Encoding| x.count_active() as f64 * 0.5);
        let cfg = LimeConfig::default().with_seed(5);
        let a = explain_item(item.id, enc, cat.encoding(), &model, &cfg).unwrap();
        let b = explain_item(item.id, enc, cat.encoding(), &model, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn no_active_features_is_an_error() {
        let model = RegressionTree::constant(28, 3.0);
        let cat = bundled_corpus();
        let r = explain_item(ItemId(1), &Encoding::zeros(28), cat.encoding(), &model, &LimeConfig::default());
        assert!(matches!(r, Err(Error::Empty(_))));
    }

    #[test]
    fn invalid_config_rejected() {
        let model = RegressionTree::constant(28, 3.0);
        let enc = Encoding::with_active(28, &[0]);
        let cfg = LimeConfig {
            n_samples: 10,
            ..LimeConfig::default()
        };
        assert!(matches!(fit_surrogate(&enc, &model, &cfg), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn nonpositive_coefficients_all_zero() {
        assert_eq!(display_weights(&[-1.0, 0.0, -0.2]), vec![0.0, 0.0, 0.0]);
        assert_eq!(display_weights(&[2.0, -1.0, 1.0]), vec![100.0, 0.0, 50.0]);
    }

    #[test]
    fn top_k_small_and_tied() {
        let two = vec![expl("b", 10.0), expl("a", 80.0)];
        assert_eq!(top_k(&two, 3).len(), 2);
        let tied = vec![expl("c", 50.0), expl("a", 50.0), expl("b", 50.0)];
        let names: Vec<_> = top_k(&tied, 3).into_iter().map(|e| e.feature.name).collect();
        assert_eq!(names, ["a", "b", "c"]);
    }

    #[test]
    fn ranking_invariant_to_positive_scaling() {
        let coefs = [0.3, -0.1, 1.2, 0.7, 0.0, 0.7];
        let scaled: Vec<f64> = coefs.iter().map(|c| c * 17.5).collect();
        let make = |c: &[f64]| -> Vec<Explanation> {
            display_weights(c)
                .into_iter()
                .enumerate()
                .map(|(i, w)| expl(&format!("f{i}"), w))
                .collect()
        };
        let a: Vec<_> = top_k(&make(&coefs), 6).into_iter().map(|e| e.feature).collect();
        let b: Vec<_> = top_k(&make(&scaled), 6).into_iter().map(|e| e.feature).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn ignored_feature_has_small_coefficient() {
        let enc = Encoding::with_active(28, &[0, 3, 7, 21, 25]);
        // depends on slots 0 and 21 only; slot 7 is ignored
        let model = FnModel(28, |x: &Encoding| 2.0 + 1.5 * f64::from(u8::from(x.get(0))) + f64::from(u8::from(x.get(21))));
        for seed in 0..10 {
            let s = fit_surrogate(&enc, &model, &LimeConfig::default().with_seed(seed)).unwrap();
            let max = s.coefficients.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            let j = s.active.iter().position(|&a| a == 7).unwrap();
            assert!(s.coefficients[j].abs() < 0.05 * max, "seed {seed}: {:?}", s.coefficients);
        }
    }
}
