//! Hypothesis tests and correlation summaries.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Upper tail P(X > x) of a chi-squared variable.
pub fn chi2_sf(x: f64, dof: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(1.0);
    }
    let d = ChiSquared::new(dof).map_err(|e| Error::invalid(format!("chi-squared dof {dof}: {e}")))?;
    Ok(d.sf(x))
}

/// Upper tail P(T > t) of a Student t variable.
pub fn t_sf(t: f64, dof: f64) -> Result<f64> {
    let d = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::invalid(format!("t dof {dof}: {e}")))?;
    Ok(d.sf(t))
}

pub fn two_tailed_t_p(t: f64, dof: f64) -> Result<f64> {
    Ok((2.0 * t_sf(t.abs(), dof)?).min(1.0))
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance (n - 1 denominator).
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub dof: f64,
    pub mean_a: f64,
    pub mean_b: f64,
}

/// Pooled-variance two-tailed Student's t-test.
pub fn two_sample_t(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid("t-test needs at least two values per group"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-test input"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let dof = na + nb - 2.0;
    let pooled = ((na - 1.0) * variance(a) + (nb - 1.0) * variance(b)) / dof;
    let se = (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    let diff = ma - mb;
    let (t, p) = if se == 0.0 || diff == 0.0 {
        if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (diff.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = diff / se;
        (t, two_tailed_t_p(t, dof)?)
    };
    Ok(TTest {
        t,
        p,
        dof,
        mean_a: ma,
        mean_b: mb,
    })
}

/// Ranks from 1 with ties given their average rank.
pub fn midranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation; `None` when either series is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-tailed p-value for a correlation coefficient via the t approximation.
pub fn correlation_p(r: f64, n: usize) -> Result<f64> {
    let dof = n as f64 - 2.0;
    if dof <= 0.0 {
        return Err(Error::invalid("correlation p-value needs at least three points"));
    }
    if r.abs() >= 1.0 {
        return Ok(0.0);
    }
    two_tailed_t_p(r * (dof / (1.0 - r * r)).sqrt(), dof)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<Correlation>> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::invalid("Spearman needs at least three points"));
    }
    let Some(r) = pearson(&midranks(x), &midranks(y)) else {
        return Ok(None);
    };
    Ok(Some(Correlation {
        r,
        p: correlation_p(r, x.len())?,
        n: x.len(),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherCombination {
    pub statistic: f64,
    pub dof: f64,
    pub p: f64,
}

/// Fisher's method: X² = -2 Σ ln p_i against χ² with 2k degrees of freedom.
pub fn fisher_combination(ps: &[f64]) -> Result<FisherCombination> {
    if ps.is_empty() {
        return Err(Error::Empty("p-values"));
    }
    if let Some(p) = ps.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(Error::invalid(format!("p-value {p} outside (0, 1]")));
    }
    let statistic = -2.0 * ps.iter().map(|p| p.ln()).sum::<f64>();
    let dof = 2.0 * ps.len() as f64;
    Ok(FisherCombination {
        statistic,
        dof,
        p: chi2_sf(statistic, dof)?,
    })
}

/// One Table-2 style row: subject-wise Spearman correlations summarized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub r_mean: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub combined_p: f64,
    pub subjects: usize,
}

/// Per-subject Spearman correlations combined with Fisher's method. Subjects
/// with a constant series are skipped.
pub fn spearman_fisher(subjects: &[(Vec<f64>, Vec<f64>)]) -> Result<Option<CorrelationRow>> {
    let mut rs = Vec::new();
    let mut ps = Vec::new();
    for (i, (x, y)) in subjects.iter().enumerate() {
        match spearman(x, y)? {
            Some(c) => {
                rs.push(c.r);
                // a perfect correlation has p = 0; floor it so the log stays finite
                ps.push(c.p.max(f64::MIN_POSITIVE));
            }
            None => log::warn!("subject {i}: constant series, skipped"),
        }
    }
    if rs.is_empty() {
        return Ok(None);
    }
    Ok(Some(CorrelationRow {
        r_mean: mean(&rs),
        r_min: rs.iter().copied().fold(f64::INFINITY, f64::min),
        r_max: rs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        combined_p: fisher_combination(&ps)?.p,
        subjects: rs.len(),
    }))
}

/// Pairwise Pearson matrix. `masked[i][j]` holds `r` only when p < `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PearsonMatrix {
    pub names: Vec<String>,
    pub r: Vec<Vec<Option<f64>>>,
    pub p: Vec<Vec<Option<f64>>>,
    pub masked: Vec<Vec<Option<f64>>>,
}

pub fn pearson_matrix(names: &[&str], columns: &[Vec<f64>], alpha: f64) -> Result<PearsonMatrix> {
    let n = columns.first().map_or(0, Vec::len);
    if n < 3 {
        return Err(Error::invalid("Pearson matrix needs at least three rows"));
    }
    if names.len() != columns.len() || columns.iter().any(|c| c.len() != n) {
        return Err(Error::invalid("ragged questionnaire table"));
    }
    let k = columns.len();
    let mut r = vec![vec![None; k]; k];
    let mut p = vec![vec![None; k]; k];
    let mut masked = vec![vec![None; k]; k];
    for i in 0..k {
        for j in 0..k {
            if let Some(v) = pearson(&columns[i], &columns[j]) {
                let pv = correlation_p(v, n)?;
                r[i][j] = Some(v);
                p[i][j] = Some(pv);
                if pv < alpha {
                    masked[i][j] = Some(v);
                }
            }
        }
    }
    Ok(PearsonMatrix {
        names: names.iter().map(|s| s.to_string()).collect(),
        r,
        p,
        masked,
    })
}
