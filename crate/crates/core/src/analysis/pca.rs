use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `out_dim` rows of length `d`, orthonormal (rows past the data rank are zero).
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn fit(rows: &[Vec<f64>], out_dim: usize) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::invalid("PCA needs at least two rows"));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("ragged PCA input"));
        }
        if d < out_dim {
            return Err(Error::invalid(format!("cannot keep {out_dim} components of {d} dimensions")));
        }
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let centered = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
        let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let top = eig.eigenvalues[order[0]].max(0.0);
        let mut components = Vec::with_capacity(out_dim);
        let mut explained_variance = Vec::with_capacity(out_dim);
        for &idx in order.iter().take(out_dim) {
            let lambda = eig.eigenvalues[idx];
            if lambda <= 1e-12 * top.max(f64::MIN_POSITIVE) {
                log::warn!("PCA input has rank below {out_dim}; zero-filling component");
                components.push(vec![0.0; d]);
                explained_variance.push(0.0);
                continue;
            }
            let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
            let pivot = v
                .iter()
                .copied()
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .unwrap_or(0.0);
            if pivot < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            components.push(v);
            explained_variance.push(lambda);
        }
        Ok(Self {
            mean,
            components,
            explained_variance,
        })
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(x.iter().zip(&self.mean)).map(|(w, (v, m))| w * (v - m)).sum())
            .collect()
    }

    pub fn fit_transform(rows: &[Vec<f64>], out_dim: usize) -> Result<(Self, Vec<Vec<f64>>)> {
        let model = Self::fit(rows, out_dim)?;
        let projected = rows.iter().map(|r| model.transform(r)).collect();
        Ok((model, projected))
    }
}
