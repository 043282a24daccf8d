//! Personal decision-tree regressor and top-N ranking of the candidate pool.
//!
//! Features are binary, so every split is `x[dim] < 0.5` (absent goes left).

use serde::{Deserialize, Serialize};

use crate::catalog::{Encoding, ItemId, MAX_RATING, MIN_RATING};
use crate::error::{Error, Result};

pub const DEFAULT_LIST_SIZE: usize = 20;

/// Smallest SSE decrease that counts as a real split.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonalDatum {
    pub item: ItemId,
    pub encoding: Encoding,
    pub rating: f64,
}

impl PersonalDatum {
    pub fn new(item: ItemId, encoding: Encoding, rating: f64) -> Self {
        Self {
            item,
            encoding,
            rating: clamp_rating(rating),
        }
    }
}

pub fn clamp_rating(r: f64) -> f64 {
    r.clamp(MIN_RATING, MAX_RATING)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_split: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 40,
            min_split: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        dim: usize,
        threshold: f64,
        samples: usize,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        value: f64,
        samples: usize,
    },
}

impl Node {
    fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn leaves<'a>(&'a self, out: &mut Vec<&'a Node>) {
        match self {
            Node::Leaf { .. } => out.push(self),
            Node::Split { left, right, .. } => {
                left.leaves(out);
                right.leaves(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub dimension: usize,
    pub config: TreeConfig,
    pub root: Node,
}

/// Anything that maps an encoding to an expected rating.
pub trait Regressor {
    fn dimension(&self) -> usize;
    fn predict(&self, x: &Encoding) -> Result<f64>;
}

impl Regressor for RegressionTree {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn predict(&self, x: &Encoding) -> Result<f64> {
        RegressionTree::predict(self, x)
    }
}

fn sse(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    values.map(|v| (v - mean).powi(2)).sum()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (n, sum) = values.fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    sum / n as f64
}

/// Best split by SSE decrease; ties keep the lowest dimension.
fn best_split(data: &[&PersonalDatum], dims: usize) -> Option<(usize, f64)> {
    let parent = sse(data.iter().map(|d| d.rating));
    let mut best: Option<(usize, f64)> = None;
    for dim in 0..dims {
        let right = data.iter().filter(|d| d.encoding.get(dim));
        let left = data.iter().filter(|d| !d.encoding.get(dim));
        let n_right = right.clone().count();
        if n_right == 0 || n_right == data.len() {
            continue;
        }
        let gain = parent - sse(left.map(|d| d.rating)) - sse(right.map(|d| d.rating));
        // gains equal up to rounding are ties
        if gain > MIN_GAIN && best.is_none_or(|(_, g)| gain - g > MIN_GAIN * (1.0 + parent)) {
            best = Some((dim, gain));
        }
    }
    best
}

fn grow(data: &[&PersonalDatum], dims: usize, depth: usize, cfg: &TreeConfig) -> Node {
    let leaf = || Node::Leaf {
        value: mean(data.iter().map(|d| d.rating)),
        samples: data.len(),
    };
    if depth >= cfg.max_depth || data.len() < cfg.min_split {
        return leaf();
    }
    let Some((dim, _)) = best_split(data, dims) else {
        return leaf();
    };
    let (right, left): (Vec<&PersonalDatum>, Vec<&PersonalDatum>) =
        data.iter().partition(|d| d.encoding.get(dim));
    Node::Split {
        dim,
        threshold: 0.5,
        samples: data.len(),
        left: Box::new(grow(&left, dims, depth + 1, cfg)),
        right: Box::new(grow(&right, dims, depth + 1, cfg)),
    }
}

/// CART regression by greedy SSE reduction.
///
/// A node is split only if it holds at least `min_split` samples, is above
/// `max_depth`, and some dimension strictly reduces the SSE.
pub fn fit_tree(data: &[PersonalDatum], cfg: &TreeConfig) -> Result<RegressionTree> {
    let first = data.first().ok_or(Error::Empty("personal data"))?;
    let dimension = first.encoding.len();
    for d in data {
        if d.encoding.len() != dimension {
            return Err(Error::ShapeMismatch {
                expected: dimension,
                got: d.encoding.len(),
            });
        }
        if !d.rating.is_finite() {
            return Err(Error::NonFinite("rating"));
        }
    }
    let refs: Vec<&PersonalDatum> = data.iter().collect();
    Ok(RegressionTree {
        dimension,
        config: *cfg,
        root: grow(&refs, dimension, 0, cfg),
    })
}

impl RegressionTree {
    pub fn constant(dimension: usize, value: f64) -> Self {
        Self {
            dimension,
            config: TreeConfig::default(),
            root: Node::Leaf { value, samples: 0 },
        }
    }

    pub fn predict(&self, x: &Encoding) -> Result<f64> {
        if x.len() != self.dimension {
            return Err(Error::ShapeMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { value, .. } => return Ok(*value),
                Node::Split { dim, left, right, .. } => {
                    node = if x.get(*dim) { right } else { left };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn leaves(&self) -> Vec<&Node> {
        let mut out = Vec::new();
        self.root.leaves(&mut out);
        out
    }

    /// Dimensions used by at least one split.
    pub fn split_dims(&self) -> Vec<usize> {
        fn walk(n: &Node, out: &mut Vec<usize>) {
            if let Node::Split { dim, left, right, .. } = n {
                out.push(*dim);
                walk(left, out);
                walk(right, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub item: ItemId,
    pub expected_rating: f64,
    pub rank: usize,
}

/// Top `size` candidates by expected rating, ranked from 1. Ties keep pool
/// order, so a constant model returns the pool's own (latent-distance) order.
pub fn recommend<M: Regressor + ?Sized>(
    pool: &[(ItemId, &Encoding)],
    model: &M,
    size: usize,
) -> Result<Vec<Prediction>> {
    let mut scored = pool
        .iter()
        .map(|&(item, enc)| Ok((item, model.predict(enc)?)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(scored
        .into_iter()
        .take(size)
        .enumerate()
        .map(|(i, (item, expected_rating))| Prediction {
            item,
            expected_rating,
            rank: i + 1,
        })
        .collect())
}
