use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::autoencoder::Autoencoder;
use crate::catalog::{Catalog, ItemId};

pub const DEFAULT_POOL_SIZE: usize = 40;

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Latent code per catalog item, Euclidean neighbor queries.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentIndex {
    ids: Vec<ItemId>,
    codes: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub item: ItemId,
    pub distance: f64,
}

impl LatentIndex {
    pub fn build(catalog: &Catalog, model: &Autoencoder) -> Self {
        let ids = catalog.items().iter().map(|i| i.id).collect();
        let codes = catalog
            .encoded_rows()
            .iter()
            .map(|e| model.encode(&e.to_f64()))
            .collect();
        Self { ids, codes }
    }

    pub fn from_codes(entries: Vec<(ItemId, Vec<f64>)>) -> Self {
        let (ids, codes) = entries.into_iter().unzip();
        Self { ids, codes }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn code(&self, id: ItemId) -> Option<&[f64]> {
        self.ids.iter().position(|&i| i == id).map(|p| self.codes[p].as_slice())
    }

    pub fn entries(&self) -> impl Iterator<Item = (ItemId, &[f64])> {
        self.ids.iter().copied().zip(self.codes.iter().map(Vec::as_slice))
    }

    fn centroid(&self, rows: impl Iterator<Item = usize>) -> Vec<f64> {
        let dim = self.codes.first().map_or(0, Vec::len);
        let mut c = vec![0.0; dim];
        let mut n = 0usize;
        for r in rows {
            for (ci, v) in c.iter_mut().zip(&self.codes[r]) {
                *ci += v;
            }
            n += 1;
        }
        if n > 0 {
            c.iter_mut().for_each(|v| *v /= n as f64);
        }
        c
    }

    /// The `pool_size` unseen items with the smallest mean latent distance to the
    /// seen set, ordered by (distance, id). An empty seen set ranks by distance to
    /// the global centroid instead.
    pub fn candidate_pool(&self, seen: &BTreeSet<ItemId>, pool_size: usize) -> Vec<Candidate> {
        let seen_rows: Vec<usize> = (0..self.ids.len()).filter(|&r| seen.contains(&self.ids[r])).collect();
        let centroid = if seen_rows.is_empty() {
            Some(self.centroid(0..self.ids.len()))
        } else {
            None
        };
        let mut pool: Vec<Candidate> = (0..self.ids.len())
            .filter(|&r| !seen.contains(&self.ids[r]))
            .map(|r| {
                let d = match &centroid {
                    Some(c) => distance(&self.codes[r], c),
                    None => {
                        seen_rows
                            .iter()
                            .map(|&s| distance(&self.codes[r], &self.codes[s]))
                            .sum::<f64>()
                            / seen_rows.len() as f64
                    }
                };
                Candidate {
                    item: self.ids[r],
                    distance: d,
                }
            })
            .collect();
        pool.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.item.cmp(&b.item)));
        pool.truncate(pool_size);
        pool
    }

    /// Seeded k-means++ / Lloyd clustering of the latent codes.
    pub fn kmeans(&self, k: usize, seed: u64) -> Clustering {
        let n = self.codes.len();
        let k = k.min(n).max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
        if n == 0 {
            return Clustering {
                assignment: vec![],
                centroids,
            };
        }
        centroids.push(self.codes[rng.random_range(0..n)].clone());
        while centroids.len() < k {
            let d2: Vec<f64> = self
                .codes
                .iter()
                .map(|c| {
                    centroids
                        .iter()
                        .map(|m| distance(c, m).powi(2))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            let total: f64 = d2.iter().sum();
            let next = if total <= 0.0 {
                rng.random_range(0..n)
            } else {
                let mut target = rng.random_range(0.0..total);
                d2.iter()
                    .position(|&w| {
                        target -= w;
                        target < 0.0
                    })
                    .unwrap_or(n - 1)
            };
            centroids.push(self.codes[next].clone());
        }

        let mut assignment = vec![0usize; n];
        for _ in 0..100 {
            let mut changed = false;
            for (r, code) in self.codes.iter().enumerate() {
                let best = (0..k)
                    .min_by(|&a, &b| distance(code, &centroids[a]).total_cmp(&distance(code, &centroids[b])))
                    .expect("k >= 1");
                if assignment[r] != best {
                    assignment[r] = best;
                    changed = true;
                }
            }
            for (c, centroid) in centroids.iter_mut().enumerate() {
                let members: Vec<usize> = (0..n).filter(|&r| assignment[r] == c).collect();
                if !members.is_empty() {
                    *centroid = self.centroid(members.into_iter());
                }
            }
            if !changed {
                break;
            }
        }
        Clustering {
            assignment,
            centroids,
        }
    }

    /// One item per k-means cluster: the member nearest its centroid (ties by id).
    /// Used to pick diverse cold-start items for onboarding.
    pub fn representatives(&self, k: usize, seed: u64) -> Vec<ItemId> {
        let clustering = self.kmeans(k, seed);
        clustering
            .centroids
            .iter()
            .enumerate()
            .filter_map(|(c, centroid)| {
                (0..self.ids.len())
                    .filter(|&r| clustering.assignment[r] == c)
                    .min_by(|&a, &b| {
                        distance(&self.codes[a], centroid)
                            .total_cmp(&distance(&self.codes[b], centroid))
                            .then(self.ids[a].cmp(&self.ids[b]))
                    })
                    .map(|r| self.ids[r])
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
}
