//! Gini random forest.
//!
//! Each tree is fit on a bootstrap resample (n draws with replacement) and
//! picks every split from a fresh random subset of `floor(sqrt(d))` features,
//! minimizing the size-weighted Gini impurity of the two children. Leaves
//! hold the (bootstrap-weighted) fraction of positive rows; the forest
//! probability is the mean leaf value over trees.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{Node, Tree};
use super::{validate_training, ModelError, Result};
use crate::seeds::mix_seed;

const IMPURITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Split criterion; only `"gini"` is supported.
    pub criterion: String,
    /// Features considered per split; `None` means `floor(sqrt(d))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 2,
            criterion: "gini".into(),
            max_features: None,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ModelError::InvalidParams(m.to_string()));
        if self.n_trees == 0 {
            return bad("n_trees must be at least 1");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1");
        }
        if self.criterion != "gini" {
            return bad("criterion must be \"gini\"");
        }
        if self.max_features == Some(0) {
            return bad("max_features must be at least 1");
        }
        Ok(())
    }

    pub fn features_per_split(&self, n_features: usize) -> usize {
        let k = self
            .max_features
            .unwrap_or_else(|| (n_features as f64).sqrt().floor() as usize);
        k.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub params: ForestParams,
    pub trees: Vec<Tree>,
    pub n_features: usize,
    pub seed: u64,
}

/// Gini impurity `1 − Σ p_k²` of a two-class node from (possibly weighted)
/// class counts.
pub fn gini_impurity(negatives: f64, positives: f64) -> Result<f64> {
    let n = negatives + positives;
    if !(negatives >= 0.0 && positives >= 0.0) || n <= 0.0 {
        return Err(ModelError::EmptyNode);
    }
    Ok(gini_unchecked(negatives, positives))
}

#[inline]
fn gini_unchecked(neg: f64, pos: f64) -> f64 {
    let n = neg + pos;
    let (p0, p1) = (neg / n, pos / n);
    1.0 - (p0 * p0 + p1 * p1)
}

/// A row in a node with its bootstrap multiplicity.
#[derive(Clone, Copy)]
struct Sample {
    row: u32,
    weight: f64,
}

struct Builder<'a> {
    rows: &'a [&'a [f32]],
    labels: &'a [u8],
    n_features: usize,
    k: usize,
    max_depth: usize,
}

impl Builder<'_> {
    fn counts(&self, samples: &[Sample]) -> (f64, f64) {
        samples.iter().fold((0.0, 0.0), |(n, p), s| {
            if self.labels[s.row as usize] == 1 {
                (n, p + s.weight)
            } else {
                (n + s.weight, p)
            }
        })
    }

    fn build(&self, samples: Vec<Sample>, rng: &mut ChaCha8Rng) -> Tree {
        let mut nodes = Vec::new();
        self.grow(&mut nodes, samples, 0, rng);
        Tree { nodes }
    }

    fn grow(&self, nodes: &mut Vec<Node>, samples: Vec<Sample>, depth: usize, rng: &mut ChaCha8Rng) -> u32 {
        let id = nodes.len();
        let (neg, pos) = self.counts(&samples);
        nodes.push(Node::Leaf {
            value: pos / (neg + pos),
        });
        if depth >= self.max_depth || neg == 0.0 || pos == 0.0 {
            return id as u32;
        }
        let parent = gini_unchecked(neg, pos);
        let Some((feature, threshold, impurity)) = self.best_split(&samples, neg, pos, rng) else {
            return id as u32;
        };
        if impurity >= parent - IMPURITY_TOLERANCE {
            return id as u32;
        }
        let (left, right): (Vec<Sample>, Vec<Sample>) = samples
            .into_iter()
            .partition(|s| f64::from(self.rows[s.row as usize][feature]) < threshold);
        let l = self.grow(nodes, left, depth + 1, rng);
        let r = self.grow(nodes, right, depth + 1, rng);
        nodes[id] = Node::Split {
            feature: feature as u32,
            threshold,
            left: l,
            right: r,
        };
        id as u32
    }

    /// Lowest weighted child impurity over a random feature subset; ties go
    /// to the lowest feature index, then the lowest threshold.
    fn best_split(&self, samples: &[Sample], neg: f64, pos: f64, rng: &mut ChaCha8Rng) -> Option<(usize, f64, f64)> {
        let mut features = index::sample(rng, self.n_features, self.k).into_vec();
        features.sort_unstable();
        let total = neg + pos;
        let mut best: Option<(usize, f64, f64)> = None;
        let mut column: Vec<(f32, u8, f64)> = Vec::with_capacity(samples.len());
        for f in features {
            column.clear();
            column.extend(
                samples
                    .iter()
                    .map(|s| (self.rows[s.row as usize][f], self.labels[s.row as usize], s.weight)),
            );
            column.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let (mut ln, mut lp) = (0.0, 0.0);
            for i in 0..column.len() {
                let (v, y, w) = column[i];
                if y == 1 {
                    lp += w;
                } else {
                    ln += w;
                }
                let Some(&(next, _, _)) = column.get(i + 1) else {
                    break;
                };
                if next <= v {
                    continue;
                }
                let (rn, rp) = (neg - ln, pos - lp);
                let nl = ln + lp;
                let nr = rn + rp;
                let impurity = (nl * gini_unchecked(ln, lp) + nr * gini_unchecked(rn, rp)) / total;
                let better = match best {
                    None => true,
                    Some((_, _, b)) => impurity < b - IMPURITY_TOLERANCE,
                };
                if better {
                    best = Some((f, (f64::from(v) + f64::from(next)) * 0.5, impurity));
                }
            }
        }
        best
    }
}

/// Trains a forest; tree `t` draws from its own generator seeded from
/// `(seed, t)`, so the result does not depend on thread scheduling.
pub fn rf_train(rows: &[&[f32]], labels: &[u8], params: &ForestParams, seed: u64) -> Result<ForestModel> {
    params.validate()?;
    let n_features = validate_training(rows, labels)?;
    let builder = Builder {
        rows,
        labels,
        n_features,
        k: params.features_per_split(n_features),
        max_depth: params.max_depth,
    };
    let n = rows.len();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, t as u64));
            let samples = if params.bootstrap {
                let mut weights = vec![0u32; n];
                for _ in 0..n {
                    weights[rng.random_range(0..n)] += 1;
                }
                weights
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w > 0)
                    .map(|(i, &w)| Sample {
                        row: i as u32,
                        weight: f64::from(w),
                    })
                    .collect()
            } else {
                (0..n)
                    .map(|i| Sample {
                        row: i as u32,
                        weight: 1.0,
                    })
                    .collect()
            };
            builder.build(samples, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        params: params.clone(),
        trees,
        n_features,
        seed,
    })
}

/// Mean leaf value over trees; a forest without trees predicts 0.5.
pub fn rf_predict_proba(model: &ForestModel, features: &[f32]) -> Result<f64> {
    if features.len() != model.n_features {
        return Err(ModelError::DimensionMismatch {
            expected: model.n_features,
            got: features.len(),
        });
    }
    if model.trees.is_empty() {
        return Ok(0.5);
    }
    let sum: f64 = model.trees.iter().map(|t| t.predict(features)).sum();
    Ok(sum / model.trees.len() as f64)
}
