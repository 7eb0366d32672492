//! Second-order gradient boosting with logistic loss.
//!
//! Each round computes per-row gradients `g = p − y` and hessians
//! `h = p(1 − p)` at the current margin, then grows one tree level by level.
//! A node is split at the (feature, threshold) maximizing
//!
//! ```text
//! gain = ½ [G_L²/(H_L+λ) + G_R²/(H_R+λ) − (G_L+G_R)²/(H_L+H_R+λ)] − γ
//! ```
//!
//! over every midpoint between adjacent distinct feature values in the node,
//! subject to both children holding at least `min_child_weight` hessian.
//! Leaves take the Newton weight `−G/(H+λ)`.
//!
//! Stored leaf values are these raw weights. The margin of a row is
//! `logit(base_score) + Σ_t learning_rate · leaf_t(x)`, accumulated in tree
//! order; the probability is its sigmoid.
//!
//! Gains within [`GAIN_TOLERANCE`] of the incumbent count as ties. Features
//! are scanned in ascending order and thresholds ascending within a feature,
//! and a candidate only replaces the incumbent if it is strictly better, so
//! ties go to the lowest feature index and then the lowest threshold. The
//! scan is split into fixed blocks of features whose winners are reduced in
//! block order, which makes the result independent of the thread count.

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::columns::{SortedColumns, FEATURE_BLOCK};
use super::tree::{Node, Tree};
use super::{validate_training, ModelError, Result};

/// Relative slack under which two gains are considered equal.
pub const GAIN_TOLERANCE: f64 = 1e-12;

/// Whether `candidate` beats `incumbent` by more than the tie tolerance.
#[inline]
pub fn improves(candidate: f64, incumbent: f64) -> bool {
    candidate > incumbent + GAIN_TOLERANCE * incumbent.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    /// Initial probability; the starting margin is its logit.
    pub base_score: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_trees: 100,
            max_depth: 3,
            learning_rate: 0.3,
            l2_lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            base_score: 0.5,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ModelError::InvalidParams(m.to_string()));
        if self.n_trees == 0 {
            return bad("n_trees must be at least 1");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return bad("l2_lambda must be a non-negative number");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be a non-negative number");
        }
        if !(self.min_child_weight >= 0.0 && self.min_child_weight.is_finite()) {
            return bad("min_child_weight must be a non-negative number");
        }
        if !(self.base_score > 0.0 && self.base_score < 1.0) {
            return bad("base_score must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn base_margin(&self) -> f64 {
        (self.base_score / (1.0 - self.base_score)).ln()
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            l2_lambda: self.l2_lambda,
            gamma: self.gamma,
            min_child_weight: self.min_child_weight,
        }
    }
}

/// The subset of [`GbtParams`] that shapes a single tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub l2_lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbtModel {
    pub params: GbtParams,
    pub trees: Vec<Tree>,
    pub n_features: usize,
    pub seed: u64,
}

impl GbtModel {
    /// Raw margin (log-odds) for one row; no dimension check.
    pub fn margin(&self, x: &[f32]) -> f64 {
        let lr = self.params.learning_rate;
        self.trees
            .iter()
            .fold(self.params.base_margin(), |m, t| m + lr * t.predict(x))
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Logistic loss `−[y ln σ(m) + (1−y) ln(1−σ(m))]` at margin `m`.
pub fn logistic_loss(margin: f64, label: u8) -> f64 {
    if label == 1 {
        softplus(-margin)
    } else {
        softplus(margin)
    }
}

/// First and second derivative of [`logistic_loss`] in the margin:
/// `g = σ(m) − y`, `h = σ(m)(1 − σ(m))`.
#[inline]
pub fn logistic_grad_hess(margin: f64, label: u8) -> (f64, f64) {
    let p = sigmoid(margin);
    let q = sigmoid(-margin);
    // p − 1 written as −q keeps full relative precision for confident rows.
    let g = if label == 1 { -q } else { p };
    (g, p * q)
}

/// One chosen split, for inspection and testing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRecord {
    pub node: usize,
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrownTree {
    pub tree: Tree,
    pub splits: Vec<SplitRecord>,
}

const NO_SLOT: u32 = u32::MAX;

struct Pending {
    node: usize,
    g: f64,
    h: f64,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

#[derive(Clone, Copy, Default)]
struct ScanState {
    g: f64,
    h: f64,
    n: u32,
    last: f32,
}

fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    let denom = h + lambda;
    if denom > 0.0 {
        -g / denom
    } else {
        0.0
    }
}

/// Grows one regression tree on fixed gradients and hessians.
///
/// `columns` must have been built from `rows`.
pub fn grow_tree(
    columns: &SortedColumns,
    rows: &[&[f32]],
    grad: &[f64],
    hess: &[f64],
    params: &TreeParams,
) -> GrownTree {
    let n = rows.len();
    debug_assert_eq!(columns.n_rows(), n);
    let placeholder = Node::Leaf { value: 0.0 };
    let mut nodes = vec![placeholder];
    let mut splits = Vec::new();
    let mut slot_of = vec![0u32; n];
    let mut frontier = vec![Pending {
        node: 0,
        g: grad.iter().sum(),
        h: hess.iter().sum(),
    }];

    for depth in 0..=params.max_depth {
        if frontier.is_empty() {
            break;
        }
        let best = if depth < params.max_depth {
            find_splits(columns, &slot_of, grad, hess, &frontier, params)
        } else {
            vec![None; frontier.len()]
        };
        let mut next: Vec<Pending> = Vec::new();
        // slot -> (left slot, right slot, feature, threshold)
        let mut routes: Vec<Option<(u32, u32, usize, f64)>> = Vec::with_capacity(frontier.len());
        for (p, cand) in frontier.iter().zip(&best) {
            match cand {
                Some(c) => {
                    let left = nodes.len();
                    nodes.push(placeholder);
                    nodes.push(placeholder);
                    nodes[p.node] = Node::Split {
                        feature: c.feature as u32,
                        threshold: c.threshold,
                        left: left as u32,
                        right: left as u32 + 1,
                    };
                    splits.push(SplitRecord {
                        node: p.node,
                        feature: c.feature,
                        threshold: c.threshold,
                        gain: c.gain,
                    });
                    let l = next.len() as u32;
                    routes.push(Some((l, l + 1, c.feature, c.threshold)));
                    for node in [left, left + 1] {
                        next.push(Pending { node, g: 0.0, h: 0.0 });
                    }
                }
                None => {
                    nodes[p.node] = Node::Leaf {
                        value: leaf_weight(p.g, p.h, params.l2_lambda),
                    };
                    routes.push(None);
                }
            }
        }
        for (i, row) in rows.iter().enumerate() {
            let s = slot_of[i];
            if s == NO_SLOT {
                continue;
            }
            slot_of[i] = match routes[s as usize] {
                Some((l, r, f, t)) => {
                    let to = if f64::from(row[f]) < t { l } else { r };
                    next[to as usize].g += grad[i];
                    next[to as usize].h += hess[i];
                    to
                }
                None => NO_SLOT,
            };
        }
        frontier = next;
    }
    GrownTree {
        tree: Tree { nodes },
        splits,
    }
}

/// Best split per frontier slot, or `None` where no candidate has positive
/// gain.
fn find_splits(
    columns: &SortedColumns,
    slot_of: &[u32],
    grad: &[f64],
    hess: &[f64],
    frontier: &[Pending],
    params: &TreeParams,
) -> Vec<Option<Candidate>> {
    let lambda = params.l2_lambda;
    let parent_score: Vec<f64> = frontier.iter().map(|p| p.g * p.g / (p.h + lambda)).collect();
    let n_features = columns.n_features();
    let n_blocks = n_features.div_ceil(FEATURE_BLOCK);

    let scan_block = |block: usize| -> Vec<Option<Candidate>> {
        let mut best: Vec<Option<Candidate>> = vec![None; frontier.len()];
        let mut state = vec![ScanState::default(); frontier.len()];
        let f_end = ((block + 1) * FEATURE_BLOCK).min(n_features);
        for f in block * FEATURE_BLOCK..f_end {
            state.fill(ScanState::default());
            for e in columns.feature(f) {
                let s = slot_of[e.row as usize];
                if s == NO_SLOT {
                    continue;
                }
                let s = s as usize;
                let st = &mut state[s];
                if st.n > 0 && e.value > st.last {
                    let p = &frontier[s];
                    let (gl, hl) = (st.g, st.h);
                    let (gr, hr) = (p.g - gl, p.h - hl);
                    if hl >= params.min_child_weight && hr >= params.min_child_weight {
                        let gain =
                            0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent_score[s]) - params.gamma;
                        if improves(gain, best[s].map_or(0.0, |c| c.gain)) {
                            best[s] = Some(Candidate {
                                gain,
                                feature: f,
                                threshold: (f64::from(st.last) + f64::from(e.value)) * 0.5,
                            });
                        }
                    }
                }
                let r = e.row as usize;
                st.g += grad[r];
                st.h += hess[r];
                st.n += 1;
                st.last = e.value;
            }
        }
        best
    };

    let per_block: Vec<Vec<Option<Candidate>>> = (0..n_blocks).into_par_iter().map(scan_block).collect();
    let mut best: Vec<Option<Candidate>> = vec![None; frontier.len()];
    for block in per_block {
        for (acc, cand) in best.iter_mut().zip(block) {
            if let Some(c) = cand {
                if improves(c.gain, acc.map_or(0.0, |a| a.gain)) {
                    *acc = Some(c);
                }
            }
        }
    }
    best
}

/// Trains a boosted ensemble on rows with 0/1 labels.
///
/// Exact split finding has no randomness; `seed` is recorded in the model.
pub fn gbt_train(rows: &[&[f32]], labels: &[u8], params: &GbtParams, seed: u64) -> Result<GbtModel> {
    params.validate()?;
    let n_features = validate_training(rows, labels)?;
    let columns = SortedColumns::build(rows);
    let tree_params = params.tree_params();
    let lr = params.learning_rate;
    let mut margins = vec![params.base_margin(); rows.len()];
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut grad = vec![0.0; rows.len()];
    let mut hess = vec![0.0; rows.len()];
    for round in 0..params.n_trees {
        for ((m, &y), (g, h)) in margins.iter().zip(labels).zip(grad.iter_mut().zip(&mut hess)) {
            (*g, *h) = logistic_grad_hess(*m, y);
        }
        let grown = grow_tree(&columns, rows, &grad, &hess, &tree_params);
        for (m, row) in margins.iter_mut().zip(rows) {
            *m += lr * grown.tree.predict(row);
        }
        if log::log_enabled!(log::Level::Debug) {
            let loss: f64 = margins
                .iter()
                .zip(labels)
                .map(|(&m, &y)| logistic_loss(m, y))
                .sum::<f64>()
                / rows.len() as f64;
            debug!("round {round}: {} splits, train log-loss {loss:.6}", grown.splits.len());
        }
        trees.push(grown.tree);
    }
    Ok(GbtModel {
        params: params.clone(),
        trees,
        n_features,
        seed,
    })
}

pub fn gbt_predict_proba(model: &GbtModel, features: &[f32]) -> Result<f64> {
    if features.len() != model.n_features {
        return Err(ModelError::DimensionMismatch {
            expected: model.n_features,
            got: features.len(),
        });
    }
    Ok(sigmoid(model.margin(features)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refs(rows: &[Vec<f32>]) -> Vec<&[f32]> {
        rows.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn defaults() {
        let p = GbtParams::default();
        assert_eq!((p.n_trees, p.max_depth), (100, 3));
        assert_eq!(p.base_margin(), 0.0);
        p.validate().unwrap();
        let mut bad = p.clone();
        bad.learning_rate = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn newton_leaf_weight() {
        // Four positives at p = 0.5: G = -2, H = 1, so w = 2 / (1 + 1) = 1.
        let (g, h) = logistic_grad_hess(0.0, 1);
        assert_eq!((g, h), (-0.5, 0.25));
        assert_eq!(leaf_weight(4.0 * g, 4.0 * h, 1.0), 1.0);
    }

    #[test]
    fn pure_node_stays_a_leaf() {
        let rows = vec![vec![1.0f32], vec![2.0], vec![3.0], vec![4.0]];
        let r = refs(&rows);
        let cols = SortedColumns::build(&r);
        let (g, h): (Vec<f64>, Vec<f64>) = (0..4).map(|_| logistic_grad_hess(0.0, 1)).unzip();
        let grown = grow_tree(&cols, &r, &g, &h, &GbtParams::default().tree_params());
        // Splitting identical gradients never gains anything.
        assert!(grown.splits.is_empty());
        assert_eq!(grown.tree, Tree::leaf(1.0));
    }

    #[test]
    fn separable_feature() {
        let rows: Vec<Vec<f32>> = (0..10).map(|i| vec![i as f32 - 4.5]).collect();
        let labels: Vec<u8> = (0..10).map(|i| u8::from(i >= 5)).collect();
        let m = gbt_train(&refs(&rows), &labels, &GbtParams::default(), 1).unwrap();
        match m.trees[0].nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(feature, 0);
                assert!(threshold > -0.5 && threshold < 0.5);
            }
            _ => panic!("root should split"),
        }
        for (row, &y) in rows.iter().zip(&labels) {
            let p = gbt_predict_proba(&m, row).unwrap();
            assert_eq!(p > 0.5, y == 1);
        }
        assert!(gbt_predict_proba(&m, &[7.0]).unwrap() > 0.5);
        assert!(gbt_predict_proba(&m, &[-7.0]).unwrap() < 0.5);
    }

    #[test]
    fn empty_and_leaf_models() {
        let mut m = GbtModel {
            params: GbtParams::default(),
            trees: vec![],
            n_features: 3,
            seed: 0,
        };
        assert_eq!(gbt_predict_proba(&m, &[1.0, 2.0, 3.0]).unwrap(), 0.5);
        m.params.learning_rate = 1.0;
        m.trees.push(Tree::leaf(0.0));
        assert_eq!(gbt_predict_proba(&m, &[0.0; 3]).unwrap(), 0.5);
        m.trees[0] = Tree::leaf(1.5);
        assert_eq!(gbt_predict_proba(&m, &[0.0; 3]).unwrap(), sigmoid(1.5));
        assert!(matches!(
            gbt_predict_proba(&m, &[0.0; 2]),
            Err(ModelError::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn tie_rule() {
        assert!(!improves(1.0, 1.0));
        assert!(!improves(1.0 + 1e-13, 1.0));
        assert!(improves(1.0 + 1e-9, 1.0));
        assert!(!improves(1e-13, 0.0));
    }

    #[test]
    fn stable_loss_and_gradients() {
        assert!((logistic_loss(0.0, 1) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(logistic_loss(800.0, 1) >= 0.0);
        assert!((logistic_loss(-800.0, 1) - 800.0).abs() < 1e-9);
        let (g, h) = logistic_grad_hess(40.0, 1);
        assert!(g < 0.0 && g > -1e-17);
        assert!(h > 0.0);
    }
}
