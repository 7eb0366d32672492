//! Independent reference implementations: exhaustive split enumeration for
//! boosted trees, cancellation-free finite differences of the logistic loss,
//! and the pairwise AUC statistic.

use flowcll::models::{Node, Tree, TreeParams, GAIN_TOLERANCE};

/// Tree produced by brute force: every (feature, midpoint) of every node is
/// scored with the gain formula evaluated from scratch.
#[derive(Debug)]
pub enum Oracle {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: Box<Oracle>,
        right: Box<Oracle>,
    },
}

pub fn oracle_improves(c: f64, inc: f64) -> bool {
    c > inc + GAIN_TOLERANCE * inc.abs().max(1.0)
}

#[allow(clippy::needless_range_loop)] // columns are indexed across rows
pub fn oracle_grow(rows: &[Vec<f32>], members: &[usize], g: &[f64], h: &[f64], p: &TreeParams, depth: usize) -> Oracle {
    let sum = |idx: &[usize], v: &[f64]| idx.iter().map(|&i| v[i]).sum::<f64>();
    let (gs, hs) = (sum(members, g), sum(members, h));
    let score = |gg: f64, hh: f64| gg * gg / (hh + p.l2_lambda);
    let leaf = Oracle::Leaf(-gs / (hs + p.l2_lambda));
    if depth >= p.max_depth {
        return leaf;
    }
    let n_features = rows[0].len();
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..n_features {
        let mut values: Vec<f32> = members.iter().map(|&i| rows[i][f]).collect();
        values.sort_by(f32::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = (f64::from(w[0]) + f64::from(w[1])) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = members.iter().partition(|&&i| f64::from(rows[i][f]) < t);
            let (gl, hl, gr, hr) = (sum(&l, g), sum(&l, h), sum(&r, g), sum(&r, h));
            if hl < p.min_child_weight || hr < p.min_child_weight {
                continue;
            }
            let gain = 0.5 * (score(gl, hl) + score(gr, hr) - score(gs, hs)) - p.gamma;
            if oracle_improves(gain, best.map_or(0.0, |b| b.0)) {
                best = Some((gain, f, t));
            }
        }
    }
    match best {
        None => leaf,
        Some((gain, feature, threshold)) => {
            let (l, r): (Vec<usize>, Vec<usize>) =
                members.iter().partition(|&&i| f64::from(rows[i][feature]) < threshold);
            Oracle::Split {
                feature,
                threshold,
                gain,
                left: Box::new(oracle_grow(rows, &l, g, h, p, depth + 1)),
                right: Box::new(oracle_grow(rows, &r, g, h, p, depth + 1)),
            }
        }
    }
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

pub fn assert_matches(tree: &Tree, node: usize, oracle: &Oracle) -> Result<(), String> {
    match (&tree.nodes[node], oracle) {
        (Node::Leaf { value }, Oracle::Leaf(w)) => {
            if close(*value, *w, 1e-10) {
                Ok(())
            } else {
                Err(format!("leaf {node}: {value} vs oracle {w}"))
            }
        }
        (
            Node::Split {
                feature,
                threshold,
                left,
                right,
            },
            Oracle::Split {
                feature: of,
                threshold: ot,
                left: ol,
                right: or,
                ..
            },
        ) => {
            if *feature as usize != *of || threshold != ot {
                return Err(format!(
                    "node {node}: split ({feature}, {threshold}) vs oracle ({of}, {ot})"
                ));
            }
            assert_matches(tree, *left as usize, ol)?;
            assert_matches(tree, *right as usize, or)
        }
        (n, o) => Err(format!("node {node}: {n:?} vs oracle {o:?}")),
    }
}

pub fn count_splits(o: &Oracle) -> usize {
    match o {
        Oracle::Leaf(_) => 0,
        Oracle::Split { left, right, .. } => 1 + count_splits(left) + count_splits(right),
    }
}

pub fn oracle_gains(o: &Oracle, out: &mut Vec<f64>) {
    if let Oracle::Split { gain, left, right, .. } = o {
        out.push(*gain);
        oracle_gains(left, out);
        oracle_gains(right, out);
    }
}

/// `sp(x) = ln(1 + e^x)`. Exact-difference forms of its central first and
/// second differences, free of catastrophic cancellation:
/// `sp(x+δ) − sp(x−δ) = ln1p(e^x · 2 sinh δ / (1 + e^(x−δ)))` and
/// `sp(x+δ) − 2 sp(x) + sp(x−δ) = ln1p(4 e^x sinh²(δ/2) / (1 + e^x)²)`.
pub fn softplus_fd(x: f64, delta: f64) -> (f64, f64) {
    let ex = x.exp();
    let first = (ex * 2.0 * delta.sinh() / (1.0 + (x - delta).exp())).ln_1p() / (2.0 * delta);
    let s = (delta / 2.0).sinh();
    let second = (4.0 * ex * s * s / ((1.0 + ex) * (1.0 + ex))).ln_1p() / (delta * delta);
    (first, second)
}

/// Mann–Whitney statistic by enumerating every (positive, negative) pair.
pub fn pairwise_auc(labels: &[u8], scores: &[f64]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &yi) in labels.iter().enumerate() {
        for (j, &yj) in labels.iter().enumerate() {
            if yi == 1 && yj == 0 {
                pairs += 1.0;
                wins += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                };
            }
        }
    }
    wins / pairs
}
