use serde::{Deserialize, Serialize};

use super::{ModelError, Result};

/// A tree node in flat storage. Children always sit at higher indices than
/// their parent; the root is node 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        #[serde(rename = "f")]
        feature: u32,
        #[serde(rename = "t")]
        threshold: f64,
        #[serde(rename = "l")]
        left: u32,
        #[serde(rename = "r")]
        right: u32,
    },
    Leaf {
        #[serde(rename = "leaf")]
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    /// Leaf value reached by `x`.
    #[inline]
    pub fn predict(&self, x: &[f32]) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if f64::from(x[feature as usize]) < threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left as usize).max(walk(nodes, right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Features used by split nodes, in node order.
    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature as usize),
            Node::Leaf { .. } => None,
        })
    }

    /// Structural checks for deserialized trees: every non-root node has
    /// exactly one parent at a lower index, features are in range, values
    /// are finite, depth is bounded.
    pub fn validate(&self, n_features: usize, max_depth: usize) -> Result<()> {
        let bad = |m: String| Err(ModelError::Malformed(m));
        if self.nodes.is_empty() {
            return bad("tree has no nodes".into());
        }
        let mut parents = vec![0u32; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Leaf { value } => {
                    if !value.is_finite() {
                        return bad(format!("node {i}: non-finite leaf value"));
                    }
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature as usize >= n_features {
                        return bad(format!(
                            "node {i}: feature {feature} out of range for {n_features} features"
                        ));
                    }
                    if !threshold.is_finite() {
                        return bad(format!("node {i}: non-finite threshold"));
                    }
                    for c in [left, right] {
                        let c = c as usize;
                        if c <= i || c >= self.nodes.len() {
                            return bad(format!("node {i}: invalid child index {c}"));
                        }
                        parents[c] += 1;
                    }
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return bad("nodes do not form a single tree".into());
        }
        let depth = self.depth();
        if depth > max_depth {
            return bad(format!("tree depth {depth} exceeds max_depth {max_depth}"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump() -> Tree {
        Tree {
            nodes: vec![
                Node::Split {
                    feature: 1,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: -1.0 },
                Node::Leaf { value: 2.0 },
            ],
        }
    }

    #[test]
    fn routes_left_below_threshold() {
        let t = stump();
        assert_eq!(t.predict(&[9.0, 0.25]), -1.0);
        assert_eq!(t.predict(&[9.0, 0.5]), 2.0);
        assert_eq!(t.depth(), 1);
        assert_eq!(t.n_leaves(), 2);
    }

    #[test]
    fn json_node_shapes() {
        let json = serde_json::to_string(&stump()).unwrap();
        assert_eq!(
            json,
            r#"{"nodes":[{"f":1,"t":0.5,"l":1,"r":2},{"leaf":-1.0},{"leaf":2.0}]}"#
        );
        let back: Tree = serde_json::from_str(&json).unwrap();
        assert_eq!(back, stump());
    }

    #[test]
    fn validation() {
        stump().validate(2, 3).unwrap();
        assert!(stump().validate(1, 3).is_err());
        assert!(stump().validate(2, 0).is_err());
        let mut cyclic = stump();
        cyclic.nodes[0] = Node::Split {
            feature: 0,
            threshold: 0.0,
            left: 0,
            right: 2,
        };
        assert!(cyclic.validate(2, 3).is_err());
        let mut shared = stump();
        shared.nodes[0] = Node::Split {
            feature: 0,
            threshold: 0.0,
            left: 2,
            right: 2,
        };
        assert!(shared.validate(2, 3).is_err());
    }
}
