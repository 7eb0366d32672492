//! JSON persistence for trained ensembles.
//!
//! ```json
//! {"schema_version": 1, "tool_version": "0.1.0", "model_type": "gbt", "params": {...},
//!  "n_features": 520000, "seed": 42, "leaf_values": "raw_weight",
//!  "trees": [{"nodes": [{"f": 3, "t": 0.5, "l": 1, "r": 2}, {"leaf": -0.4}, ...]}]}
//! ```
//!
//! `leaf_values` names the leaf convention: `"raw_weight"` for boosted trees
//! (scaled by `learning_rate` at prediction time) and `"positive_fraction"`
//! for forests. Floats are written with shortest round-trip formatting, so a
//! reloaded model predicts bit-identically.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::forest::{ForestModel, ForestParams};
use super::gbt::{GbtModel, GbtParams};
use super::tree::Tree;
use super::{Model, ModelError, Result};

pub const SCHEMA_VERSION: u32 = 1;

const GBT_LEAVES: &str = "raw_weight";
const RF_LEAVES: &str = "positive_fraction";

#[derive(Serialize)]
struct DocumentOut<'a, P: Serialize> {
    schema_version: u32,
    tool_version: &'static str,
    model_type: &'static str,
    params: &'a P,
    n_features: usize,
    seed: u64,
    leaf_values: &'static str,
    trees: &'a [Tree],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentIn {
    schema_version: u32,
    #[allow(dead_code)]
    tool_version: Option<String>,
    model_type: String,
    params: Value,
    n_features: usize,
    seed: u64,
    leaf_values: Option<String>,
    trees: Vec<Tree>,
}

/// Pretty-printed JSON document for `model`.
pub fn serialize_model(model: &Model) -> Result<Vec<u8>> {
    let bytes = match model {
        Model::Gbt(m) => serde_json::to_vec_pretty(&DocumentOut {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            model_type: "gbt",
            params: &m.params,
            n_features: m.n_features,
            seed: m.seed,
            leaf_values: GBT_LEAVES,
            trees: &m.trees,
        }),
        Model::Rf(m) => serde_json::to_vec_pretty(&DocumentOut {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            model_type: "rf",
            params: &m.params,
            n_features: m.n_features,
            seed: m.seed,
            leaf_values: RF_LEAVES,
            trees: &m.trees,
        }),
    };
    bytes.map_err(|e| ModelError::Malformed(e.to_string()))
}

/// Parses and structurally validates a model document.
pub fn deserialize_model(bytes: &[u8]) -> Result<Model> {
    let probe: Value = serde_json::from_slice(bytes).map_err(|e| ModelError::Malformed(e.to_string()))?;
    let found = probe
        .get("schema_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| ModelError::Malformed("missing schema_version".into()))?;
    if found != u64::from(SCHEMA_VERSION) {
        return Err(ModelError::SchemaVersionMismatch {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: SCHEMA_VERSION,
        });
    }
    let doc: DocumentIn = serde_json::from_value(probe).map_err(|e| ModelError::Malformed(e.to_string()))?;
    debug_assert_eq!(doc.schema_version, SCHEMA_VERSION);
    let check_leaves = |what: &str| {
        let expected = if what == "gbt" { GBT_LEAVES } else { RF_LEAVES };
        match doc.leaf_values.as_deref() {
            None => Ok(()),
            Some(v) if v == expected => Ok(()),
            Some(v) => Err(ModelError::Malformed(format!(
                "leaf_values {v:?} does not match model_type {what:?}"
            ))),
        }
    };
    let (model, n_trees, max_depth) = match doc.model_type.as_str() {
        "gbt" => {
            check_leaves("gbt")?;
            let params: GbtParams =
                serde_json::from_value(doc.params).map_err(|e| ModelError::Malformed(format!("params: {e}")))?;
            params.validate()?;
            let (n, d) = (params.n_trees, params.max_depth);
            (
                Model::Gbt(GbtModel {
                    params,
                    trees: doc.trees,
                    n_features: doc.n_features,
                    seed: doc.seed,
                }),
                n,
                d,
            )
        }
        "rf" => {
            check_leaves("rf")?;
            let params: ForestParams =
                serde_json::from_value(doc.params).map_err(|e| ModelError::Malformed(format!("params: {e}")))?;
            params.validate()?;
            let (n, d) = (params.n_trees, params.max_depth);
            (
                Model::Rf(ForestModel {
                    params,
                    trees: doc.trees,
                    n_features: doc.n_features,
                    seed: doc.seed,
                }),
                n,
                d,
            )
        }
        other => return Err(ModelError::Malformed(format!("unknown model_type {other:?}"))),
    };
    let trees = match &model {
        Model::Gbt(m) => &m.trees,
        Model::Rf(m) => &m.trees,
    };
    if trees.len() > n_trees {
        return Err(ModelError::Malformed(format!(
            "{} trees exceed n_trees = {n_trees}",
            trees.len()
        )));
    }
    for (i, tree) in trees.iter().enumerate() {
        tree.validate(doc.n_features, max_depth)
            .map_err(|e| ModelError::Malformed(format!("tree {i}: {e}")))?;
        if let Model::Rf(_) = model {
            let out_of_range = tree
                .nodes
                .iter()
                .any(|n| matches!(n, super::Node::Leaf { value } if !(0.0..=1.0).contains(value)));
            if out_of_range {
                return Err(ModelError::Malformed(format!("tree {i}: forest leaf outside [0, 1]")));
            }
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Node;

    fn gbt_with(trees: Vec<Tree>, n_features: usize) -> Model {
        Model::Gbt(GbtModel {
            params: GbtParams::default(),
            trees,
            n_features,
            seed: 9,
        })
    }

    #[test]
    fn round_trip() {
        let tree = Tree {
            nodes: vec![
                Node::Split {
                    feature: 1,
                    threshold: 0.1 + 0.2,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: -1.0 / 3.0 },
                Node::Leaf { value: 2.0f64.sqrt() },
            ],
        };
        let m = gbt_with(vec![tree], 2);
        let back = deserialize_model(&serialize_model(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn empty_ensemble_is_constant() {
        let m = gbt_with(Vec::new(), 4);
        let back = deserialize_model(&serialize_model(&m).unwrap()).unwrap();
        assert_eq!(back.predict_proba(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 0.5);
    }

    #[test]
    fn rejects_bad_documents() {
        let stump = Tree {
            nodes: vec![
                Node::Split {
                    feature: 5,
                    threshold: 0.0,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: 0.0 },
                Node::Leaf { value: 1.0 },
            ],
        };
        let m = gbt_with(vec![stump], 3);
        let bytes = serialize_model(&m).unwrap();
        assert!(matches!(deserialize_model(&bytes), Err(ModelError::Malformed(_))));

        let mut v: Value = serde_json::from_slice(&serialize_model(&gbt_with(vec![], 3)).unwrap()).unwrap();
        v["schema_version"] = 2.into();
        assert!(matches!(
            deserialize_model(&serde_json::to_vec(&v).unwrap()),
            Err(ModelError::SchemaVersionMismatch { found: 2, expected: 1 })
        ));
        assert!(deserialize_model(b"{not json").is_err());
    }
}
