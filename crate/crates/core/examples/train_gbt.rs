//! Train a boosted-tree model on a toy problem, inspect it, save and reload.
//!
//! ```text
//! cargo run --example train_gbt
//! ```

use flowcll::models::{deserialize_model, gbt_train, serialize_model, GbtParams, Model};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // two noisy features; the label depends on their sum
    let rows: Vec<Vec<f32>> = (0..60)
        .map(|i| {
            let a = ((i * 37) % 19) as f32;
            let b = ((i * 11) % 13) as f32;
            vec![a, b]
        })
        .collect();
    let labels: Vec<u8> = rows.iter().map(|r| u8::from(r[0] + r[1] > 15.0)).collect();
    let refs: Vec<&[f32]> = rows.iter().map(Vec::as_slice).collect();

    let params = GbtParams {
        n_trees: 20,
        ..GbtParams::default()
    };
    let model = gbt_train(&refs, &labels, &params, 1)?;
    let splits: usize = model.trees.iter().map(|t| t.nodes.len() - t.n_leaves()).sum();
    println!("{} trees, {splits} splits", model.trees.len());
    println!("first tree: {:?}", model.trees[0].nodes);

    let correct = rows
        .iter()
        .zip(&labels)
        .filter(|(r, &y)| (model.margin(r) >= 0.0) == (y == 1))
        .count();
    println!("training accuracy {}/{}", correct, rows.len());

    let model = Model::Gbt(model);
    let json = serialize_model(&model)?;
    let back = deserialize_model(&json)?;
    let probe = [12.0f32, 6.0];
    println!(
        "p(positive | {probe:?}) = {:.4} (reloaded: {:.4})",
        model.predict_proba(&probe)?,
        back.predict_proba(&probe)?
    );
    Ok(())
}
