//! Train the Gini random forest and compare it with boosting on the same data.
//!
//! ```text
//! cargo run --release --example random_forest
//! ```

use flowcll::eval::{confusion, metrics, roc, DEFAULT_THRESHOLD};
use flowcll::models::{ForestParams, ModelSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // 200 cases x 50 features; only features 0..5 carry signal
    let make = |i: usize, f: usize| (((i * 2_654_435_761) >> (f % 16)) % 100) as f32 / 10.0;
    let rows: Vec<Vec<f32>> = (0..200).map(|i| (0..50).map(|f| make(i, f)).collect()).collect();
    let labels: Vec<u8> = rows
        .iter()
        .map(|r| u8::from(r[..5].iter().sum::<f32>() > 25.0))
        .collect();
    let refs: Vec<&[f32]> = rows.iter().map(Vec::as_slice).collect();
    let (train, test) = refs.split_at(150);
    let (ytrain, ytest) = labels.split_at(150);

    let forest = ModelSpec::Rf(ForestParams {
        max_depth: 3,
        ..ForestParams::default()
    });
    for spec in [forest, ModelSpec::default_for("gbt").unwrap()] {
        let model = spec.train(train, ytrain, 3)?;
        let scores = model.predict_many(test)?;
        let m = metrics(&confusion(ytest, &scores, DEFAULT_THRESHOLD)?);
        println!(
            "{}: accuracy {:.3}, AUC {:.3}",
            spec.kind(),
            m.accuracy.unwrap_or(f64::NAN),
            roc(ytest, &scores)?.auc
        );
    }
    Ok(())
}
