//! Confusion-matrix metrics and an ROC curve for a handful of scores.
//!
//! ```text
//! cargo run --example evaluate_roc
//! ```

use flowcll::eval::{confusion, metrics, roc, write_roc_csv, DEFAULT_THRESHOLD};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let labels = [1, 1, 1, 1, 0, 0, 0, 0, 1, 0];
    let scores = [0.95, 0.81, 0.62, 0.40, 0.55, 0.30, 0.12, 0.05, 0.40, 0.40];

    let cm = confusion(&labels, &scores, DEFAULT_THRESHOLD)?;
    println!("{cm:?}");
    let m = metrics(&cm);
    println!("{}", serde_json::to_string_pretty(&m)?);

    let curve = roc(&labels, &scores)?;
    println!("AUC {:.4}", curve.auc);
    write_roc_csv(&curve, std::io::stdout())?;
    Ok(())
}
