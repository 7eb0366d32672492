//! Synthesize a cohort, featurize it, train both models on one 80/20 split
//! and print held-out metrics.
//!
//! ```text
//! cargo run --release --example end_to_end -- /tmp/cohort [seed]
//! ```

use std::path::PathBuf;
use std::time::Instant;

use flowcll::eval::evaluate_split;
use flowcll::featurize::{load_cohort, split_cohort, ErrorPolicy, PanelSpec};
use flowcll::models::ModelSpec;
use flowcll::synth::{generate_cohort, CohortPlan, MANIFEST_FILE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "cohort".into()));
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(42);

    let t = Instant::now();
    if !out.join(MANIFEST_FILE).exists() {
        let plan = CohortPlan {
            seed,
            output_dir: out.clone(),
            ..CohortPlan::default()
        };
        let summary = generate_cohort(&plan)?;
        println!(
            "synth: {} cases, {} files in {:.1?}",
            summary.n_cases,
            summary.n_files,
            t.elapsed()
        );
    }

    let t = Instant::now();
    let load = load_cohort(&out.join(MANIFEST_FILE), &PanelSpec::default(), ErrorPolicy::FailFast)?;
    let cohort = load.cohort;
    println!(
        "featurize: {} x {} ({} events) in {:.1?}",
        cohort.len(),
        cohort.n_features(),
        load.events_consumed,
        t.elapsed()
    );

    let split = split_cohort(&cohort, 0.8, seed)?;
    let (rows, labels) = cohort.select(&split.train_ids)?;
    for kind in ["gbt", "rf"] {
        let spec = ModelSpec::default_for(kind).expect("known model kind");
        let t = Instant::now();
        let model = spec.train(&rows, &labels, seed)?;
        let train_time = t.elapsed();
        let ev = evaluate_split(&model, &cohort, &split, &split.test_ids)?;
        println!(
            "{kind}: trained in {train_time:.1?}; test accuracy {:?}, auc {:?}, {:?}",
            ev.metrics.accuracy, ev.auc, ev.confusion
        );
    }
    Ok(())
}
