//! Monte-Carlo cross-validation (repeated random 80/20 splits) on a
//! synthetic cohort built in memory.
//!
//! ```text
//! cargo run --release --example monte_carlo_cv -- [repeats]
//! ```

use flowcll::eval::cross_validate;
use flowcll::featurize::{featurize_case, CohortMatrix, PanelSpec};
use flowcll::models::ModelSpec;
use flowcll::synth::{generate_case, CohortPlan, EventCountSpec, LabelCounts};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let repeats: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(5);

    let mut plan = CohortPlan {
        counts: LabelCounts {
            normal: 12,
            cll: 10,
            mbcll: 5,
        },
        seed: 5,
        ..CohortPlan::default()
    };
    for recipe in [&mut plan.config.normal, &mut plan.config.cll, &mut plan.config.mbcll] {
        recipe.events = EventCountSpec::fixed(2_000);
    }
    // a narrower window than the default panel keeps this quick
    let panel = PanelSpec {
        skip: 0,
        take: 1_000,
        ..PanelSpec::default()
    };
    let cases = plan
        .case_ids()
        .into_iter()
        .map(|(id, label)| {
            let generated = generate_case(&plan.config, plan.config.recipe(label), &id, plan.seed)?;
            Ok(featurize_case(&generated.tubes, &panel, &id, label)?)
        })
        .collect::<Result<Vec<_>, Box<dyn std::error::Error>>>()?;
    let cohort = CohortMatrix::new(cases)?;

    for kind in ["gbt", "rf"] {
        let spec = ModelSpec::default_for(kind).unwrap();
        let report = cross_validate(&cohort, &spec, repeats, 0.8, 42)?;
        let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
        println!(
            "{kind}: accuracy {} ± {}, AUC {} ± {} over {} repeats",
            fmt(report.accuracy.mean),
            fmt(report.accuracy.std),
            fmt(report.auc.mean),
            fmt(report.auc.std),
            report.n_repeats
        );
    }
    Ok(())
}
