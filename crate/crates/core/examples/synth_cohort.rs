//! Generate a small synthetic cohort (FCS files, manifest, cohort.json).
//!
//! ```text
//! cargo run --release --example synth_cohort -- /tmp/small_cohort [seed]
//! ```

use flowcll::synth::{generate_cohort, CohortPlan, EventCountSpec, LabelCounts};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "small_cohort".into());
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);

    let mut plan = CohortPlan {
        counts: LabelCounts {
            normal: 4,
            cll: 3,
            mbcll: 2,
        },
        seed,
        output_dir: out.into(),
        ..CohortPlan::default()
    };
    // short tubes: just enough for the default 384 + 10,000 event window
    for recipe in [&mut plan.config.normal, &mut plan.config.cll, &mut plan.config.mbcll] {
        recipe.events = EventCountSpec::fixed(10_500);
    }
    let summary = generate_cohort(&plan)?;
    println!(
        "{} cases, {} files in {}",
        summary.n_cases,
        summary.n_files,
        plan.output_dir.display()
    );
    for case in &summary.cases {
        println!(
            "  {:<11} {:<6} clone fraction {:.2} {}",
            case.case_id,
            case.label,
            case.clone_fraction,
            case.clone_variant.as_deref().unwrap_or("")
        );
    }
    Ok(())
}
