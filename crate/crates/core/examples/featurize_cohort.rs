//! Featurize every case of a manifest and cache the matrix to disk.
//!
//! ```text
//! cargo run --release --example synth_cohort -- /tmp/small_cohort
//! cargo run --release --example featurize_cohort -- /tmp/small_cohort/manifest.csv /tmp/features.json
//! ```

use std::path::PathBuf;

use flowcll::featurize::{load_cohort, read_cache, write_cache, ErrorPolicy, PanelSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let manifest = PathBuf::from(args.next().ok_or("usage: featurize_cohort MANIFEST [OUT.json]")?);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "features.json".into()));

    let panel = PanelSpec::default();
    let load = load_cohort(&manifest, &panel, ErrorPolicy::SkipAndReport)?;
    for skipped in &load.skipped {
        eprintln!("skipped row {} ({}): {}", skipped.row, skipped.case_id, skipped.message);
    }
    let meta = write_cache(&load.cohort, &out, Some(&panel), load.events_consumed, None)?;
    println!(
        "{} cases x {} features ({} events) -> {} + {}",
        meta.n_cases,
        meta.n_features,
        meta.events_consumed,
        out.display(),
        meta.data_file
    );

    let (cohort, _) = read_cache(&out)?;
    assert_eq!(cohort, load.cohort);
    println!("cache reloads identically");
    Ok(())
}
