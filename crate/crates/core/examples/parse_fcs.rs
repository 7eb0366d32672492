//! Write a small FCS file, read it back and print its layout.
//!
//! ```text
//! cargo run --example parse_fcs -- [path/to/file.fcs]
//! ```
//! Without an argument a two-channel demo file is written to a temp dir.

use flowcll::fcs::{self, EventMatrix, FcsDataset, ParameterInfo};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = match std::env::args().nth(1) {
        Some(p) => std::path::PathBuf::from(p),
        None => {
            let params = vec![
                ParameterInfo::float("FSC-A", 262_144, None),
                ParameterInfo::float("PE-A", 262_144, Some("CD5")),
            ];
            let rows: Vec<[f32; 2]> = (0..5).map(|i| [50_000.0 + i as f32, 120.5 * i as f32]).collect();
            let ds = FcsDataset::from_events(
                params,
                EventMatrix::from_rows(&rows)?,
                [("$CYT".to_string(), "demo".to_string())],
            )?;
            let path = std::env::temp_dir().join("flowcll_demo.fcs");
            let n = fcs::write_file(&ds, &path)?;
            println!("wrote {} ({n} bytes)", path.display());
            path
        }
    };

    let ds = fcs::parse_file(&path)?;
    println!(
        "{} events x {} parameters ({})",
        ds.n_events(),
        ds.n_params(),
        ds.header.version
    );
    for p in &ds.params {
        println!("  $P{}N = {:<14} stain = {:?}", p.index, p.short_name, p.stain);
    }
    for e in 0..ds.n_events().min(3) {
        println!("  event {e}: {:?}", ds.events.row(e));
    }
    Ok(())
}
