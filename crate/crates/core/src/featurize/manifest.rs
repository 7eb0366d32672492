use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use super::{featurize_case, CaseLabel, CaseVector, CohortMatrix, FeaturizeError, PanelSpec, Result};
use crate::fcs;

/// One row of the cohort manifest CSV
/// (`case_id,label,tube1,tube2,tube3,tube4`).
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub case_id: String,
    pub label: CaseLabel,
    pub tubes: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorPolicy {
    #[default]
    FailFast,
    SkipAndReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct RowError {
    /// 1-based data row (the header is row 0).
    pub row: usize,
    pub case_id: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct CohortLoad {
    pub cohort: CohortMatrix,
    pub skipped: Vec<RowError>,
    /// Events that entered feature vectors (cases × tubes × take).
    pub events_consumed: u64,
}

/// Reads the manifest. Relative tube paths resolve against the manifest's
/// directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let err = |message: String| FeaturizeError::Manifest {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(id_col), Some(label_col)) = (col("case_id"), col("label")) else {
        return Err(err("header must contain case_id and label".into()));
    };
    let mut tube_cols = Vec::new();
    while let Some(c) = col(&format!("tube{}", tube_cols.len() + 1)) {
        tube_cols.push(c);
    }
    if tube_cols.is_empty() {
        return Err(err("header has no tube1 column".into()));
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| err(format!("row {}: {e}", i + 1)))?;
        let field = |c: usize| record.get(c).unwrap_or("").to_string();
        let label = field(label_col)
            .parse::<CaseLabel>()
            .map_err(|m| err(format!("row {}: {m}", i + 1)))?;
        let tubes = tube_cols
            .iter()
            .map(|&c| {
                let p = PathBuf::from(field(c));
                if p.is_absolute() {
                    p
                } else {
                    base.join(p)
                }
            })
            .collect();
        rows.push(ManifestRow {
            case_id: field(id_col),
            label,
            tubes,
        });
    }
    Ok(rows)
}

fn load_row(row: &ManifestRow, spec: &PanelSpec) -> Result<CaseVector> {
    if row.tubes.len() != spec.n_tubes() {
        return Err(FeaturizeError::WrongTubeCount {
            expected: spec.n_tubes(),
            got: row.tubes.len(),
        });
    }
    let mut tubes = Vec::with_capacity(row.tubes.len());
    for (i, path) in row.tubes.iter().enumerate() {
        let ds = fcs::parse_file(path).map_err(|source| FeaturizeError::Parse {
            tube: i + 1,
            path: path.clone(),
            source,
        })?;
        tubes.push(ds);
    }
    featurize_case(&tubes, spec, &row.case_id, row.label)
}

/// Parses and featurizes every manifest row. Rows are processed in parallel;
/// the cohort keeps manifest order.
pub fn load_cohort(manifest: &Path, spec: &PanelSpec, policy: ErrorPolicy) -> Result<CohortLoad> {
    spec.validate()?;
    let rows = read_manifest(manifest)?;
    if rows.is_empty() {
        return Err(FeaturizeError::EmptyCohort);
    }
    let results: Vec<Result<CaseVector>> = rows.par_iter().map(|r| load_row(r, spec)).collect();
    let mut cases = Vec::with_capacity(rows.len());
    let mut skipped = Vec::new();
    for (i, (row, res)) in rows.iter().zip(results).enumerate() {
        match res {
            Ok(c) => cases.push(c),
            Err(e) => match policy {
                ErrorPolicy::FailFast => {
                    return Err(FeaturizeError::Case {
                        case_id: row.case_id.clone(),
                        source: Box::new(e),
                    })
                }
                ErrorPolicy::SkipAndReport => {
                    warn!("skipping case {} (row {}): {e}", row.case_id, i + 1);
                    skipped.push(RowError {
                        row: i + 1,
                        case_id: row.case_id.clone(),
                        message: e.to_string(),
                    });
                }
            },
        }
    }
    let cohort = CohortMatrix::new(cases)?;
    let events_consumed = (cohort.len() * spec.events_per_case()) as u64;
    info!(
        "featurized {} cases ({} features each, {events_consumed} events)",
        cohort.len(),
        cohort.n_features()
    );
    Ok(CohortLoad {
        cohort,
        skipped,
        events_consumed,
    })
}
