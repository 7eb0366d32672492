use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_case, Result, SynthConfig, SynthError};
use crate::fcs;
use crate::featurize::CaseLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelCounts {
    #[serde(rename = "Normal")]
    pub normal: usize,
    #[serde(rename = "CLL")]
    pub cll: usize,
    #[serde(rename = "MBCLL")]
    pub mbcll: usize,
}

impl Default for LabelCounts {
    /// 53 normal, 44 CLL and 19 MBCLL cases.
    fn default() -> Self {
        LabelCounts {
            normal: 53,
            cll: 44,
            mbcll: 19,
        }
    }
}

impl LabelCounts {
    pub fn get(&self, label: CaseLabel) -> usize {
        match label {
            CaseLabel::Normal => self.normal,
            CaseLabel::Cll => self.cll,
            CaseLabel::Mbcll => self.mbcll,
        }
    }

    pub fn total(&self) -> usize {
        self.normal + self.cll + self.mbcll
    }
}

/// What to generate. The output directory is supplied at run time and is
/// not part of the recorded plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortPlan {
    pub counts: LabelCounts,
    pub seed: u64,
    pub config: SynthConfig,
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
}

impl Default for CohortPlan {
    fn default() -> Self {
        CohortPlan {
            counts: LabelCounts::default(),
            seed: 0,
            config: SynthConfig::default(),
            output_dir: PathBuf::from("cohort"),
        }
    }
}

impl CohortPlan {
    pub fn from_json(s: &str) -> Result<Self> {
        let plan: CohortPlan = serde_json::from_str(s)?;
        plan.config.validate()?;
        Ok(plan)
    }

    /// Case ids in manifest order: all normal cases, then CLL, then MBCLL.
    pub fn case_ids(&self) -> Vec<(String, CaseLabel)> {
        CaseLabel::ALL
            .iter()
            .flat_map(|&label| {
                let prefix = label.as_str().to_ascii_lowercase();
                (1..=self.counts.get(label)).map(move |i| (format!("{prefix}-{i:03}"), label))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub label: CaseLabel,
    pub seed: u64,
    pub clone_fraction: f64,
    pub clone_variant: Option<String>,
    pub populations: Vec<String>,
    /// Per tube, events drawn from each population.
    pub population_counts: Vec<Vec<u64>>,
    pub n_events: Vec<usize>,
    /// Tube files relative to the output directory.
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub tool_version: String,
    pub plan: CohortPlan,
    pub n_cases: usize,
    pub n_files: usize,
    pub cases: Vec<CaseRecord>,
}

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const COHORT_FILE: &str = "cohort.json";
const FCS_DIR: &str = "fcs";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes every case's tubes under `<output_dir>/fcs/`, the manifest CSV
/// and a `cohort.json` recording the plan and every per-case draw. Cases are
/// generated in parallel; output is independent of the thread count.
pub fn generate_cohort(plan: &CohortPlan) -> Result<CohortSummary> {
    plan.config.validate()?;
    let out = &plan.output_dir;
    let fcs_dir = out.join(FCS_DIR);
    fs::create_dir_all(&fcs_dir).map_err(io_err(&fcs_dir))?;

    let ids = plan.case_ids();
    let records: Vec<CaseRecord> = ids
        .par_iter()
        .map(|(case_id, label)| -> Result<CaseRecord> {
            let recipe = plan.config.recipe(*label);
            let case = generate_case(&plan.config, recipe, case_id, plan.seed)?;
            let mut files = Vec::with_capacity(case.tubes.len());
            for (t, tube) in case.tubes.iter().enumerate() {
                let rel = format!("{FCS_DIR}/{case_id}_tube{}.fcs", t + 1);
                fcs::write_file(tube, out.join(&rel)).map_err(|source| SynthError::Fcs {
                    case_id: case_id.clone(),
                    source,
                })?;
                files.push(rel);
            }
            Ok(CaseRecord {
                case_id: case.case_id,
                label: case.label,
                seed: case.seed,
                clone_fraction: case.clone_fraction,
                clone_variant: case.clone_variant,
                populations: case.populations,
                population_counts: case.population_counts,
                n_events: case.tubes.iter().map(|t| t.n_events()).collect(),
                files,
            })
        })
        .collect::<Result<_>>()?;

    let manifest = out.join(MANIFEST_FILE);
    let n_tubes = plan.config.tubes.len();
    let mut w = csv::Writer::from_path(&manifest).map_err(|e| SynthError::Io {
        path: manifest.clone(),
        source: e.into(),
    })?;
    let csv_err = |e: csv::Error| SynthError::Io {
        path: manifest.clone(),
        source: e.into(),
    };
    let mut header = vec!["case_id".to_string(), "label".to_string()];
    header.extend((1..=n_tubes).map(|t| format!("tube{t}")));
    w.write_record(&header).map_err(csv_err)?;
    for r in &records {
        let mut row = vec![r.case_id.clone(), r.label.to_string()];
        row.extend(r.files.iter().cloned());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(&manifest))?;

    let summary = CohortSummary {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        plan: plan.clone(),
        n_cases: records.len(),
        n_files: records.len() * n_tubes,
        cases: records,
    };
    let cohort_json = out.join(COHORT_FILE);
    fs::write(&cohort_json, serde_json::to_vec_pretty(&summary)?).map_err(io_err(&cohort_json))?;
    info!(
        "wrote {} cases ({} files) to {}",
        summary.n_cases,
        summary.n_files,
        out.display()
    );
    Ok(summary)
}
