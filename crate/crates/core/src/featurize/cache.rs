use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CaseLabel, CaseVector, CohortMatrix, FeaturizeError, PanelSpec, Result};

pub const CACHE_FORMAT_VERSION: u32 = 1;

/// JSON sidecar describing a flat little-endian `f32` feature file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheMeta {
    pub format_version: u32,
    /// File name of the feature matrix, relative to the sidecar.
    pub data_file: String,
    pub n_cases: usize,
    pub n_features: usize,
    pub case_ids: Vec<String>,
    pub labels: Vec<CaseLabel>,
    pub binary_labels: Vec<u8>,
    pub tube_paths: Vec<Vec<String>>,
    pub panel: Option<PanelSpec>,
    pub events_consumed: u64,
    pub seed: Option<u64>,
}

fn data_path(sidecar: &Path) -> PathBuf {
    sidecar.with_extension("f32")
}

/// Writes `cohort` as `<sidecar stem>.f32` plus the JSON sidecar itself.
pub fn write_cache(
    cohort: &CohortMatrix,
    sidecar: &Path,
    panel: Option<&PanelSpec>,
    events_consumed: u64,
    seed: Option<u64>,
) -> Result<CacheMeta> {
    let data = data_path(sidecar);
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| FeaturizeError::Io { path, source }
    };
    let file = std::fs::File::create(&data).map_err(io(&data))?;
    let mut w = BufWriter::new(file);
    for case in cohort.cases() {
        for v in &case.features {
            w.write_all(&v.to_le_bytes()).map_err(io(&data))?;
        }
    }
    w.flush().map_err(io(&data))?;

    let meta = CacheMeta {
        format_version: CACHE_FORMAT_VERSION,
        data_file: data
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        n_cases: cohort.len(),
        n_features: cohort.n_features(),
        case_ids: cohort.case_ids(),
        labels: cohort.cases().iter().map(|c| c.label).collect(),
        binary_labels: cohort.binary_labels(),
        tube_paths: cohort.cases().iter().map(|c| c.tube_paths.clone()).collect(),
        panel: panel.cloned(),
        events_consumed,
        seed,
    };
    let json = serde_json::to_string_pretty(&meta).expect("cache metadata serializes");
    std::fs::write(sidecar, json + "\n").map_err(io(sidecar))?;
    Ok(meta)
}

/// Loads a cohort cache from its JSON sidecar.
pub fn read_cache(sidecar: &Path) -> Result<(CohortMatrix, CacheMeta)> {
    let bad = |message: String| FeaturizeError::Cache {
        path: sidecar.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(sidecar).map_err(|source| FeaturizeError::Io {
        path: sidecar.to_path_buf(),
        source,
    })?;
    let meta: CacheMeta = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    if meta.format_version != CACHE_FORMAT_VERSION {
        return Err(bad(format!(
            "format version {} (expected {CACHE_FORMAT_VERSION})",
            meta.format_version
        )));
    }
    if meta.case_ids.len() != meta.n_cases || meta.labels.len() != meta.n_cases {
        return Err(bad("case id / label counts disagree with n_cases".into()));
    }
    let data = sidecar.with_file_name(&meta.data_file);
    let bytes = std::fs::read(&data).map_err(|source| FeaturizeError::Io {
        path: data.clone(),
        source,
    })?;
    let expected = meta.n_cases.checked_mul(meta.n_features).and_then(|n| n.checked_mul(4));
    if expected != Some(bytes.len()) {
        return Err(bad(format!(
            "{} holds {} bytes, expected {} x {} f32 values",
            data.display(),
            bytes.len(),
            meta.n_cases,
            meta.n_features
        )));
    }
    let row_bytes = meta.n_features * 4;
    let cases = (0..meta.n_cases)
        .map(|i| {
            let chunk = &bytes[i * row_bytes..(i + 1) * row_bytes];
            CaseVector {
                case_id: meta.case_ids[i].clone(),
                label: meta.labels[i],
                features: chunk
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
                tube_paths: meta.tube_paths.get(i).cloned().unwrap_or_default(),
            }
        })
        .collect();
    let cohort = CohortMatrix::new(cases)?;
    Ok((cohort, meta))
}
