//! Fixed-window event featurization.
//!
//! Each tube contributes `take` consecutive events (after skipping the first
//! `skip` acquired events) from each of its panel channels, laid out
//! channel-major. A case is the concatenation of its tubes in panel order,
//! so at the default panel a case is 4 tubes × 13 channels × 10,000 events =
//! 520,000 values. No scaling is applied.

mod cache;
mod manifest;

use std::collections::HashSet;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fcs::{FcsDataset, FcsError};

pub use cache::{read_cache, write_cache, CacheMeta, CACHE_FORMAT_VERSION};
pub use manifest::{load_cohort, read_manifest, CohortLoad, ErrorPolicy, ManifestRow, RowError};

#[derive(Debug, Error)]
pub enum FeaturizeError {
    #[error("tube has {available} events, {required} required (skip {skip} + take {take})")]
    InsufficientEvents {
        available: usize,
        required: usize,
        skip: usize,
        take: usize,
    },
    #[error("channel {0:?} not found in tube")]
    MissingChannel(String),
    #[error("expected {expected} tubes, got {got}")]
    WrongTubeCount { expected: usize, got: usize },
    #[error("tube {tube}: {source}")]
    Tube {
        tube: usize,
        #[source]
        source: Box<FeaturizeError>,
    },
    #[error("tube {tube} ({path}): {source}")]
    Parse {
        tube: usize,
        path: PathBuf,
        #[source]
        source: FcsError,
    },
    #[error("invalid panel spec: {0}")]
    InvalidPanel(String),
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("case {case_id}: {source}")]
    Case {
        case_id: String,
        #[source]
        source: Box<FeaturizeError>,
    },
    #[error("cohort is empty")]
    EmptyCohort,
    #[error("duplicate case id {0:?}")]
    DuplicateCaseId(String),
    #[error("cohort rows have unequal lengths ({0} vs {1})")]
    RaggedCohort(usize, usize),
    #[error("cannot split {n} cases at train fraction {fraction}: {reason}")]
    DegenerateSplit { n: usize, fraction: f64, reason: String },
    #[error("unknown case id {0:?}")]
    UnknownCase(String),
    #[error("cache {path}: {message}")]
    Cache { path: PathBuf, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = FeaturizeError> = std::result::Result<T, E>;

/// Which events and channels of each tube enter the feature vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelSpec {
    /// Leading events dropped from every tube.
    pub skip: usize,
    /// Events kept per channel after the skipped prefix.
    pub take: usize,
    /// Channel short names (`$PnN`) per tube, in output order.
    pub tubes: Vec<Vec<String>>,
}

/// `$PnN` names of the 13 acquired channels, shared by all four tubes.
pub const DEFAULT_CHANNELS: [&str; 13] = [
    "FSC-A",
    "FSC-H",
    "SSC-A",
    "FITC-A",
    "PE-A",
    "PerCP-Cy5-5-A",
    "PE-Cy7-A",
    "APC-A",
    "APC-R700-A",
    "APC-H7-A",
    "V450-A",
    "V500-C-A",
    "BV605-A",
];

impl Default for PanelSpec {
    /// Four tubes of 13 channels; skip 384 events, take 10,000.
    fn default() -> Self {
        let tube: Vec<String> = DEFAULT_CHANNELS.iter().map(|s| s.to_string()).collect();
        PanelSpec {
            skip: 384,
            take: 10_000,
            tubes: vec![tube; 4],
        }
    }
}

impl PanelSpec {
    pub fn n_tubes(&self) -> usize {
        self.tubes.len()
    }

    pub fn n_channels(&self) -> usize {
        self.tubes.first().map_or(0, Vec::len)
    }

    pub fn features_per_tube(&self) -> usize {
        self.take * self.n_channels()
    }

    pub fn features_per_case(&self) -> usize {
        self.features_per_tube() * self.n_tubes()
    }

    pub fn events_per_case(&self) -> usize {
        self.take * self.n_tubes()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FeaturizeError::InvalidPanel(m));
        if self.tubes.is_empty() {
            return bad("no tubes".into());
        }
        if self.take == 0 {
            return bad("take must be at least 1".into());
        }
        let n = self.n_channels();
        for (i, tube) in self.tubes.iter().enumerate() {
            if tube.is_empty() || tube.len() != n {
                return bad(format!("tube {} has {} channels, expected {n}", i + 1, tube.len()));
            }
            let mut seen = HashSet::new();
            if let Some(dup) = tube.iter().find(|c| !seen.insert(c.as_str())) {
                return bad(format!("tube {} lists channel {dup:?} twice", i + 1));
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: PanelSpec = serde_json::from_str(s).map_err(|e| FeaturizeError::InvalidPanel(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Case diagnosis. CLL and MBCLL form the single positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseLabel {
    Normal,
    #[serde(rename = "CLL")]
    Cll,
    #[serde(rename = "MBCLL")]
    Mbcll,
}

impl CaseLabel {
    pub const ALL: [CaseLabel; 3] = [CaseLabel::Normal, CaseLabel::Cll, CaseLabel::Mbcll];

    /// 1 for CLL and MBCLL, 0 for Normal.
    pub fn binary(self) -> u8 {
        match self {
            CaseLabel::Normal => 0,
            CaseLabel::Cll | CaseLabel::Mbcll => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CaseLabel::Normal => "Normal",
            CaseLabel::Cll => "CLL",
            CaseLabel::Mbcll => "MBCLL",
        }
    }
}

impl std::str::FromStr for CaseLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "Normal" => Ok(CaseLabel::Normal),
            "CLL" => Ok(CaseLabel::Cll),
            "MBCLL" => Ok(CaseLabel::Mbcll),
            other => Err(format!("unknown label {other:?} (expected Normal, CLL or MBCLL)")),
        }
    }
}

impl std::fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One patient case: its concatenated tube features plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseVector {
    pub case_id: String,
    pub label: CaseLabel,
    pub features: Vec<f32>,
    pub tube_paths: Vec<String>,
}

impl CaseVector {
    pub fn binary_label(&self) -> u8 {
        self.label.binary()
    }
}

/// Labeled cases with equal-length feature rows and unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortMatrix {
    cases: Vec<CaseVector>,
    n_features: usize,
}

impl CohortMatrix {
    pub fn new(cases: Vec<CaseVector>) -> Result<Self> {
        let Some(first) = cases.first() else {
            return Err(FeaturizeError::EmptyCohort);
        };
        let n_features = first.features.len();
        let mut ids = HashSet::new();
        for c in &cases {
            if c.features.len() != n_features {
                return Err(FeaturizeError::RaggedCohort(n_features, c.features.len()));
            }
            if !ids.insert(c.case_id.as_str()) {
                return Err(FeaturizeError::DuplicateCaseId(c.case_id.clone()));
            }
        }
        Ok(CohortMatrix { cases, n_features })
    }

    pub fn cases(&self) -> &[CaseVector] {
        &self.cases
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn case_ids(&self) -> Vec<String> {
        self.cases.iter().map(|c| c.case_id.clone()).collect()
    }

    pub fn rows(&self) -> Vec<&[f32]> {
        self.cases.iter().map(|c| c.features.as_slice()).collect()
    }

    pub fn binary_labels(&self) -> Vec<u8> {
        self.cases.iter().map(CaseVector::binary_label).collect()
    }

    pub fn position(&self, case_id: &str) -> Option<usize> {
        self.cases.iter().position(|c| c.case_id == case_id)
    }

    /// Rows and binary labels of the named cases, in the order given.
    pub fn select(&self, ids: &[String]) -> Result<(Vec<&[f32]>, Vec<u8>)> {
        let index: std::collections::HashMap<&str, usize> = self
            .cases
            .iter()
            .enumerate()
            .map(|(i, c)| (c.case_id.as_str(), i))
            .collect();
        let mut rows = Vec::with_capacity(ids.len());
        let mut labels = Vec::with_capacity(ids.len());
        for id in ids {
            let &i = index
                .get(id.as_str())
                .ok_or_else(|| FeaturizeError::UnknownCase(id.clone()))?;
            rows.push(self.cases[i].features.as_slice());
            labels.push(self.cases[i].binary_label());
        }
        Ok((rows, labels))
    }
}

/// Extracts the channel-major event window of one tube.
///
/// Channels are matched by `$PnN` and emitted in panel order, so the storage
/// order of parameters in the file does not matter.
pub fn featurize_tube(dataset: &FcsDataset, spec: &PanelSpec, tube_index: usize) -> Result<Vec<f32>> {
    let channels = spec.tubes.get(tube_index).ok_or(FeaturizeError::WrongTubeCount {
        expected: spec.n_tubes(),
        got: tube_index + 1,
    })?;
    let required = spec.skip + spec.take;
    let available = dataset.n_events();
    if available < required {
        return Err(FeaturizeError::InsufficientEvents {
            available,
            required,
            skip: spec.skip,
            take: spec.take,
        });
    }
    let columns = channels
        .iter()
        .map(|name| {
            dataset
                .channel_index(name)
                .ok_or_else(|| FeaturizeError::MissingChannel(name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;

    let n_params = dataset.n_params();
    let values = dataset.events.values();
    let mut out = Vec::with_capacity(spec.take * columns.len());
    for col in columns {
        let start = spec.skip * n_params + col;
        out.extend(values[start..].iter().step_by(n_params).take(spec.take));
    }
    Ok(out)
}

/// Concatenates the tube windows of one case in panel order.
pub fn featurize_case(tubes: &[FcsDataset], spec: &PanelSpec, case_id: &str, label: CaseLabel) -> Result<CaseVector> {
    if tubes.len() != spec.n_tubes() {
        return Err(FeaturizeError::WrongTubeCount {
            expected: spec.n_tubes(),
            got: tubes.len(),
        });
    }
    let mut features = Vec::with_capacity(spec.features_per_case());
    for (i, tube) in tubes.iter().enumerate() {
        let part = featurize_tube(tube, spec, i).map_err(|e| FeaturizeError::Tube {
            tube: i + 1,
            source: Box::new(e),
        })?;
        features.extend_from_slice(&part);
    }
    Ok(CaseVector {
        case_id: case_id.to_string(),
        label,
        features,
        tube_paths: tubes
            .iter()
            .map(|t| {
                t.source_path
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default()
            })
            .collect(),
    })
}

/// A persisted train/test partition of a cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub train_fraction: f64,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// Number of training cases for `n` cases: `floor(fraction × n)`, so 116
/// cases at 0.8 give 92 train / 24 test.
pub fn train_size(n: usize, train_fraction: f64) -> usize {
    (train_fraction * n as f64 + 1e-9).floor() as usize
}

/// Uniform random split without stratification, reproducible from `seed`.
/// Both id lists keep cohort order.
pub fn split_ids(ids: &[String], train_fraction: f64, seed: u64) -> Result<SplitPlan> {
    let n = ids.len();
    let degenerate = |reason: &str| FeaturizeError::DegenerateSplit {
        n,
        fraction: train_fraction,
        reason: reason.to_string(),
    };
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(degenerate("fraction must lie strictly between 0 and 1"));
    }
    if n < 2 {
        return Err(degenerate("need at least 2 cases"));
    }
    let n_train = train_size(n, train_fraction);
    if n_train == 0 || n_train == n {
        return Err(degenerate("one side of the split would be empty"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_train = vec![false; n];
    for &i in &order[..n_train] {
        in_train[i] = true;
    }
    let (train, test): (Vec<_>, Vec<_>) = ids.iter().zip(&in_train).partition(|(_, t)| **t);
    Ok(SplitPlan {
        seed,
        train_fraction,
        train_ids: train.into_iter().map(|(id, _)| id.clone()).collect(),
        test_ids: test.into_iter().map(|(id, _)| id.clone()).collect(),
    })
}

pub fn split_cohort(cohort: &CohortMatrix, train_fraction: f64, seed: u64) -> Result<SplitPlan> {
    split_ids(&cohort.case_ids(), train_fraction, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fcs::{EventMatrix, ParameterInfo};

    fn tube(rows: &[Vec<f32>], names: &[&str]) -> FcsDataset {
        let params = names.iter().map(|n| ParameterInfo::float(n, 1024, None)).collect();
        FcsDataset::from_events(params, EventMatrix::from_rows(rows).unwrap(), []).unwrap()
    }

    fn toy_spec(skip: usize, take: usize, tubes: usize) -> PanelSpec {
        PanelSpec {
            skip,
            take,
            tubes: vec![vec!["A".into(), "B".into()]; tubes],
        }
    }

    #[test]
    fn default_panel_totals() {
        let p = PanelSpec::default();
        assert_eq!(p.features_per_tube(), 130_000);
        assert_eq!(p.features_per_case(), 520_000);
        assert_eq!(p.events_per_case(), 40_000);
        p.validate().unwrap();
    }

    #[test]
    fn hand_traceable_window() {
        let t = tube(&[vec![1., 10.], vec![2., 20.], vec![3., 30.]], &["A", "B"]);
        assert_eq!(
            featurize_tube(&t, &toy_spec(1, 2, 1), 0).unwrap(),
            vec![2., 3., 20., 30.]
        );
    }

    #[test]
    fn identity_window_is_column_major() {
        let t = tube(&[vec![1., 10.], vec![2., 20.], vec![3., 30.]], &["A", "B"]);
        assert_eq!(
            featurize_tube(&t, &toy_spec(0, 3, 1), 0).unwrap(),
            vec![1., 2., 3., 10., 20., 30.]
        );
    }

    #[test]
    fn channels_matched_by_name() {
        let t = tube(&[vec![10., 1.], vec![20., 2.], vec![30., 3.]], &["B", "A"]);
        assert_eq!(
            featurize_tube(&t, &toy_spec(1, 2, 1), 0).unwrap(),
            vec![2., 3., 20., 30.]
        );
    }

    #[test]
    fn too_few_events() {
        let t = tube(&[vec![1., 10.], vec![2., 20.]], &["A", "B"]);
        assert!(matches!(
            featurize_tube(&t, &toy_spec(1, 2, 1), 0),
            Err(FeaturizeError::InsufficientEvents {
                available: 2,
                required: 3,
                ..
            })
        ));
    }

    #[test]
    fn missing_channel_is_named() {
        let t = tube(&[vec![1.], vec![2.], vec![3.]], &["A"]);
        assert!(matches!(
            featurize_tube(&t, &toy_spec(1, 2, 1), 0),
            Err(FeaturizeError::MissingChannel(c)) if c == "B"
        ));
    }

    #[test]
    fn case_repeats_tube_vector() {
        let t = tube(&[vec![1., 10.], vec![2., 20.], vec![3., 30.]], &["A", "B"]);
        let tubes = vec![t.clone(), t.clone(), t.clone(), t];
        let c = featurize_case(&tubes, &toy_spec(1, 2, 4), "c1", CaseLabel::Mbcll).unwrap();
        assert_eq!(c.features.len(), 16);
        assert_eq!(c.features, [2., 3., 20., 30.].repeat(4));
        assert_eq!(c.binary_label(), 1);
    }

    #[test]
    fn wrong_tube_count() {
        let t = tube(&[vec![1., 10.], vec![2., 20.], vec![3., 30.]], &["A", "B"]);
        let tubes = vec![t.clone(), t.clone(), t];
        assert!(matches!(
            featurize_case(&tubes, &toy_spec(1, 2, 4), "c1", CaseLabel::Normal),
            Err(FeaturizeError::WrongTubeCount { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn tube_errors_carry_index() {
        let good = tube(&[vec![1., 10.], vec![2., 20.], vec![3., 30.]], &["A", "B"]);
        let short = tube(&[vec![1., 10.]], &["A", "B"]);
        let tubes = vec![good.clone(), good.clone(), short, good];
        match featurize_case(&tubes, &toy_spec(1, 2, 4), "c1", CaseLabel::Normal) {
            Err(FeaturizeError::Tube { tube: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn labels() {
        assert_eq!(CaseLabel::Normal.binary(), 0);
        assert_eq!(CaseLabel::Cll.binary(), 1);
        assert_eq!(CaseLabel::Mbcll.binary(), 1);
        assert_eq!("MBCLL".parse::<CaseLabel>().unwrap(), CaseLabel::Mbcll);
        assert!("cll".parse::<CaseLabel>().is_err());
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("case{i:03}")).collect()
    }

    #[test]
    fn default_split_sizes() {
        let plan = split_ids(&ids(116), 0.8, 7).unwrap();
        assert_eq!(plan.train_ids.len(), 92);
        assert_eq!(plan.test_ids.len(), 24);
        let plan = split_ids(&ids(2), 0.5, 7).unwrap();
        assert_eq!((plan.train_ids.len(), plan.test_ids.len()), (1, 1));
    }

    #[test]
    fn split_is_seeded() {
        assert_eq!(
            split_ids(&ids(50), 0.8, 3).unwrap(),
            split_ids(&ids(50), 0.8, 3).unwrap()
        );
        assert_ne!(
            split_ids(&ids(50), 0.8, 3).unwrap().train_ids,
            split_ids(&ids(50), 0.8, 4).unwrap().train_ids
        );
    }

    #[test]
    fn degenerate_splits() {
        assert!(split_ids(&ids(1), 0.8, 0).is_err());
        assert!(split_ids(&ids(3), 0.2, 0).is_err());
        assert!(split_ids(&ids(3), 1.0, 0).is_err());
    }

    #[test]
    fn cohort_invariants() {
        let case = |id: &str, n: usize| CaseVector {
            case_id: id.into(),
            label: CaseLabel::Normal,
            features: vec![0.0; n],
            tube_paths: vec![],
        };
        assert!(matches!(CohortMatrix::new(vec![]), Err(FeaturizeError::EmptyCohort)));
        assert!(matches!(
            CohortMatrix::new(vec![case("a", 2), case("a", 2)]),
            Err(FeaturizeError::DuplicateCaseId(_))
        ));
        assert!(matches!(
            CohortMatrix::new(vec![case("a", 2), case("b", 3)]),
            Err(FeaturizeError::RaggedCohort(2, 3))
        ));
    }
}
