use log::info;
use serde::{Deserialize, Serialize};

use super::{
    confusion, mean_std, metrics, roc, ConfusionMatrix, EvalError, MetricReport, Result, RocCurve, DEFAULT_THRESHOLD,
};
use crate::featurize::{split_cohort, CohortMatrix, SplitPlan};
use crate::models::{Model, ModelSpec};

/// Held-out performance of one model on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEvaluation {
    pub n_train: usize,
    pub n_test: usize,
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricReport,
    /// `None` when the evaluated cases hold a single class.
    pub auc: Option<f64>,
    #[serde(skip)]
    pub roc: Option<RocCurve>,
    /// Test-case scores in split order.
    pub scores: Vec<CaseScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseScore {
    pub case_id: String,
    pub label: u8,
    pub score: f64,
}

/// Scores the `ids` cases of `cohort` with `model`.
pub fn evaluate_split(
    model: &Model,
    cohort: &CohortMatrix,
    split: &SplitPlan,
    ids: &[String],
) -> Result<SplitEvaluation> {
    let (rows, labels) = cohort.select(ids)?;
    let scores = model.predict_many(&rows)?;
    let cm = confusion(&labels, &scores, DEFAULT_THRESHOLD)?;
    let curve = match roc(&labels, &scores) {
        Ok(c) => Some(c),
        Err(EvalError::SingleClassInput) => None,
        Err(e) => return Err(e),
    };
    Ok(SplitEvaluation {
        n_train: split.train_ids.len(),
        n_test: split.test_ids.len(),
        threshold: DEFAULT_THRESHOLD,
        confusion: cm,
        metrics: metrics(&cm),
        auc: curve.as_ref().map(|c| c.auc),
        roc: curve,
        scores: ids
            .iter()
            .zip(labels.iter().zip(&scores))
            .map(|(id, (&label, &score))| CaseScore {
                case_id: id.clone(),
                label,
                score,
            })
            .collect(),
    })
}

/// Seed of repeat `r`; repeat 0 uses the master seed itself, so a single
/// repeat reproduces the plain split–train–evaluate path.
pub fn repeat_seed(seed: u64, repeat: usize) -> u64 {
    seed.wrapping_add((repeat as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRepeat {
    pub repeat: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub confusion: ConfusionMatrix,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
}

/// Mean and sample standard deviation over repeats where the metric is
/// defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n_defined: usize,
}

impl Summary {
    fn of(values: impl Iterator<Item = Option<f64>>) -> Self {
        let defined: Vec<f64> = values.flatten().collect();
        let (mean, std) = mean_std(&defined);
        Summary {
            mean,
            std,
            n_defined: defined.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    /// Always `"monte_carlo"`: independent random splits, not disjoint folds.
    pub protocol: String,
    pub model_type: String,
    pub n_repeats: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub std_convention: String,
    pub repeats: Vec<CvRepeat>,
    pub accuracy: Summary,
    pub f1: Summary,
    pub auc: Summary,
}

/// Monte-Carlo cross-validation: `n_repeats` independent random splits,
/// each training a fresh model. Repeats run one after another so only one
/// training matrix is resident at a time; each repeat is seeded from
/// [`repeat_seed`], so results do not depend on scheduling.
pub fn cross_validate(
    cohort: &CohortMatrix,
    spec: &ModelSpec,
    n_repeats: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<CvReport> {
    if n_repeats == 0 {
        return Err(EvalError::InvalidArgument("n_repeats must be at least 1".into()));
    }
    let mut repeats = Vec::with_capacity(n_repeats);
    for r in 0..n_repeats {
        let s = repeat_seed(seed, r);
        let wrap = |e: EvalError| EvalError::Repeat {
            repeat: r,
            source: Box::new(e),
        };
        let run = || -> Result<CvRepeat> {
            let split = split_cohort(cohort, train_fraction, s)?;
            let (rows, labels) = cohort.select(&split.train_ids)?;
            let model = spec.train(&rows, &labels, s)?;
            let ev = evaluate_split(&model, cohort, &split, &split.test_ids)?;
            Ok(CvRepeat {
                repeat: r,
                seed: s,
                n_train: ev.n_train,
                n_test: ev.n_test,
                confusion: ev.confusion,
                accuracy: ev.metrics.accuracy,
                f1: ev.metrics.f1,
                auc: ev.auc,
            })
        };
        let rep = run().map_err(wrap)?;
        info!(
            "repeat {r}: accuracy {:?}, f1 {:?}, auc {:?}",
            rep.accuracy, rep.f1, rep.auc
        );
        repeats.push(rep);
    }
    Ok(CvReport {
        protocol: "monte_carlo".into(),
        model_type: spec.kind().into(),
        n_repeats,
        train_fraction,
        seed,
        std_convention: "sample (n-1)".into(),
        accuracy: Summary::of(repeats.iter().map(|r| r.accuracy)),
        f1: Summary::of(repeats.iter().map(|r| r.f1)),
        auc: Summary::of(repeats.iter().map(|r| r.auc)),
        repeats,
    })
}
