//! The `flowcll` command line: `parse`, `featurize`, `train`, `predict`,
//! `evaluate`, `cv` and `synth`.
//!
//! Machine-readable results are JSON (plus CSV for ROC points); logs go to
//! stderr. Every JSON output embeds the tool version, the subcommand and its
//! effective configuration, including defaulted values and seeds. Paths in
//! the echoed configuration are reduced to file names so identical runs in
//! different directories produce identical bytes; the thread count is not
//! echoed because results do not depend on it.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
//! Failures print `{"error": {"kind": ..., "message": ...}}` on stderr.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::eval::{self, cross_validate, evaluate_split, write_roc_csv, EvalError};
use crate::fcs::{self, FcsError};
use crate::featurize::{
    featurize_case, load_cohort, read_cache, split_cohort, write_cache, CaseLabel, CohortMatrix, ErrorPolicy,
    FeaturizeError, PanelSpec, SplitPlan,
};
use crate::models::{deserialize_model, serialize_model, ForestParams, GbtParams, Model, ModelError, ModelSpec};
use crate::synth::{generate_cohort, CohortPlan, LabelCounts, SynthError, MANIFEST_FILE};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "flowcll",
    version,
    about = "FCS parsing, featurization and tree-ensemble classification of CLL cases"
)]
pub struct Cli {
    /// Worker threads (default: all available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Log level for stderr: off, error, warn, info, debug, trace.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: log::LevelFilter,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dump an FCS file's header, keywords and shape as JSON.
    Parse(ParseArgs),
    /// Featurize every case of a manifest into a cohort cache.
    Featurize(FeaturizeArgs),
    /// Split a cohort, train a model and record the split.
    Train(TrainArgs),
    /// Score cases with a trained model.
    Predict(PredictArgs),
    /// Held-out metrics and ROC points for a trained model.
    Evaluate(EvaluateArgs),
    /// Monte-Carlo cross-validation (repeated random splits).
    Cv(CvArgs),
    /// Generate a synthetic cohort of FCS files plus manifest.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    pub fcs: PathBuf,
    /// Read HEADER and TEXT only; do not decode DATA.
    #[arg(long)]
    pub keywords_only: bool,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    /// Manifest CSV: case_id,label,tube1..tube4.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Panel spec JSON (default: 4 tubes x 13 channels, skip 384, take 10,000).
    #[arg(long)]
    pub panel: Option<PathBuf>,
    /// Cache sidecar to write; features go next to it with extension `.f32`.
    #[arg(long)]
    pub out: PathBuf,
    /// Skip unreadable cases (reported) instead of failing.
    #[arg(long)]
    pub skip_bad: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Gbt,
    Rf,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model family.
    #[arg(long, value_enum, default_value = "gbt")]
    pub model: ModelKind,
    /// Hyperparameter JSON for the chosen family; omitted fields keep their defaults.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Cohort cache sidecar written by `featurize`.
    #[arg(long)]
    pub cohort: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Reuse this split record instead of drawing a new split.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Output directory for model.json, split.json and train_metrics.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subset {
    Test,
    Train,
    All,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Cohort cache to score.
    #[arg(long, conflicts_with = "tubes", required_unless_present = "tubes")]
    pub cohort: Option<PathBuf>,
    /// Split record selecting which cohort cases to score.
    #[arg(long, requires = "cohort")]
    pub split: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    pub on: Subset,
    /// Score one case from its FCS tubes, in panel order.
    #[arg(long, num_args = 1..)]
    pub tubes: Vec<PathBuf>,
    #[arg(long)]
    pub panel: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long)]
    pub split: PathBuf,
    /// Which side of the split to evaluate.
    #[arg(long, value_enum, default_value = "test")]
    pub on: Subset,
    /// Permit evaluating on cases the model was trained on.
    #[arg(long)]
    pub allow_train: bool,
    /// Output directory for metrics.json and roc.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub cohort: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Cohort plan JSON (counts, seed, config); defaults to 53/44/19 cases.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Override the plan's case counts as NORMAL,CLL,MBCLL.
    #[arg(long, value_parser = parse_counts)]
    pub counts: Option<LabelCounts>,
    /// Override the plan's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_counts(s: &str) -> Result<LabelCounts, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [normal, cll, mbcll] => Ok(LabelCounts { normal, cll, mbcll }),
        _ => Err("expected NORMAL,CLL,MBCLL".into()),
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Internal(_) => "internal",
        }
    }
}

impl From<FcsError> for CliError {
    fn from(e: FcsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<FeaturizeError> for CliError {
    fn from(e: FeaturizeError) -> Self {
        match e {
            FeaturizeError::InvalidPanel(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidParams(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::InvalidArgument(_) => CliError::Usage(e.to_string()),
            EvalError::Io(_) => CliError::Internal(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidRecipe(_) | SynthError::InvalidConfig(_) | SynthError::Json(_) => {
                CliError::Usage(e.to_string())
            }
            SynthError::Fcs { .. } | SynthError::Io { .. } => CliError::Internal(e.to_string()),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// File name of `p`, for echoing paths into reproducible outputs.
fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read_input(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Internal(format!("{}: {e}", dir.display())))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
}

/// A result document with the run's provenance in front.
#[derive(Serialize)]
struct Output<'a, T: Serialize> {
    tool_version: &'static str,
    command: &'static str,
    config: &'a Value,
    #[serde(flatten)]
    result: T,
}

fn render<T: Serialize>(command: &'static str, config: &Value, result: T) -> Result<Vec<u8>> {
    let doc = Output {
        tool_version: TOOL_VERSION,
        command,
        config,
        result,
    };
    let mut bytes = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Internal(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn emit(bytes: &[u8], out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_bytes(p, bytes),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| CliError::Internal(format!("stdout: {e}")))
        }
    }
}

fn load_panel(path: Option<&Path>) -> Result<PanelSpec> {
    match path {
        Some(p) => Ok(PanelSpec::from_json(&read_text(p)?)?),
        None => Ok(PanelSpec::default()),
    }
}

fn load_cohort_cache(path: &Path) -> Result<CohortMatrix> {
    Ok(read_cache(path)?.0)
}

fn load_model(path: &Path) -> Result<Model> {
    Ok(deserialize_model(&read_input(path)?)?)
}

fn load_split(path: &Path) -> Result<SplitPlan> {
    let v: Value =
        serde_json::from_slice(&read_input(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let split = v.get("split").cloned().unwrap_or(v);
    serde_json::from_value(split).map_err(|e| CliError::Data(format!("{}: not a split record: {e}", path.display())))
}

/// Default hyperparameters for `kind`, overridden by the JSON file if given.
pub fn model_spec(kind: ModelKind, params: Option<&Path>) -> Result<ModelSpec> {
    let text = params.map(read_text).transpose()?;
    let bad = |e: serde_json::Error| CliError::Usage(format!("model parameters: {e}"));
    let spec = match (kind, text) {
        (ModelKind::Gbt, None) => ModelSpec::Gbt(GbtParams::default()),
        (ModelKind::Rf, None) => ModelSpec::Rf(ForestParams::default()),
        (ModelKind::Gbt, Some(t)) => ModelSpec::Gbt(serde_json::from_str(&t).map_err(bad)?),
        (ModelKind::Rf, Some(t)) => ModelSpec::Rf(serde_json::from_str(&t).map_err(bad)?),
    };
    match &spec {
        ModelSpec::Gbt(p) => p.validate()?,
        ModelSpec::Rf(p) => p.validate()?,
    }
    Ok(spec)
}

fn spec_params(spec: &ModelSpec) -> Value {
    serde_json::to_value(spec)
        .map(|v| v["params"].clone())
        .unwrap_or(Value::Null)
}

pub fn cmd_parse(args: &ParseArgs) -> Result<()> {
    let bytes = read_input(&args.fcs)?;
    let summary = if args.keywords_only {
        fcs::summarize_metadata(&bytes)?
    } else {
        fcs::parse_bytes(&bytes)?.summary()
    };
    let config = json!({
        "fcs": file_name(&args.fcs),
        "keywords_only": args.keywords_only,
    });
    emit(&render("parse", &config, summary)?, args.out.as_deref())
}

pub fn cmd_featurize(args: &FeaturizeArgs) -> Result<()> {
    let panel = load_panel(args.panel.as_deref())?;
    let policy = if args.skip_bad {
        ErrorPolicy::SkipAndReport
    } else {
        ErrorPolicy::FailFast
    };
    let load = load_cohort(&args.manifest, &panel, policy)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let meta = write_cache(&load.cohort, &args.out, Some(&panel), load.events_consumed, None)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let config = json!({
        "manifest": file_name(&args.manifest),
        "panel": panel,
        "out": file_name(&args.out),
        "skip_bad": args.skip_bad,
    });
    let result = json!({
        "n_cases": meta.n_cases,
        "n_features": meta.n_features,
        "events_consumed": meta.events_consumed,
        "data_file": meta.data_file,
        "skipped": load.skipped,
    });
    emit(&render("featurize", &config, result)?, None)
}

#[derive(Serialize)]
struct SubsetMetrics {
    subset: &'static str,
    n_cases: usize,
    threshold: f64,
    confusion: eval::ConfusionMatrix,
    metrics: eval::MetricReport,
    auc: Option<f64>,
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let spec = model_spec(args.model.model, args.model.params.as_deref())?;
    let cohort = load_cohort_cache(&args.cohort)?;
    let split = match &args.split {
        Some(p) => load_split(p)?,
        None => split_cohort(&cohort, args.model.train_fraction, args.model.seed)?,
    };
    let (rows, labels) = cohort.select(&split.train_ids)?;
    let started = std::time::Instant::now();
    let model = spec.train(&rows, &labels, args.model.seed)?;
    info!(
        "trained {} on {} cases in {:.1?}",
        spec.kind(),
        rows.len(),
        started.elapsed()
    );

    create_dir(&args.out)?;
    let config = json!({
        "cohort": file_name(&args.cohort),
        "model_type": spec.kind(),
        "params": spec_params(&spec),
        "seed": args.model.seed,
        "train_fraction": split.train_fraction,
        "split": args.split.as_deref().map(file_name),
    });
    let mut model_bytes = serialize_model(&model)?;
    model_bytes.push(b'\n');
    write_bytes(&args.out.join("model.json"), &model_bytes)?;
    write_bytes(
        &args.out.join("split.json"),
        &render("train", &config, json!({ "split": split }))?,
    )?;
    let ev = evaluate_split(&model, &cohort, &split, &split.train_ids)?;
    let train_metrics = SubsetMetrics {
        subset: "train",
        n_cases: split.train_ids.len(),
        threshold: ev.threshold,
        confusion: ev.confusion,
        metrics: ev.metrics,
        auc: ev.auc,
    };
    write_bytes(
        &args.out.join("train_metrics.json"),
        &render("train", &config, train_metrics)?,
    )
}

#[derive(Serialize)]
struct Prediction {
    case_id: String,
    label: Option<CaseLabel>,
    score: f64,
    predicted_positive: bool,
}

fn subset_ids(split: &SplitPlan, on: Subset) -> Vec<String> {
    match on {
        Subset::Test => split.test_ids.clone(),
        Subset::Train => split.train_ids.clone(),
        Subset::All => split.train_ids.iter().chain(&split.test_ids).cloned().collect(),
    }
}

pub fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let mut predictions = Vec::new();
    let config;
    if let Some(cohort_path) = &args.cohort {
        let cohort = load_cohort_cache(cohort_path)?;
        let ids = match &args.split {
            Some(p) => subset_ids(&load_split(p)?, args.on),
            None => cohort.case_ids(),
        };
        for id in ids {
            let pos = cohort
                .position(&id)
                .ok_or_else(|| CliError::Data(format!("case {id:?} is not in the cohort")))?;
            let case = &cohort.cases()[pos];
            let score = model.predict_proba(&case.features)?;
            predictions.push(Prediction {
                case_id: id,
                label: Some(case.label),
                score,
                predicted_positive: score >= eval::DEFAULT_THRESHOLD,
            });
        }
        config = json!({
            "model": file_name(&args.model),
            "cohort": file_name(cohort_path),
            "split": args.split.as_deref().map(file_name),
            "on": format!("{:?}", args.on).to_lowercase(),
        });
    } else {
        let panel = load_panel(args.panel.as_deref())?;
        let tubes = args.tubes.iter().map(fcs::parse_file).collect::<Result<Vec<_>, _>>()?;
        let case_id = args.tubes.first().map(|p| file_name(p)).unwrap_or_default();
        let case = featurize_case(&tubes, &panel, &case_id, CaseLabel::Normal)?;
        let score = model.predict_proba(&case.features)?;
        predictions.push(Prediction {
            case_id,
            label: None,
            score,
            predicted_positive: score >= eval::DEFAULT_THRESHOLD,
        });
        config = json!({
            "model": file_name(&args.model),
            "tubes": args.tubes.iter().map(|p| file_name(p)).collect::<Vec<_>>(),
            "panel": panel,
        });
    }
    let result = json!({
        "threshold": eval::DEFAULT_THRESHOLD,
        "predictions": predictions,
    });
    emit(&render("predict", &config, result)?, args.out.as_deref())
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    if args.on != Subset::Test && !args.allow_train {
        return Err(CliError::Usage(
            "refusing to evaluate on training cases; pass --allow-train to override".into(),
        ));
    }
    let model = load_model(&args.model)?;
    let cohort = load_cohort_cache(&args.cohort)?;
    let split = load_split(&args.split)?;
    let ids = subset_ids(&split, args.on);
    let ev = evaluate_split(&model, &cohort, &split, &ids)?;
    create_dir(&args.out)?;
    let config = json!({
        "model": file_name(&args.model),
        "model_type": model.kind(),
        "model_seed": model.seed(),
        "cohort": file_name(&args.cohort),
        "split": file_name(&args.split),
        "split_seed": split.seed,
        "on": format!("{:?}", args.on).to_lowercase(),
    });
    write_bytes(&args.out.join("metrics.json"), &render("evaluate", &config, &ev)?)?;
    let mut csv = Vec::new();
    match &ev.roc {
        Some(curve) => write_roc_csv(curve, &mut csv)?,
        None => csv.extend_from_slice(b"threshold,fpr,tpr\n"),
    }
    write_bytes(&args.out.join("roc.csv"), &csv)
}

pub fn cmd_cv(args: &CvArgs) -> Result<()> {
    let spec = model_spec(args.model.model, args.model.params.as_deref())?;
    let cohort = load_cohort_cache(&args.cohort)?;
    let report = cross_validate(&cohort, &spec, args.repeats, args.model.train_fraction, args.model.seed)?;
    let config = json!({
        "cohort": file_name(&args.cohort),
        "model_type": spec.kind(),
        "params": spec_params(&spec),
        "seed": args.model.seed,
        "train_fraction": args.model.train_fraction,
        "repeats": args.repeats,
    });
    emit(&render("cv", &config, report)?, args.out.as_deref())
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut plan = match &args.plan {
        Some(p) => CohortPlan::from_json(&read_text(p)?)?,
        None => CohortPlan::default(),
    };
    if let Some(c) = args.counts {
        plan.counts = c;
    }
    if let Some(s) = args.seed {
        plan.seed = s;
    }
    plan.output_dir = args.out.clone();
    let summary = generate_cohort(&plan)?;
    let config = json!({
        "plan": args.plan.as_deref().map(file_name),
        "counts": plan.counts,
        "seed": plan.seed,
        "out": file_name(&args.out),
    });
    let result = json!({
        "n_cases": summary.n_cases,
        "n_files": summary.n_files,
        "manifest": MANIFEST_FILE,
    });
    emit(&render("synth", &config, result)?, None)
}

pub fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Parse(a) => cmd_parse(a),
        Command::Featurize(a) => cmd_featurize(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Cv(a) => cmd_cv(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(cli.log_level)
        .target(env_logger::Target::Stderr)
        .try_init();

    let result = match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Internal(e.to_string()))
            .and_then(|pool| pool.install(|| guarded(&cli.command))),
        None => guarded(&cli.command),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let doc = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{doc}");
            e.exit_code()
        }
    }
}

/// Runs a subcommand, turning panics into internal errors.
fn guarded(command: &Command) -> Result<()> {
    std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| dispatch(command))).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        Err(CliError::Internal(msg))
    })
}
