//! The `flowcll` binary end to end: exit codes, outputs and determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flowcll::synth::{CohortPlan, EventCountSpec, LabelCounts, SynthConfig};
use serde_json::Value;

fn flowcll(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowcll"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = flowcll(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    flowcll(args).status.code().unwrap()
}

fn json_file(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A 12-case cohort with short tubes, featurized; returns the cache path.
fn small_cohort(root: &Path) -> PathBuf {
    let mut config = SynthConfig::default();
    for r in [&mut config.normal, &mut config.cll, &mut config.mbcll] {
        r.events = EventCountSpec::fixed(10_400);
    }
    let plan = CohortPlan {
        counts: LabelCounts {
            normal: 6,
            cll: 4,
            mbcll: 2,
        },
        seed: 8,
        config,
        ..CohortPlan::default()
    };
    let plan_path = root.join("plan.json");
    std::fs::write(&plan_path, serde_json::to_string(&plan).unwrap()).unwrap();
    let cohort = root.join("cohort");
    let out = ok(&["synth", "--plan", s(&plan_path), "--out", s(&cohort)]);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["n_cases"], 12);
    assert_eq!(doc["n_files"], 48);

    let cache = root.join("features.json");
    let out = ok(&[
        "featurize",
        "--manifest",
        s(&cohort.join("manifest.csv")),
        "--out",
        s(&cache),
    ]);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["n_features"], 520_000);
    assert_eq!(doc["events_consumed"], 12 * 40_000);
    cache
}

#[test]
fn usage_and_data_errors() {
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["train", "--cohort", "x.json"]), 1);
    assert_eq!(code(&["parse", "/definitely/not/here.fcs"]), 2);
    assert_eq!(code(&["--threads", "0", "parse", "x.fcs"]), 1);

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.fcs");
    std::fs::write(&junk, b"FCS3.1    not really").unwrap();
    let out = flowcll(&["parse", s(&junk)]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "data");

    let params = dir.path().join("params.json");
    std::fs::write(&params, r#"{"n_trees": 0}"#).unwrap();
    assert_eq!(code(&["cv", "--cohort", "x.json", "--params", s(&params)]), 1);
}

#[test]
fn parse_reports_shape_and_keywords() {
    let dir = tempfile::tempdir().unwrap();
    let config = SynthConfig::default();
    let case = flowcll::synth::generate_case(&config, &config.cll, "cll-001", 1).unwrap();
    let path = dir.path().join("t.fcs");
    flowcll::fcs::write_file(&case.tubes[0], &path).unwrap();

    let full: Value = serde_json::from_slice(&ok(&["parse", s(&path)]).stdout).unwrap();
    assert_eq!(full["n_params"], 13);
    assert_eq!(full["n_events"], case.tubes[0].n_events());
    assert_eq!(full["version"], "FCS3.1");
    assert_eq!(full["keywords"]["$DATATYPE"], "F");
    assert_eq!(full["config"]["fcs"], "t.fcs");

    let meta: Value = serde_json::from_slice(&ok(&["parse", "--keywords-only", s(&path)]).stdout).unwrap();
    assert_eq!(meta["n_events"], full["n_events"]);
    assert_eq!(meta["keywords"], full["keywords"]);

    // truncating the DATA segment only breaks the full parse
    let bytes = std::fs::read(&path).unwrap();
    let cut = dir.path().join("cut.fcs");
    std::fs::write(&cut, &bytes[..bytes.len() - 100]).unwrap();
    assert_eq!(code(&["parse", s(&cut)]), 2);
    assert_eq!(code(&["parse", "--keywords-only", s(&cut)]), 0);
}

#[test]
fn pipeline_is_reproducible_and_guards_training_data() {
    let root = tempfile::tempdir().unwrap();
    let cache = small_cohort(root.path());
    let params = root.path().join("gbt.json");
    std::fs::write(&params, r#"{"n_trees": 5}"#).unwrap();

    let train = |threads: &str, out: &Path| {
        ok(&[
            "--threads",
            threads,
            "train",
            "--cohort",
            s(&cache),
            "--model",
            "gbt",
            "--params",
            s(&params),
            "--seed",
            "3",
            "--train-fraction",
            "0.75",
            "--out",
            s(out),
        ]);
    };
    let evaluate = |threads: &str, run: &Path, extra: &[&str]| {
        let mut args = vec!["--threads", threads, "evaluate", "--model"];
        let model = run.join("model.json");
        let split = run.join("split.json");
        let out = run.join("eval");
        args.extend([s(&model), "--cohort", s(&cache), "--split", s(&split), "--out", s(&out)]);
        args.extend(extra);
        flowcll(&args)
    };

    let a = root.path().join("run-a");
    let b = root.path().join("run-b");
    train("1", &a);
    train("4", &b);
    assert!(evaluate("1", &a, &[]).status.success());
    assert!(evaluate("3", &b, &[]).status.success());
    for f in [
        "model.json",
        "split.json",
        "train_metrics.json",
        "eval/metrics.json",
        "eval/roc.csv",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f} differs between thread counts"
        );
    }

    let split = json_file(&a.join("split.json"));
    assert_eq!(split["split"]["train_ids"].as_array().unwrap().len(), 9);
    assert_eq!(split["split"]["test_ids"].as_array().unwrap().len(), 3);
    let metrics = json_file(&a.join("eval/metrics.json"));
    assert_eq!(metrics["n_test"], 3);
    let cm = &metrics["confusion"];
    let total: u64 = ["tp", "fp", "fn", "tn"].iter().map(|k| cm[k].as_u64().unwrap()).sum();
    assert_eq!(total, 3);
    let text = std::fs::read_to_string(a.join("eval/metrics.json")).unwrap();
    assert!(!text.contains(s(root.path())), "absolute paths in output");
    assert!(!text.contains("threads"));
    let roc = std::fs::read_to_string(a.join("eval/roc.csv")).unwrap();
    assert!(roc.starts_with("threshold,fpr,tpr\n"));

    // scoring training cases needs an explicit opt-in
    let refused = evaluate("1", &a, &["--on", "train"]);
    assert_eq!(refused.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("--allow-train"));
    assert!(evaluate("1", &a, &["--on", "all", "--allow-train"]).status.success());

    // predictions agree with the evaluation scores
    let out = ok(&[
        "predict",
        "--model",
        s(&a.join("model.json")),
        "--cohort",
        s(&cache),
        "--split",
        s(&a.join("split.json")),
        "--on",
        "test",
    ]);
    let pred: Value = serde_json::from_slice(&out.stdout).unwrap();
    let preds = pred["predictions"].as_array().unwrap();
    let scored = metrics["scores"].as_array().unwrap();
    assert_eq!(preds.len(), 3);
    for (p, e) in preds.iter().zip(scored) {
        assert_eq!(p["case_id"], e["case_id"]);
        assert_eq!(p["score"], e["score"]);
    }

    // a single case straight from its tube files
    let cohort = root.path().join("cohort/fcs");
    let tubes: Vec<PathBuf> = (1..=4).map(|t| cohort.join(format!("cll-001_tube{t}.fcs"))).collect();
    let mut args = vec!["predict", "--model"];
    let model = a.join("model.json");
    args.push(s(&model));
    args.push("--tubes");
    args.extend(tubes.iter().map(|p| s(p)));
    let single: Value = serde_json::from_slice(&ok(&args).stdout).unwrap();
    let score = single["predictions"][0]["score"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&score));

    // cross-validation with two repeats
    let cv: Value = serde_json::from_slice(
        &ok(&[
            "cv",
            "--cohort",
            s(&cache),
            "--model",
            "rf",
            "--repeats",
            "2",
            "--train-fraction",
            "0.75",
        ])
        .stdout,
    )
    .unwrap();
    assert_eq!(cv["protocol"], "monte_carlo");
    assert_eq!(cv["repeats"].as_array().unwrap().len(), 2);
    assert_eq!(cv["std_convention"], "sample (n-1)");
}
