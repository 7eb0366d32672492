//! Synthetic cohort generation: mixture proportions, determinism and layout.

use flowcll::featurize::{load_cohort, CaseLabel, ErrorPolicy, PanelSpec};
use flowcll::synth::{
    generate_case, generate_cohort, CohortPlan, CohortSummary, EventCountSpec, LabelCounts, SynthConfig, COHORT_FILE,
    MANIFEST_FILE,
};

fn small_plan(dir: &std::path::Path, seed: u64, counts: LabelCounts, events: u64) -> CohortPlan {
    let mut config = SynthConfig::default();
    for r in [&mut config.normal, &mut config.cll, &mut config.mbcll] {
        r.events = EventCountSpec::fixed(events);
    }
    CohortPlan {
        counts,
        seed,
        config,
        output_dir: dir.to_path_buf(),
    }
}

#[test]
fn clone_share_is_binomial() {
    let mut config = SynthConfig::default();
    let mut recipe = config.cll.clone();
    recipe.clone_fraction = [0.6, 0.6];
    recipe.events = EventCountSpec::fixed(20_000);
    config.cll = recipe.clone();
    // every event is an independent categorical draw, so pooled counts are
    // binomial; one 3-sigma check per case (clone) and per population
    let mut pooled = vec![0u64; recipe.background.len()];
    let mut total = 0.0;
    for i in 0..8 {
        let case = generate_case(&config, &recipe, &format!("cll-{i:03}"), 5).unwrap();
        assert_eq!(case.clone_fraction, 0.6);
        assert_eq!(case.populations.len(), recipe.background.len() + 1);
        assert_eq!(case.tubes.len(), 4);
        assert!(case.tubes.iter().all(|t| t.n_events() == 20_000 && t.n_params() == 13));
        let mut clone = 0.0;
        for counts in &case.population_counts {
            assert_eq!(counts.iter().sum::<u64>(), 20_000);
            clone += *counts.last().unwrap() as f64;
            for (acc, c) in pooled.iter_mut().zip(counts) {
                *acc += c;
            }
        }
        let n = 80_000.0;
        let sd = (n * 0.6 * 0.4f64).sqrt();
        assert!((clone - 0.6 * n).abs() < 3.0 * sd, "case {i}: clone count {clone}");
        total += n;
    }
    for (pop, &c) in recipe.background.iter().zip(&pooled) {
        let p = pop.fraction * 0.4;
        let sd = (total * p * (1.0 - p)).sqrt();
        assert!((c as f64 - p * total).abs() < 3.0 * sd, "{}: {c}", pop.name);
    }
}

#[test]
fn normal_cases_have_no_clone() {
    let config = SynthConfig::default();
    let case = generate_case(&config, &config.normal, "normal-001", 1).unwrap();
    assert_eq!(case.clone_fraction, 0.0);
    assert_eq!(case.clone_variant, None);
    assert_eq!(case.populations.len(), config.normal.background.len());
}

#[test]
fn channels_follow_the_panel() {
    let config = SynthConfig::default();
    let case = generate_case(&config, &config.mbcll, "mbcll-001", 1).unwrap();
    let panel = PanelSpec::default();
    for (tube, channels) in case.tubes.iter().zip(&panel.tubes) {
        for ch in channels {
            assert!(tube.channel_index(ch).is_some(), "missing {ch}");
        }
        assert!(tube.events.values().iter().all(|v| v.is_finite() && *v >= 0.0));
    }
}

#[test]
fn default_event_counts_are_clamped() {
    let config = SynthConfig::default();
    for i in 0..30 {
        let case = generate_case(&config, &config.normal, &format!("normal-{i:03}"), 2).unwrap();
        for t in &case.tubes {
            let n = t.n_events() as u64;
            assert!((config.normal.events.min..=config.normal.events.max).contains(&n));
        }
    }
}

fn read_all(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in ["", "fcs"] {
        let mut entries: Vec<_> = std::fs::read_dir(dir.join(sub))
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        for p in entries {
            out.push((
                p.strip_prefix(dir).unwrap().display().to_string(),
                std::fs::read(&p).unwrap(),
            ));
        }
    }
    out
}

#[test]
fn cohort_output_is_reproducible_across_thread_counts() {
    let counts = LabelCounts {
        normal: 3,
        cll: 2,
        mbcll: 2,
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |dir: &std::path::Path, threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| generate_cohort(&small_plan(dir, 11, counts, 12_000)).unwrap())
    };
    let sa = run(a.path(), 1);
    let sb = run(b.path(), 4);
    assert_eq!(sa.cases, sb.cases);
    let fa = read_all(a.path());
    assert_eq!(fa, read_all(b.path()));
    assert_eq!(fa.len(), 2 + 7 * 4);

    let c = tempfile::tempdir().unwrap();
    generate_cohort(&small_plan(c.path(), 12, counts, 12_000)).unwrap();
    assert_ne!(fa, read_all(c.path()));
}

#[test]
fn manifest_and_summary_describe_the_cohort() {
    let dir = tempfile::tempdir().unwrap();
    let counts = LabelCounts {
        normal: 4,
        cll: 3,
        mbcll: 2,
    };
    let summary = generate_cohort(&small_plan(dir.path(), 3, counts, 10_500)).unwrap();
    assert_eq!(summary.n_cases, 9);
    assert_eq!(summary.n_files, 36);

    let json = std::fs::read_to_string(dir.path().join(COHORT_FILE)).unwrap();
    let back: CohortSummary = serde_json::from_str(&json).unwrap();
    assert_eq!(back.cases, summary.cases);
    assert!(
        !json.contains(&dir.path().display().to_string()),
        "absolute path leaked"
    );

    let ids: Vec<&str> = summary.cases.iter().map(|c| c.case_id.as_str()).collect();
    assert_eq!(ids[0], "normal-001");
    assert_eq!(ids[4], "cll-001");
    assert_eq!(ids[8], "mbcll-002");
    for c in &summary.cases {
        let [lo, hi] = summary.plan.config.recipe(c.label).clone_fraction;
        assert!(c.clone_fraction >= lo && c.clone_fraction <= hi);
    }

    let load = load_cohort(
        &dir.path().join(MANIFEST_FILE),
        &PanelSpec::default(),
        ErrorPolicy::FailFast,
    )
    .unwrap();
    assert_eq!(load.cohort.len(), 9);
    assert_eq!(load.cohort.n_features(), 520_000);
    let labels: Vec<CaseLabel> = load.cohort.cases().iter().map(|c| c.label).collect();
    assert_eq!(labels.iter().filter(|l| **l == CaseLabel::Normal).count(), 4);
    assert_eq!(labels.iter().filter(|l| **l == CaseLabel::Mbcll).count(), 2);
}

#[test]
fn config_validation() {
    let mut config = SynthConfig::default();
    config.validate().unwrap();
    config.mbcll.clone_fraction = [0.3, 0.6];
    assert!(config.validate().is_err());
    let mut config = SynthConfig::default();
    config.normal.clone_fraction = [0.1, 0.2];
    assert!(config.validate().is_err());
    let json = serde_json::to_string(&SynthConfig::default()).unwrap();
    assert_eq!(SynthConfig::from_json(&json).unwrap(), SynthConfig::default());
}
