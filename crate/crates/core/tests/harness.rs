//! Reproducibility and output layout of the experiment harness.

use std::fs;
use std::path::Path;

use adagrid::harness::{self, ScenarioConfig, ScenarioKind};

fn short(kind: ScenarioKind, baseline: bool) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::defaults(kind);
    cfg.sampler.n_iterations = 200;
    cfg.baseline = baseline;
    cfg
}

fn run_into(cfg: &ScenarioConfig, dir: &Path) {
    let forward = harness::build_forward(cfg).unwrap();
    let data = harness::generate_data(cfg, &forward).unwrap();
    harness::write_data(dir, &data).unwrap();
    let run = harness::run_chain(cfg, &forward, &data).unwrap();
    harness::write_run(dir, cfg, &run).unwrap();
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    names
}

#[test]
fn same_seed_gives_identical_csv_files() {
    for kind in [ScenarioKind::BeamContinuous, ScenarioKind::Sde, ScenarioKind::SourceDetection] {
        let cfg = short(kind, false);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_into(&cfg, a.path());
        run_into(&cfg, b.path());
        let names = csv_files(a.path());
        assert_eq!(names, csv_files(b.path()));
        for n in ["data.csv", "truth.csv", "chain_u.csv", "chain_a.csv", "bands.csv", "summary.csv"] {
            assert!(names.iter().any(|x| x == n), "{kind:?}: missing {n}");
        }
        for n in &names {
            let (x, y) = (fs::read(a.path().join(n)).unwrap(), fs::read(b.path().join(n)).unwrap());
            assert!(x == y, "{kind:?}: {n} differs between runs");
        }
        assert!(a.path().join("runtime.txt").exists());
    }
}

#[test]
fn different_chain_seeds_differ() {
    let cfg = short(ScenarioKind::BeamDiscrete, false);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_into(&cfg, a.path());
    run_into(&cfg.clone().with_chain_seed(77), b.path());
    assert_eq!(fs::read(a.path().join("data.csv")).unwrap(), fs::read(b.path().join("data.csv")).unwrap());
    assert_ne!(fs::read(a.path().join("chain_u.csv")).unwrap(), fs::read(b.path().join("chain_u.csv")).unwrap());
}

#[test]
fn baseline_stores_a_single_discretization_row() {
    for kind in [ScenarioKind::BeamContinuous, ScenarioKind::Sde, ScenarioKind::SourceDetection] {
        let dir = tempfile::tempdir().unwrap();
        run_into(&short(kind, true), dir.path());
        let text = fs::read_to_string(dir.path().join("chain_a.csv")).unwrap();
        assert_eq!(text.lines().count(), 2, "{kind:?}: header plus one row");
        let chain_u = fs::read_to_string(dir.path().join("chain_u.csv")).unwrap();
        assert_eq!(chain_u.lines().count(), 2 + 200 / 10);
    }
}

#[test]
fn concurrent_chains_match_sequential_runs() {
    let cfg = short(ScenarioKind::BeamDiscrete, false);
    let forward = harness::build_forward(&cfg).unwrap();
    let data = harness::generate_data(&cfg, &forward).unwrap();
    let runs = harness::run_chains(&cfg, &data, 3).unwrap();
    for (i, r) in runs.iter().enumerate() {
        let c = cfg.clone().with_chain_seed(cfg.chain_seed + i as u64);
        let solo = harness::run_chain(&c, &forward, &data).unwrap();
        assert_eq!(r.record.samples, solo.record.samples);
    }
}

#[test]
fn multi_chain_output_has_per_chain_directories_and_a_merged_summary() {
    let cfg = short(ScenarioKind::BeamDiscrete, false);
    let forward = harness::build_forward(&cfg).unwrap();
    let data = harness::generate_data(&cfg, &forward).unwrap();
    let runs = harness::run_chains(&cfg, &data, 2).unwrap();
    let cfgs: Vec<_> = (0..2).map(|i| cfg.clone().with_chain_seed(cfg.chain_seed + i)).collect();
    let dir = tempfile::tempdir().unwrap();
    harness::write_runs(dir.path(), &cfgs, &runs).unwrap();
    assert!(dir.path().join("chain_0").join("chain_u.csv").exists());
    assert!(dir.path().join("chain_1").join("chain_u.csv").exists());
    let summary = harness::summarize_dir(dir.path()).unwrap();
    assert!(summary.iter().any(|(k, _)| k == "acceptance_u"));
}
