use std::fs;
use std::path::Path;

use infomdp_core::acquisition::StrategyKind;
use infomdp_harness::episode::build_pool;
use infomdp_harness::metrics::{median, read_metrics};
use infomdp_harness::replay::replay_lines;
use infomdp_harness::runner::{run_seed, transcript_path, SeedStatus};
use infomdp_harness::transcript::{read_lines, state_digest};
use infomdp_harness::{
    compare_strategies, replay_transcript, run_experiment, simulate, Episode, ExperimentConfig, HarnessError,
};

const MIXED: &str = include_str!("../../../configs/mixed.json");
const BENCHMARK: &str = include_str!("../../../configs/benchmark.json");

fn small(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_json(MIXED).unwrap();
    cfg.particles = 120;
    cfg.steps = 10;
    cfg.output.dir = dir.to_path_buf();
    cfg
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in walk(dir) {
        out.push((entry.strip_prefix(dir).unwrap().display().to_string(), fs::read(&entry).unwrap()));
    }
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn identical_configs_give_identical_artifacts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&small(a.path())).unwrap();
    run_experiment(&small(b.path())).unwrap();
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert_eq!(fa.len(), 5);
    assert_eq!(fa, fb);
}

#[test]
fn metrics_rows_are_seed_major_and_sane() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    run_experiment(&cfg).unwrap();
    let rows = read_metrics(&fs::read_to_string(dir.path().join("metrics.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), cfg.seeds.len() * (cfg.steps + 1));
    let order: Vec<(u64, u64)> = rows.iter().map(|r| (r.seed, r.step)).collect();
    let mut sorted = order.clone();
    sorted.sort();
    assert_eq!(order, sorted);
    for r in &rows {
        assert!((-1.0..=1.0).contains(&r.alignment));
        assert!(r.regret >= -1e-9);
        assert!(r.spread >= 0.0);
        assert_eq!(r.wall_ms, 0);
        assert_eq!(r.query_variant.is_none(), r.step == 0);
    }
}

#[test]
fn regret_vanishes_when_the_learner_picks_the_true_best() {
    let cfg = small(Path::new("unused"));
    let ep = Episode::new(&cfg, 0).unwrap();
    let truth = ep.omega_star();
    let reward = |k: usize, w: &[f64]| ep.pool()[k].features.as_slice().iter().zip(w).map(|(x, y)| x * y).sum::<f64>();
    let argmax = |w: &[f64]| (0..ep.pool().len()).fold(0, |best, i| if reward(i, w) > reward(best, w) { i } else { best });
    let estimate = ep.state().belief().mean_estimate();
    let r = ep.regret();
    if argmax(&estimate) == argmax(truth) {
        assert_eq!(r, 0.0);
    } else {
        assert!(r > 0.0);
    }
}

#[test]
fn pools_are_distinct_feasible_and_reach_the_goal() {
    let cfg = ExperimentConfig::from_json(BENCHMARK).unwrap();
    let world = cfg.world.build().unwrap();
    let pool = build_pool(&world, &cfg.features, cfg.pool_size, 11).unwrap();
    assert_eq!(pool.len(), cfg.pool_size);
    for (i, c) in pool.iter().enumerate() {
        c.trajectory.validate(&world).unwrap();
        assert!(pool[..i].iter().all(|d| d.trajectory != c.trajectory));
        if i % 2 == 1 {
            assert_eq!(c.trajectory.end(), world.goal());
        }
    }
    let lengths: std::collections::BTreeSet<usize> = pool.iter().map(|c| c.trajectory.len()).collect();
    assert!(lengths.len() >= 5, "lengths {lengths:?}");
}

#[test]
fn replay_reproduces_every_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let out = run_experiment(&cfg).unwrap();
    for seed in &cfg.seeds {
        let summary = replay_transcript(&cfg, &transcript_path(dir.path(), *seed), None).unwrap();
        let run = out.seeds.iter().find(|s| s.report.seed == *seed).unwrap();
        let last = run.rows.last().unwrap();
        assert_eq!(summary.alignment, last.alignment);
        assert_eq!(summary.spread, last.spread);
        assert_eq!(summary.state_digest, run.transcript.last().unwrap().state_digest);
    }
}

#[test]
fn replay_rejects_tampering_and_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    run_experiment(&cfg).unwrap();
    let path = transcript_path(dir.path(), 0);
    let text = fs::read_to_string(&path).unwrap();

    let cut = dir.path().join("seed-0-cut.jsonl");
    fs::write(&cut, &text[..text.len() - 40]).unwrap();
    match replay_transcript(&cfg, &cut, Some(0)) {
        Err(HarnessError::Transcript { line, .. }) => assert_eq!(line, cfg.steps),
        other => panic!("expected a parse error, got {other:?}"),
    }

    let lines = read_lines(text.as_bytes()).unwrap();
    let mut edited = lines.clone();
    edited[3].step = 9;
    assert!(matches!(replay_lines(&cfg, 0, &edited), Err(HarnessError::Divergence { line: 4, .. })));
    let mut edited = lines.clone();
    edited[2].alpha_draw = 0.5;
    assert!(matches!(replay_lines(&cfg, 0, &edited), Err(HarnessError::Divergence { line: 3, .. })));
    let mut edited = lines.clone();
    edited[5].belief_generation += 1;
    assert!(matches!(replay_lines(&cfg, 0, &edited), Err(HarnessError::Divergence { line: 6, .. })));

    assert!(matches!(replay_lines(&cfg, 1, &lines), Err(HarnessError::Divergence { line: 1, .. })));
}

#[test]
fn resuming_from_a_snapshot_matches_a_straight_run() {
    let cfg = small(Path::new("unused"));
    let run = run_seed(&cfg, 2);
    let mid = 4;
    let prefix = replay_lines(&cfg, 2, &run.transcript[..mid]).unwrap();
    let json = serde_json::to_string(&prefix.state).unwrap();
    let mut resumed = Episode::restore(&cfg, 2, serde_json::from_str(&json).unwrap()).unwrap();
    for line in &run.transcript[mid..] {
        assert_eq!(resumed.propose().unwrap().query, line.query);
        assert_eq!(&resumed.apply(&line.query, &line.response).unwrap(), line);
    }
    assert_eq!(state_digest(resumed.state()), run.transcript.last().unwrap().state_digest);
}

#[test]
fn failing_seeds_are_recorded_in_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.budgets = infomdp_core::imdp::Budgets::comparison_only(4);
    cfg.init_dataset_size = 1;
    let out = run_experiment(&cfg).unwrap();
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["v"], 1);
    for (s, m) in out.seeds.iter().zip(manifest["seeds"].as_array().unwrap()) {
        assert_eq!(s.report.status, SeedStatus::Failed);
        assert_eq!(m["status"], "failed");
        assert_eq!(m["steps_completed"], 0);
        assert!(m["error"].as_str().unwrap().contains("no candidate"), "{m}");
        assert_eq!(s.rows.len(), 1);
    }
}

#[test]
fn compare_pairs_seeds_and_counts_ties_half() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    assert!(matches!(compare_strategies(&cfg, &[]), Err(HarnessError::Config(_))));
    assert!(matches!(compare_strategies(&cfg, &[StrategyKind::InfoGain]), Err(HarnessError::Config(_))));

    let cmp = compare_strategies(&cfg, &[StrategyKind::Random, StrategyKind::Qbc]).unwrap();
    assert_eq!(cmp.runs.len(), 2);
    for row in cmp.summary.iter().filter(|r| r.strategy == "random") {
        assert_eq!(row.win_rate_vs_random, 0.5);
    }
    assert_eq!(cmp.summary.len(), 2 * (cfg.steps + 1));
    let text = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(text.starts_with("# infomdp-summary v1\nstep,strategy,median_alignment,win_rate_vs_random\n"));
    assert!(dir.path().join("qbc").join("metrics.csv").exists());
    assert!(dir.path().join("random").join("manifest.json").exists());
}

#[test]
fn every_informed_strategy_learns_on_the_benchmark() {
    let base = ExperimentConfig::from_json(BENCHMARK).unwrap();
    for kind in [StrategyKind::Uncertainty, StrategyKind::Qbc, StrategyKind::ExpectedModelChange, StrategyKind::InfoGain] {
        let mut cfg = base.clone();
        cfg.strategy.kind = kind;
        let out = simulate(&cfg);
        assert!(out.seeds.iter().all(|s| s.report.status == SeedStatus::Completed));
        let at = |step| median(&out.alignments_at(step).iter().map(|(_, a)| *a).collect::<Vec<_>>());
        let (start, end) = (at(0), at(cfg.steps as u64));
        assert!(end > start, "{}: median alignment {start} -> {end}", kind.name());
    }
}

#[test]
fn any_single_byte_edit_is_rejected() {
    use rand::{Rng, SeedableRng};
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.steps = 4;
    run_experiment(&cfg).unwrap();
    let original = fs::read(transcript_path(dir.path(), 1)).unwrap();
    let target = dir.path().join("edited.jsonl");
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for _ in 0..150 {
        let mut bytes = original.clone();
        let at = rng.random_range(0..bytes.len());
        let alphabet = b"0123456789abcdef,:\"{}[]-.e x\n";
        let replacement = loop {
            let b = alphabet[rng.random_range(0..alphabet.len())];
            if b != bytes[at] {
                break b;
            }
        };
        bytes[at] = replacement;
        fs::write(&target, &bytes).unwrap();
        let err = replay_transcript(&cfg, &target, Some(1)).expect_err("edit went unnoticed");
        assert_eq!(err.exit_code(), 4, "byte {at}: {err}");
    }
}
