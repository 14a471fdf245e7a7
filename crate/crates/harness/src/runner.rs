use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use infomdp_core::acquisition::StrategyKind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, ExperimentConfig};
use crate::episode::Episode;
use crate::metrics::{median, win_rate, write_metrics, write_summary, MetricsRow, SummaryRow};
use crate::transcript::{write_lines, TranscriptLine};
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedStatus {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub status: SeedStatus,
    pub steps_completed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub v: u32,
    pub strategy: StrategyKind,
    pub steps: usize,
    pub seeds: Vec<SeedReport>,
}

/// Everything one seed produced, including a partial record if it failed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub report: SeedReport,
    pub rows: Vec<MetricsRow>,
    pub transcript: Vec<TranscriptLine>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedRun>,
}

impl RunOutput {
    pub fn rows(&self) -> impl Iterator<Item = &MetricsRow> {
        self.seeds.iter().flat_map(|s| s.rows.iter())
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            v: 1,
            strategy: self.config.strategy.kind,
            steps: self.config.steps,
            seeds: self.seeds.iter().map(|s| s.report.clone()).collect(),
        }
    }

    /// Alignment of every completed seed at `step`, in seed order.
    pub fn alignments_at(&self, step: u64) -> Vec<(u64, f64)> {
        self.rows().filter(|r| r.step == step).map(|r| (r.seed, r.alignment)).collect()
    }
}

fn row(ep: &Episode, strategy: &str, variant: Option<String>, score: Option<f64>, wall_ms: u64) -> MetricsRow {
    MetricsRow {
        seed: ep.seed(),
        step: ep.state().step(),
        strategy: strategy.to_string(),
        query_variant: variant,
        score,
        alignment: ep.alignment(),
        spread: ep.spread(),
        regret: ep.regret(),
        dataset_size: ep.state().dataset().len(),
        wall_ms,
    }
}

/// Runs the closed loop for one seed; any error ends the seed but keeps what was produced.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> SeedRun {
    let strategy = cfg.strategy.kind.name();
    let mut rows = Vec::with_capacity(cfg.steps + 1);
    let mut transcript = Vec::with_capacity(cfg.steps);
    let result = (|| -> Result<(), HarnessError> {
        let mut ep = Episode::new(cfg, seed)?;
        let mut human = ep.human()?;
        rows.push(row(&ep, strategy, None, None, 0));
        for _ in 0..cfg.steps {
            let started = Instant::now();
            let chosen = ep.propose()?;
            let response = human.respond(&chosen.query)?;
            transcript.push(ep.apply(&chosen.query, &response)?);
            let wall_ms = if cfg.output.record_timing { started.elapsed().as_millis() as u64 } else { 0 };
            rows.push(row(&ep, strategy, Some(chosen.query.kind().name().to_string()), Some(chosen.score), wall_ms));
        }
        Ok(())
    })();
    let report = SeedReport {
        seed,
        status: if result.is_ok() { SeedStatus::Completed } else { SeedStatus::Failed },
        steps_completed: transcript.len() as u64,
        error: result.err().map(|e| e.to_string()),
    };
    SeedRun { report, rows, transcript }
}

/// Runs every seed in parallel without touching the filesystem.
pub fn simulate(cfg: &ExperimentConfig) -> RunOutput {
    let seeds = cfg.seeds.par_iter().map(|&seed| run_seed(cfg, seed)).collect();
    RunOutput { config: cfg.clone(), seeds }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

pub fn transcript_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join("transcripts").join(format!("seed-{seed}.jsonl"))
}

/// Writes `metrics.csv`, `manifest.json` and `transcripts/seed-<n>.jsonl` under `dir`.
pub fn write_run(dir: &Path, out: &RunOutput) -> Result<(), HarnessError> {
    let transcripts = dir.join("transcripts");
    fs::create_dir_all(&transcripts).map_err(io_err(&transcripts))?;

    let metrics = dir.join("metrics.csv");
    let rows: Vec<MetricsRow> = out.rows().cloned().collect();
    let file = File::create(&metrics).map_err(io_err(&metrics))?;
    write_metrics(BufWriter::new(file), &rows)?;

    for s in &out.seeds {
        let path = transcript_path(dir, s.report.seed);
        let file = File::create(&path).map_err(io_err(&path))?;
        write_lines(BufWriter::new(file), &s.transcript).map_err(io_err(&path))?;
    }

    let manifest = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&out.manifest()).expect("manifest serializes");
    text.push('\n');
    fs::write(&manifest, text).map_err(io_err(&manifest))?;
    Ok(())
}

/// Runs the experiment and writes its artifacts to `cfg.output.dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let out = simulate(cfg);
    write_run(&cfg.output.dir, &out)?;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub runs: Vec<RunOutput>,
    pub summary: Vec<SummaryRow>,
}

impl Comparison {
    pub fn run(&self, kind: StrategyKind) -> Option<&RunOutput> {
        self.runs.iter().find(|r| r.config.strategy.kind == kind)
    }
}

/// Per-step median alignment and win rate against random for each listed strategy.
pub fn summarize(runs: &[RunOutput], strategies: &[StrategyKind], steps: usize) -> Vec<SummaryRow> {
    let find = |k: StrategyKind| runs.iter().find(|r| r.config.strategy.kind == k);
    let baseline = find(StrategyKind::Random);
    let mut rows = Vec::new();
    for step in 0..=steps as u64 {
        let base = baseline.map(|b| b.alignments_at(step)).unwrap_or_default();
        for &kind in strategies {
            let Some(run) = find(kind) else { continue };
            let mine = run.alignments_at(step);
            if mine.is_empty() {
                continue;
            }
            let values: Vec<f64> = mine.iter().map(|(_, a)| *a).collect();
            let (a, b): (Vec<f64>, Vec<f64>) = mine
                .iter()
                .filter_map(|(seed, x)| base.iter().find(|(s, _)| s == seed).map(|(_, y)| (*x, *y)))
                .unzip();
            rows.push(SummaryRow {
                step,
                strategy: kind.name().to_string(),
                median_alignment: median(&values),
                win_rate_vs_random: if a.is_empty() { f64::NAN } else { win_rate(&a, &b) },
            });
        }
    }
    rows
}

/// Runs each strategy on the same seeds; outputs go to `<dir>/<strategy>/` plus `<dir>/summary.csv`.
pub fn compare_strategies(cfg: &ExperimentConfig, strategies: &[StrategyKind]) -> Result<Comparison, HarnessError> {
    cfg.validate()?;
    if strategies.len() < 2 {
        return Err(ConfigError::invalid("strategies", "at least two strategies are required").into());
    }
    let mut kinds: Vec<StrategyKind> = Vec::new();
    for &k in strategies.iter().chain([StrategyKind::Random].iter()) {
        if !kinds.contains(&k) {
            kinds.push(k);
        }
    }
    let mut runs = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let mut c = cfg.clone();
        c.strategy.kind = kind;
        c.output.dir = cfg.output.dir.join(kind.name());
        runs.push(run_experiment(&c)?);
    }
    let mut listed: Vec<StrategyKind> = Vec::new();
    for &k in strategies {
        if !listed.contains(&k) {
            listed.push(k);
        }
    }
    let summary = summarize(&runs, &listed, cfg.steps);
    fs::create_dir_all(&cfg.output.dir).map_err(io_err(&cfg.output.dir))?;
    let path = cfg.output.dir.join("summary.csv");
    let file = File::create(&path).map_err(io_err(&path))?;
    write_summary(BufWriter::new(file), &summary)?;
    Ok(Comparison { runs, summary })
}
