use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use infomdp_core::acquisition::StrategyKind;
use infomdp_harness::runner::SeedStatus;
use infomdp_harness::{compare_strategies, replay_transcript, run_experiment, ConfigError, ExperimentConfig, HarnessError};
use infomdp_service::Service;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Active reward learning experiments and live sessions.
#[derive(Parser)]
#[command(name = "infomdp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured strategy on every seed and write metrics and transcripts.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run several strategies on paired seeds and summarize them against random.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated strategy names, e.g. info_gain,random.
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<String>,
    },
    /// Re-run a transcript and check every recorded transition.
    Replay {
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Seed the transcript was produced with; inferred from `seed-<n>.jsonl` by default.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Serve live sessions over HTTP.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Where sessions are stored; defaults to `<output dir>/sessions`.
        #[arg(long)]
        sessions: Option<PathBuf>,
    },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, HarnessError> {
    Ok(ExperimentConfig::from_path(path)?.with_env_overrides())
}

fn run(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Run { config } => {
            let cfg = load(&config)?;
            let out = run_experiment(&cfg)?;
            let mut failed = false;
            for s in &out.seeds {
                let last = s.rows.last().expect("every seed records its initial state");
                match s.report.status {
                    SeedStatus::Completed => println!(
                        "seed {}: {} steps, alignment {:.4}, spread {:.4}",
                        s.report.seed, s.report.steps_completed, last.alignment, last.spread
                    ),
                    SeedStatus::Failed => {
                        failed = true;
                        eprintln!(
                            "seed {}: failed after {} steps: {}",
                            s.report.seed,
                            s.report.steps_completed,
                            s.report.error.as_deref().unwrap_or("unknown error")
                        );
                    }
                }
            }
            println!("wrote {}", cfg.output.dir.display());
            Ok(if failed { ExitCode::from(EXIT_RUNTIME) } else { ExitCode::SUCCESS })
        }
        Command::Compare { config, strategies } => {
            let cfg = load(&config)?;
            let kinds = strategies
                .iter()
                .map(|name| {
                    StrategyKind::parse(name.trim())
                        .ok_or_else(|| ConfigError::invalid("strategies", format!("unknown strategy {name:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let cmp = compare_strategies(&cfg, &kinds)?;
            println!("strategy,median_alignment,win_rate_vs_random");
            for row in cmp.summary.iter().filter(|r| r.step == cfg.steps as u64) {
                println!("{},{:.4},{:.3}", row.strategy, row.median_alignment, row.win_rate_vs_random);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay { transcript, config, seed } => {
            let cfg = load(&config)?;
            let summary = replay_transcript(&cfg, &transcript, seed)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { config, port, sessions } => {
            let cfg = load(&config)?;
            let root = sessions.unwrap_or_else(|| cfg.output.dir.join("sessions"));
            let service = Service::new(root, Some(cfg));
            let addr = SocketAddr::from(([127, 0, 0, 1], port));
            let rt = tokio::runtime::Runtime::new().map_err(|e| HarnessError::Setup(e.to_string()))?;
            eprintln!("listening on http://{addr}");
            rt.block_on(infomdp_service::serve(service, addr)).map_err(|e| HarnessError::Setup(e.to_string()))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            ExitCode::from(if code == 2 { EXIT_CONFIG } else { code as u8 })
        }
    }
}
