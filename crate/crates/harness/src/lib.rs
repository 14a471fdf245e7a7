//! Closed-loop experiments for the information-MDP learner.
//!
//! A config names a world, a learner and a list of seeds. Each seed gets its
//! own trajectory pool and simulated human; the learner repeatedly picks a
//! query, the human answers, and the meta-state transitions. Runs produce a
//! metrics CSV, one JSONL transcript per seed and a manifest, all
//! byte-for-byte reproducible from the config.

pub mod config;
pub mod episode;
pub mod metrics;
pub mod replay;
pub mod runner;
pub mod transcript;

use std::path::PathBuf;

use infomdp_core::acquisition::AcquisitionError;
use infomdp_core::belief::BeliefError;
use infomdp_core::domain::DomainError;
use infomdp_core::humans::ModelError;
use infomdp_core::imdp::{ContractError, TransitionError};
use thiserror::Error;

pub use config::{ConfigError, ExperimentConfig, OUTPUT_DIR_ENV};
pub use episode::Episode;
pub use metrics::{MetricsRow, SummaryRow};
pub use replay::{replay_transcript, ReplaySummary};
pub use runner::{compare_strategies, run_experiment, simulate, Comparison, RunOutput};
pub use transcript::TranscriptLine;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("setup failed: {0}")]
    Setup(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    Acquisition(#[from] AcquisitionError),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("writing csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("transcript line {line}: {message}")]
    Transcript { line: usize, message: String },
    #[error("replay diverged at line {line}: {message}")]
    Divergence { line: usize, message: String },
}

impl HarnessError {
    /// Process exit code: 2 for config errors, 4 for transcript integrity failures, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Transcript { .. } | HarnessError::Divergence { .. } => 4,
            _ => 3,
        }
    }
}
