use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use infomdp_core::InfoState;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::episode::Episode;
use crate::transcript::{read_lines, state_digest, TranscriptLine};
use crate::HarnessError;

#[derive(Debug, Clone, Serialize)]
pub struct ReplaySummary {
    pub seed: u64,
    pub steps: u64,
    pub alignment: f64,
    pub spread: f64,
    pub dataset_size: usize,
    pub belief_generation: u64,
    pub state_digest: String,
    #[serde(skip)]
    pub state: InfoState,
}

/// Picks the seed from `seed-<n>.jsonl`, falling back to a single-seed config.
pub fn infer_seed(path: &Path, cfg: &ExperimentConfig) -> Option<u64> {
    let from_name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.strip_prefix("seed-"))
        .and_then(|s| s.parse().ok());
    from_name.or(match cfg.seeds.as_slice() {
        [only] => Some(*only),
        _ => None,
    })
}

fn diverged(line: usize, message: impl Into<String>) -> HarnessError {
    HarnessError::Divergence { line, message: message.into() }
}

/// Replays `lines` from the seed's initial state, checking every recorded field.
pub fn replay_lines(cfg: &ExperimentConfig, seed: u64, lines: &[TranscriptLine]) -> Result<ReplaySummary, HarnessError> {
    let mut ep = Episode::new(cfg, seed)?;
    for (i, recorded) in lines.iter().enumerate() {
        let n = i + 1;
        if recorded.step != ep.state().step() + 1 {
            return Err(diverged(n, format!("step {} follows step {}", recorded.step, ep.state().step())));
        }
        ep.check_query(&recorded.query).map_err(|m| diverged(n, m))?;
        let actual = ep
            .apply(&recorded.query, &recorded.response)
            .map_err(|e| diverged(n, format!("transition rejected: {e}")))?;
        let checks = [
            ("alpha_draw", actual.alpha_draw.to_bits() == recorded.alpha_draw.to_bits()),
            ("dataset_delta", actual.dataset_delta == recorded.dataset_delta),
            ("belief_generation", actual.belief_generation == recorded.belief_generation),
            ("state_digest", actual.state_digest == recorded.state_digest),
        ];
        if let Some((field, _)) = checks.iter().find(|(_, ok)| !ok) {
            return Err(diverged(n, format!("{field} does not match the replayed transition")));
        }
    }
    let state = ep.state().clone();
    Ok(ReplaySummary {
        seed,
        steps: state.step(),
        alignment: ep.alignment(),
        spread: ep.spread(),
        dataset_size: state.dataset().len(),
        belief_generation: state.belief().generation(),
        state_digest: state_digest(&state),
        state,
    })
}

pub fn replay_transcript(cfg: &ExperimentConfig, path: &Path, seed: Option<u64>) -> Result<ReplaySummary, HarnessError> {
    let seed = seed.or_else(|| infer_seed(path, cfg)).ok_or_else(|| {
        HarnessError::Setup("cannot tell which seed the transcript belongs to; name it seed-<n>.jsonl".into())
    })?;
    let file = File::open(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
    let lines = read_lines(BufReader::new(file))?;
    replay_lines(cfg, seed, &lines)
}
