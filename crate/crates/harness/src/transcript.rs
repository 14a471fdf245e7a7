//! JSONL transcripts: one answered query per line.

use std::io::{BufRead, Write};

use infomdp_core::{InfoState, Query, Response};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptLine {
    /// Step count of the state after this transition.
    pub step: u64,
    pub query: Query,
    pub response: Response,
    pub alpha_draw: f64,
    pub dataset_delta: i64,
    pub belief_generation: u64,
    /// SHA-256 of the resulting state's JSON serialization.
    pub state_digest: String,
}

pub fn state_digest(state: &InfoState) -> String {
    let bytes = serde_json::to_vec(state).expect("states always serialize");
    hex::encode(Sha256::digest(&bytes))
}

pub fn write_lines<W: Write>(mut out: W, lines: &[TranscriptLine]) -> std::io::Result<()> {
    for line in lines {
        serde_json::to_writer(&mut out, line)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Parses a transcript; errors name the 1-based line.
///
/// Each line must be exactly the canonical serialization of what it parses
/// to, so edits that survive parsing (such as float digits past `f64`
/// precision) are still rejected.
pub fn read_lines<R: BufRead>(input: R) -> Result<Vec<TranscriptLine>, HarnessError> {
    let mut lines = Vec::new();
    for (i, raw) in input.lines().enumerate() {
        let bad = |message: String| HarnessError::Transcript { line: i + 1, message };
        let raw = raw.map_err(|e| bad(e.to_string()))?;
        let parsed: TranscriptLine = serde_json::from_str(&raw).map_err(|e| bad(e.to_string()))?;
        if serde_json::to_string(&parsed).map_err(|e| bad(e.to_string()))? != raw {
            return Err(bad("line is not in canonical form".into()));
        }
        lines.push(parsed);
    }
    Ok(lines)
}
