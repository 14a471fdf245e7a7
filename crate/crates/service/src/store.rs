//! Sessions and their on-disk form: `<root>/<id>/session.json` holds the latest
//! state, `<root>/<id>/transcript.jsonl` every answered query.

use std::fs::{self, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use infomdp_core::{InfoState, ScoredQuery};
use infomdp_harness::transcript::{read_lines, write_lines};
use infomdp_harness::{Episode, ExperimentConfig, HarnessError, TranscriptLine};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    v: u32,
    id: String,
    seed: u64,
    config: ExperimentConfig,
    state: InfoState,
    pending: Option<ScoredQuery>,
}

pub struct Session {
    pub id: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub episode: Episode,
    pub pending: Option<ScoredQuery>,
    pub transcript: Vec<TranscriptLine>,
    dir: PathBuf,
}

impl Session {
    pub fn create(root: &Path, id: String, config: ExperimentConfig, seed: u64) -> Result<Self, HarnessError> {
        let episode = Episode::new(&config, seed)?;
        let dir = root.join(&id);
        let session = Session { id, seed, config, episode, pending: None, transcript: Vec::new(), dir };
        Ok(session)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes the snapshot atomically and creates an empty transcript if needed.
    pub fn save(&self) -> Result<(), StoreError> {
        fs::create_dir_all(&self.dir).map_err(io(&self.dir))?;
        let transcript = self.dir.join("transcript.jsonl");
        if !transcript.exists() {
            fs::write(&transcript, b"").map_err(io(&transcript))?;
        }
        let snapshot = Snapshot {
            v: crate::api::VERSION,
            id: self.id.clone(),
            seed: self.seed,
            config: self.config.clone(),
            state: self.episode.state().clone(),
            pending: self.pending.clone(),
        };
        let path = self.dir.join("session.json");
        let tmp = self.dir.join("session.json.tmp");
        let bytes = serde_json::to_vec(&snapshot).expect("snapshots serialize");
        fs::write(&tmp, bytes).map_err(io(&tmp))?;
        fs::rename(&tmp, &path).map_err(io(&path))
    }

    pub fn append(&mut self, line: TranscriptLine) -> Result<(), StoreError> {
        let path = self.dir.join("transcript.jsonl");
        let mut file = OpenOptions::new().create(true).append(true).open(&path).map_err(io(&path))?;
        write_lines(&mut file, std::slice::from_ref(&line)).map_err(io(&path))?;
        file.flush().map_err(io(&path))?;
        self.transcript.push(line);
        Ok(())
    }

    /// Loads a session saved under `root`, or `None` if there is none.
    pub fn load(root: &Path, id: &str) -> Result<Option<Self>, StoreError> {
        let dir = root.join(id);
        let path = dir.join("session.json");
        if !path.exists() {
            return Ok(None);
        }
        let corrupt = |message: String| StoreError::Corrupt { path: path.clone(), message };
        let bytes = fs::read(&path).map_err(io(&path))?;
        let snap: Snapshot = serde_json::from_slice(&bytes).map_err(|e| corrupt(e.to_string()))?;
        let mut episode =
            Episode::restore(&snap.config, snap.seed, snap.state).map_err(|e| corrupt(e.to_string()))?;
        let mut pending = snap.pending;
        let tpath = dir.join("transcript.jsonl");
        let file = fs::File::open(&tpath).map_err(io(&tpath))?;
        let transcript = read_lines(BufReader::new(file))
            .map_err(|e| StoreError::Corrupt { path: tpath.clone(), message: e.to_string() })?;
        // The transcript is written before the snapshot; finish an interrupted save.
        if transcript.len() as u64 == episode.state().step() + 1 {
            let last = transcript.last().expect("nonempty");
            let redone = episode
                .apply(&last.query, &last.response)
                .map_err(|e| StoreError::Corrupt { path: tpath.clone(), message: e.to_string() })?;
            if &redone != last {
                return Err(StoreError::Corrupt { path: tpath, message: "last line does not match the snapshot".into() });
            }
            pending = None;
        }
        if transcript.len() as u64 != episode.state().step() {
            return Err(StoreError::Corrupt {
                path: tpath,
                message: format!("{} lines for a state at step {}", transcript.len(), episode.state().step()),
            });
        }
        Ok(Some(Session {
            id: snap.id,
            seed: snap.seed,
            config: snap.config,
            episode,
            pending,
            transcript,
            dir,
        }))
    }
}
