//! Request and response bodies. Every body carries the schema version `v`.

use infomdp_core::{Cell, QueryKind, Query, Response};
use infomdp_harness::{Episode, ExperimentConfig, TranscriptLine};
use serde::{Deserialize, Serialize};

pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub v: u32,
    /// Falls back to the server's config when absent.
    #[serde(default)]
    pub config: Option<serde_json::Value>,
    /// Defaults to the config's first seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub step: u64,
    pub dataset_size: usize,
    pub spread: f64,
    pub belief_generation: u64,
    pub pending: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateResponse {
    pub v: u32,
    pub id: String,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridView {
    pub width: u32,
    pub height: u32,
    pub obstacles: Vec<Cell>,
    pub goal: Cell,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryView {
    pub cells: Vec<Cell>,
    pub features: Vec<f64>,
}

/// Everything a client needs to render and answer the pending query.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryPayload {
    pub v: u32,
    pub id: String,
    pub step: u64,
    pub variant: QueryKind,
    pub score: f64,
    pub query: Query,
    /// Trajectories in the order the query lists them.
    pub trajectories: Vec<TrajectoryView>,
    /// Valid answers, in outcome order.
    pub responses: Vec<Response>,
    /// The learner's predicted probability of each answer.
    pub predicted: Vec<f64>,
    pub grid: GridView,
    pub feature_names: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseRequest {
    pub v: u32,
    pub response: Response,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponseAck {
    pub v: u32,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleView {
    pub omega: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefView {
    pub v: u32,
    pub step: u64,
    pub generation: u64,
    pub mean_estimate: Vec<f64>,
    pub spread: f64,
    pub feature_weights: Vec<f64>,
    /// Heaviest particles first, at most [`TOP_PARTICLES`].
    pub particles: Vec<ParticleView>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscriptView {
    pub v: u32,
    pub lines: Vec<TranscriptLine>,
}

pub const TOP_PARTICLES: usize = 50;

pub fn grid_view(cfg: &ExperimentConfig) -> GridView {
    GridView {
        width: cfg.world.width,
        height: cfg.world.height,
        obstacles: cfg.world.obstacles.clone(),
        goal: cfg.world.goal,
        horizon: cfg.world.horizon,
    }
}

pub fn summary(ep: &Episode, pending: bool) -> Summary {
    let s = ep.state();
    Summary {
        step: s.step(),
        dataset_size: s.dataset().len(),
        spread: ep.spread(),
        belief_generation: s.belief().generation(),
        pending,
    }
}

pub fn belief_view(ep: &Episode) -> BeliefView {
    let s = ep.state();
    let b = s.belief();
    let mut order: Vec<usize> = (0..b.len()).collect();
    order.sort_by(|&i, &j| b.weights()[j].total_cmp(&b.weights()[i]).then(i.cmp(&j)));
    BeliefView {
        v: VERSION,
        step: s.step(),
        generation: b.generation(),
        mean_estimate: b.mean_estimate(),
        spread: b.spread(),
        feature_weights: s.feature_weights().to_vec(),
        particles: order
            .into_iter()
            .take(TOP_PARTICLES)
            .map(|i| ParticleView { omega: b.omegas()[i].clone(), weight: b.weights()[i] })
            .collect(),
    }
}
