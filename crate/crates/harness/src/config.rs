use std::path::{Path, PathBuf};

use infomdp_core::acquisition::Strategy;
use infomdp_core::imdp::Budgets;
use infomdp_core::{Cell, FeatureMap, GridWorld, ObservationModel, TransitionConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Overrides `output.dir` when set.
pub const OUTPUT_DIR_ENV: &str = "INFOMDP_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", if field.is_empty() { "config" } else { field.as_str() })]
    Invalid { field: String, message: String },
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid { field: field.into(), message: message.into() }
    }

    /// Dotted path of the offending field, when one is known.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { field, .. } if !field.is_empty() => Some(field),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub obstacles: Vec<Cell>,
    pub goal: Cell,
    pub horizon: usize,
}

impl WorldSpec {
    pub fn build(&self) -> Result<GridWorld, ConfigError> {
        GridWorld::new(self.width, self.height, self.obstacles.iter().copied(), self.goal, self.horizon)
            .map_err(|e| ConfigError::invalid("world", e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationSpec {
    pub beta: f64,
    pub label_threshold: f64,
    pub feature_threshold: f64,
}

impl Default for ObservationSpec {
    fn default() -> Self {
        let m = ObservationModel::default();
        ObservationSpec { beta: m.beta, label_threshold: m.label_threshold, feature_threshold: m.feature_threshold }
    }
}

impl ObservationSpec {
    pub fn build(&self) -> Result<ObservationModel, ConfigError> {
        ObservationModel::new(self.beta, self.label_threshold, self.feature_threshold)
            .map_err(|e| ConfigError::invalid("observation", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Record per-step wall time; off by default so artifacts stay byte-identical.
    pub record_timing: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: PathBuf::from("out"), record_timing: false }
    }
}

fn default_particles() -> usize {
    1000
}

fn default_pool_size() -> usize {
    40
}

fn default_init_dataset_size() -> usize {
    5
}

/// A full experiment: world, learner, simulated humans and outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub world: WorldSpec,
    #[serde(default)]
    pub features: FeatureMap,
    /// Reward dimension; must equal the feature count when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default = "default_particles")]
    pub particles: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub observation: ObservationSpec,
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default)]
    pub transition: TransitionConfig,
    #[serde(default)]
    pub budgets: Budgets,
    pub steps: usize,
    #[serde(default = "default_pool_size")]
    pub pool_size: usize,
    #[serde(default = "default_init_dataset_size")]
    pub init_dataset_size: usize,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let field = if field == "." { String::new() } else { field };
            ConfigError::Invalid { field, message: e.into_inner().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    /// Applies [`OUTPUT_DIR_ENV`] if it is set and nonempty.
    pub fn with_env_overrides(mut self) -> Self {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
            self.output.dir = PathBuf::from(dir);
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let world = self.world.build()?;
        if self.features.dim() == 0 {
            return Err(ConfigError::invalid("features", "at least one feature is required"));
        }
        if let Some(d) = self.dim {
            if d != self.features.dim() {
                return Err(ConfigError::invalid(
                    "dim",
                    format!("{d} does not match the {} configured features", self.features.dim()),
                ));
            }
        }
        if self.particles < 2 {
            return Err(ConfigError::invalid("particles", "at least 2 particles are required"));
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::invalid("seeds", "at least one seed is required"));
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(ConfigError::invalid("seeds", format!("seed {dup} is listed twice")));
        }
        self.observation.build()?;
        self.transition
            .validate()
            .map_err(|(f, m)| ConfigError::invalid(format!("transition.{f}"), m))?;
        if self.strategy.committee_size < 2 {
            return Err(ConfigError::invalid("strategy.committee_size", "must be at least 2"));
        }
        if self.strategy.committee_size > self.particles {
            return Err(ConfigError::invalid("strategy.committee_size", "exceeds the particle count"));
        }
        if !(self.strategy.ease_penalty.is_finite() && self.strategy.ease_penalty >= 0.0) {
            return Err(ConfigError::invalid("strategy.ease_penalty", "must be finite and non-negative"));
        }
        if self.steps == 0 {
            return Err(ConfigError::invalid("steps", "must be at least 1"));
        }
        if self.budgets.comparison > 0 && self.budgets.comparison_k < 2 {
            return Err(ConfigError::invalid("budgets.comparison_k", "comparisons need at least 2 items"));
        }
        if self.pool_size == 0 {
            return Err(ConfigError::invalid("pool_size", "must be at least 1"));
        }
        if self.pool_size > world.free_cells().len() * MAX_PER_START {
            return Err(ConfigError::invalid("pool_size", "larger than the world can supply"));
        }
        if self.init_dataset_size > self.pool_size {
            return Err(ConfigError::invalid("init_dataset_size", "exceeds pool_size"));
        }
        Ok(())
    }
}

/// Upper bound on pool draws per free cell, used to reject pools the world cannot fill.
pub(crate) const MAX_PER_START: usize = 32;
