//! The information MDP: meta-states `(D, belief, u)`, query actions, and the
//! transition `T′ = L ∘ F` for every query type.
//!
//! | query          | dataset transform `F`          |
//! |----------------|--------------------------------|
//! | label          | `D ∪ {ξ}`                      |
//! | comparison     | `D`                            |
//! | demonstration  | `D ∪ {o}`                      |
//! | feature label  | `D` (relevance `u` reweighted) |
//! | correction     | `(D \ {ξ}) ∪ {o}`              |
//!
//! The dataset is an ordered list, so additions always grow it by one.

pub mod legal;
pub mod query;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{Belief, BeliefError, Evidence, FilterConfig};
use crate::domain::Trajectory;
use crate::humans::ObservationModel;
use crate::scalar::Real;
pub use legal::{legal_queries, Budgets};
pub use query::{Candidate, ContractError, LabelValue, Query, QueryKind, Relevance, Response};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransitionError {
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error("state consistency: {0}")]
    StateConsistency(String),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error("invalid transition config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("transcript step {step}: {source}")]
pub struct ReplayError {
    pub step: usize,
    #[source]
    pub source: TransitionError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Annotation {
    Unlabeled,
    Good,
    Bad,
    Demonstrated,
    Corrected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct LabeledItem<S> {
    pub trajectory: Trajectory,
    pub features: crate::domain::FeatureVector<S>,
    pub annotation: Annotation,
    pub weight: S,
}

impl<S: Real> LabeledItem<S> {
    pub fn unlabeled(candidate: Candidate<S>) -> Self {
        LabeledItem {
            trajectory: candidate.trajectory,
            features: candidate.features,
            annotation: Annotation::Unlabeled,
            weight: S::one(),
        }
    }

    pub fn candidate(&self) -> Candidate<S> {
        Candidate { trajectory: self.trajectory.clone(), features: self.features.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RelearnMode {
    #[default]
    Incremental,
    Batch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransitionConfig {
    /// Probability that the dataset transform is applied (1 = deterministic).
    pub alpha: f64,
    pub tuning_enabled: bool,
    pub tuning_decay: f64,
    pub relearn_mode: RelearnMode,
    /// Discount of the information MDP; stored for multi-step planners, unused by greedy selection.
    pub gamma: f64,
    /// Multiplicative step for feature-relevance updates.
    pub feature_step: f64,
    #[serde(flatten)]
    pub filter: FilterConfig,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        TransitionConfig {
            alpha: 1.0,
            tuning_enabled: false,
            tuning_decay: 0.5,
            relearn_mode: RelearnMode::Incremental,
            gamma: 0.95,
            feature_step: 0.5,
            filter: FilterConfig::default(),
        }
    }
}

impl TransitionConfig {
    /// Returns the offending field name and a message.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.alpha) {
            return Err(("alpha", format!("must lie in [0, 1], got {}", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.tuning_decay) {
            return Err(("tuning_decay", format!("must lie in [0, 1), got {}", self.tuning_decay)));
        }
        if !unit(self.gamma) {
            return Err(("gamma", format!("must lie in [0, 1], got {}", self.gamma)));
        }
        if !unit(self.feature_step) {
            return Err(("feature_step", format!("must lie in [0, 1], got {}", self.feature_step)));
        }
        if !(0.0..=1.0).contains(&self.filter.ess_fraction) {
            return Err(("ess_fraction", format!("must lie in [0, 1], got {}", self.filter.ess_fraction)));
        }
        if !(self.filter.rw_scale.is_finite() && self.filter.rw_scale >= 0.0) {
            return Err(("rw_scale", format!("must be finite and non-negative, got {}", self.filter.rw_scale)));
        }
        Ok(())
    }
}

/// One meta-state `s′ ∈ S′`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct InfoState<S> {
    dataset: Vec<LabeledItem<S>>,
    belief: Belief<S>,
    feature_weights: Vec<S>,
    evidence_log: Vec<Evidence<S>>,
    step: u64,
    /// Belief before any evidence; batch relearning restarts from it.
    prior: Belief<S>,
    rng: ChaCha8Rng,
}

/// What a transition did, beyond the new state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub alpha_draw: f64,
    pub dataset_applied: bool,
    pub dataset_delta: i64,
    pub belief_generation: u64,
}

impl<S: Real> InfoState<S> {
    /// A fresh state with relevance `u = 1`, the given prior belief, and no evidence.
    pub fn new(dataset: Vec<LabeledItem<S>>, prior: Belief<S>, seed: u64) -> Self {
        InfoState {
            dataset,
            belief: prior.clone(),
            feature_weights: vec![S::one(); prior.dim()],
            evidence_log: Vec::new(),
            step: 0,
            prior,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn dataset(&self) -> &[LabeledItem<S>] {
        &self.dataset
    }

    pub fn belief(&self) -> &Belief<S> {
        &self.belief
    }

    pub fn feature_weights(&self) -> &[S] {
        &self.feature_weights
    }

    pub fn evidence_log(&self) -> &[Evidence<S>] {
        &self.evidence_log
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn prior(&self) -> &Belief<S> {
        &self.prior
    }

    pub fn dim(&self) -> usize {
        self.prior.dim()
    }

    pub fn contains(&self, trajectory: &Trajectory) -> bool {
        self.dataset.iter().any(|item| &item.trajectory == trajectory)
    }

    fn position(&self, trajectory: &Trajectory) -> Option<usize> {
        self.dataset.iter().position(|item| &item.trajectory == trajectory)
    }

    /// Checks the membership constraints each query type places on `D`.
    pub fn check_membership(&self, query: &Query<S>) -> Result<(), TransitionError> {
        let missing = |what: &str| Err(TransitionError::StateConsistency(format!("{what} is not in the dataset")));
        match query {
            Query::Label { candidate } => {
                if self.contains(&candidate.trajectory) {
                    return Err(TransitionError::StateConsistency(
                        "label candidate is already in the dataset".into(),
                    ));
                }
            }
            Query::Comparison { items } => {
                if items.iter().any(|c| !self.contains(&c.trajectory)) {
                    return missing("comparison item");
                }
            }
            Query::FeatureLabel { probe, .. } => {
                if !self.contains(&probe.trajectory) {
                    return missing("feature-label probe");
                }
            }
            Query::Correction { target, .. } => {
                if !self.contains(&target.trajectory) {
                    return missing("correction target");
                }
            }
            Query::Demonstration { .. } => {}
        }
        Ok(())
    }

    /// Applies `F` then `L` for one answered query.
    pub fn transition(
        &self,
        query: &Query<S>,
        response: &Response,
        cfg: &TransitionConfig,
        obs: &ObservationModel<S>,
    ) -> Result<(InfoState<S>, TransitionRecord), TransitionError> {
        cfg.validate().map_err(|(f, m)| TransitionError::Config(format!("{f}: {m}")))?;
        query.check_shape(self.dim())?;
        let outcome = query.outcome_index(response)?.ok_or(ContractError::OutOfSupport)?;
        self.check_membership(query)?;

        let mut next = self.clone();
        let alpha_draw: f64 = next.rng.random();
        let dataset_applied = alpha_draw < cfg.alpha;
        let before = next.dataset.len();

        if dataset_applied {
            match (query, response) {
                (Query::Label { candidate }, Response::Label { value }) => {
                    let mut item = LabeledItem::unlabeled(candidate.clone());
                    item.annotation = match value {
                        LabelValue::Good => Annotation::Good,
                        LabelValue::Bad => Annotation::Bad,
                    };
                    next.dataset.push(item);
                }
                (Query::Demonstration { support, .. }, _) => {
                    let mut item = LabeledItem::unlabeled(support[outcome].clone());
                    item.annotation = Annotation::Demonstrated;
                    next.dataset.push(item);
                }
                (Query::Correction { target, candidates }, _) => {
                    let at = next.position(&target.trajectory).ok_or_else(|| {
                        TransitionError::StateConsistency("correction target is not in the dataset".into())
                    })?;
                    next.dataset.remove(at);
                    let mut item = LabeledItem::unlabeled(candidates[outcome].clone());
                    item.annotation = Annotation::Corrected;
                    next.dataset.push(item);
                }
                _ => {}
            }
        }

        if let Query::FeatureLabel { feature_index, .. } = query {
            let step = S::of(cfg.feature_step);
            let u = &mut next.feature_weights[*feature_index];
            *u = if outcome == 0 { (*u * (S::one() + step)).min(S::one()) } else { *u * (S::one() - step) };
        }

        if cfg.tuning_enabled {
            if let Query::Comparison { items } = query {
                let decay = S::of(cfg.tuning_decay);
                for (_, loser) in items.iter().enumerate().filter(|(k, _)| *k != outcome) {
                    next.decay_contradicted(&loser.trajectory, decay);
                }
            }
        }

        let evidence = Evidence::new(query.clone(), response.clone(), next.feature_weights.clone());
        next.belief = match cfg.relearn_mode {
            RelearnMode::Incremental => {
                next.belief.bayes_update(&evidence, &next.evidence_log, obs, cfg.filter)?
            }
            RelearnMode::Batch => {
                let mut log = next.evidence_log.clone();
                log.push(evidence.clone());
                Belief::relearn_from(&next.prior, &log, obs, cfg.filter)?
                    .with_generation(self.belief.generation() + 1)
            }
        };
        next.evidence_log.push(evidence);
        next.step += 1;

        let record = TransitionRecord {
            alpha_draw,
            dataset_applied,
            dataset_delta: next.dataset.len() as i64 - before as i64,
            belief_generation: next.belief.generation(),
        };
        Ok((next, record))
    }

    /// Lowers the weight of stored `good`/`demonstrated` copies of `trajectory`,
    /// and of the evidence that introduced them.
    fn decay_contradicted(&mut self, trajectory: &Trajectory, decay: S) {
        let mut new_weight = None;
        for item in &mut self.dataset {
            if &item.trajectory == trajectory
                && matches!(item.annotation, Annotation::Good | Annotation::Demonstrated)
            {
                item.weight = (item.weight * decay).max(S::zero()).min(S::one());
                new_weight = Some(item.weight);
            }
        }
        let Some(w) = new_weight else { return };
        for e in &mut self.evidence_log {
            let introduced = match (&e.query, &e.response) {
                (Query::Label { candidate }, Response::Label { value: LabelValue::Good }) => {
                    &candidate.trajectory == trajectory
                }
                (Query::Demonstration { .. }, Response::Demonstration { trajectory: t }) => t == trajectory,
                _ => false,
            };
            if introduced {
                e.weight = e.weight.min(w);
            }
        }
    }

    /// Folds [`InfoState::transition`] over a transcript.
    pub fn replay(
        &self,
        transcript: &[(Query<S>, Response)],
        cfg: &TransitionConfig,
        obs: &ObservationModel<S>,
    ) -> Result<InfoState<S>, ReplayError> {
        let mut state = self.clone();
        for (step, (q, r)) in transcript.iter().enumerate() {
            state = state.transition(q, r, cfg, obs).map_err(|source| ReplayError { step, source })?.0;
        }
        Ok(state)
    }
}
