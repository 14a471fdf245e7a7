//! Query actions and human responses, one variant pair per query type.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Cell, FeatureVector, Trajectory};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContractError {
    #[error("response variant `{response}` does not answer a `{query}` query")]
    Mismatch { query: QueryKind, response: QueryKind },
    #[error("response is outside the query's support")]
    OutOfSupport,
    #[error("query has an empty response support")]
    EmptySupport,
    #[error("malformed query: {0}")]
    Malformed(String),
}

/// A trajectory together with its feature vector `Φ(ξ)`, so likelihoods can be
/// evaluated from the query alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct Candidate<S> {
    pub trajectory: Trajectory,
    pub features: FeatureVector<S>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Label,
    Comparison,
    Demonstration,
    FeatureLabel,
    Correction,
}

impl QueryKind {
    pub const ALL: [QueryKind; 5] = [
        QueryKind::Label,
        QueryKind::Comparison,
        QueryKind::Demonstration,
        QueryKind::FeatureLabel,
        QueryKind::Correction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QueryKind::Label => "label",
            QueryKind::Comparison => "comparison",
            QueryKind::Demonstration => "demonstration",
            QueryKind::FeatureLabel => "feature_label",
            QueryKind::Correction => "correction",
        }
    }
}

impl std::fmt::Display for QueryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The action `a′ ∈ A′` posed to the human.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", bound = "S: Real")]
pub enum Query<S> {
    /// Rate an unlabeled trajectory that is not yet in the dataset.
    Label { candidate: Candidate<S> },
    /// Pick the best of `K ≥ 2` dataset trajectories.
    Comparison { items: Vec<Candidate<S>> },
    /// Produce a trajectory from `start` through `waypoints`; `support` is the
    /// finite set the likelihood normalizes over.
    Demonstration { start: Cell, waypoints: Vec<Cell>, support: Vec<Candidate<S>> },
    /// Is feature `feature_index` relevant, shown on a dataset trajectory?
    FeatureLabel { feature_index: usize, probe: Candidate<S> },
    /// Replace a dataset trajectory with one of `candidates`.
    Correction { target: Candidate<S>, candidates: Vec<Candidate<S>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelValue {
    Good,
    Bad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relevance {
    Relevant,
    NotRelevant,
}

/// The observation `o ∈ Ω`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Response {
    Label { value: LabelValue },
    Comparison { choice: usize },
    Demonstration { trajectory: Trajectory },
    FeatureLabel { value: Relevance },
    Correction { trajectory: Trajectory },
}

impl Response {
    pub fn kind(&self) -> QueryKind {
        match self {
            Response::Label { .. } => QueryKind::Label,
            Response::Comparison { .. } => QueryKind::Comparison,
            Response::Demonstration { .. } => QueryKind::Demonstration,
            Response::FeatureLabel { .. } => QueryKind::FeatureLabel,
            Response::Correction { .. } => QueryKind::Correction,
        }
    }
}

impl<S: Real> Query<S> {
    pub fn kind(&self) -> QueryKind {
        match self {
            Query::Label { .. } => QueryKind::Label,
            Query::Comparison { .. } => QueryKind::Comparison,
            Query::Demonstration { .. } => QueryKind::Demonstration,
            Query::FeatureLabel { .. } => QueryKind::FeatureLabel,
            Query::Correction { .. } => QueryKind::Correction,
        }
    }

    /// Number of distinct responses.
    pub fn support_size(&self) -> usize {
        match self {
            Query::Label { .. } | Query::FeatureLabel { .. } => 2,
            Query::Comparison { items } => items.len(),
            Query::Demonstration { support, .. } => support.len(),
            Query::Correction { candidates, .. } => candidates.len(),
        }
    }

    /// The response with outcome index `i`, in canonical order
    /// (good/bad, chosen index, support order, relevant/not relevant, candidate order).
    pub fn response_at(&self, i: usize) -> Option<Response> {
        if i >= self.support_size() {
            return None;
        }
        Some(match self {
            Query::Label { .. } => Response::Label {
                value: if i == 0 { LabelValue::Good } else { LabelValue::Bad },
            },
            Query::Comparison { .. } => Response::Comparison { choice: i },
            Query::Demonstration { support, .. } => {
                Response::Demonstration { trajectory: support[i].trajectory.clone() }
            }
            Query::FeatureLabel { .. } => Response::FeatureLabel {
                value: if i == 0 { Relevance::Relevant } else { Relevance::NotRelevant },
            },
            Query::Correction { candidates, .. } => {
                Response::Correction { trajectory: candidates[i].trajectory.clone() }
            }
        })
    }

    pub fn responses(&self) -> Vec<Response> {
        (0..self.support_size()).filter_map(|i| self.response_at(i)).collect()
    }

    /// Maps a response to its outcome index. A well-typed response outside the
    /// support maps to `None`; a response of the wrong variant is a contract error.
    pub fn outcome_index(&self, response: &Response) -> Result<Option<usize>, ContractError> {
        let idx = match (self, response) {
            (Query::Label { .. }, Response::Label { value }) => Some(match value {
                LabelValue::Good => 0,
                LabelValue::Bad => 1,
            }),
            (Query::Comparison { items }, Response::Comparison { choice }) => {
                (*choice < items.len()).then_some(*choice)
            }
            (Query::Demonstration { support, .. }, Response::Demonstration { trajectory }) => {
                support.iter().position(|c| &c.trajectory == trajectory)
            }
            (Query::FeatureLabel { .. }, Response::FeatureLabel { value }) => Some(match value {
                Relevance::Relevant => 0,
                Relevance::NotRelevant => 1,
            }),
            (Query::Correction { candidates, .. }, Response::Correction { trajectory }) => {
                candidates.iter().position(|c| &c.trajectory == trajectory)
            }
            _ => {
                return Err(ContractError::Mismatch { query: self.kind(), response: response.kind() })
            }
        };
        Ok(idx)
    }

    /// Every trajectory the query shows, in presentation order.
    pub fn trajectories(&self) -> Vec<&Candidate<S>> {
        match self {
            Query::Label { candidate } => vec![candidate],
            Query::Comparison { items } => items.iter().collect(),
            Query::Demonstration { support, .. } => support.iter().collect(),
            Query::FeatureLabel { probe, .. } => vec![probe],
            Query::Correction { target, candidates } => {
                std::iter::once(target).chain(candidates.iter()).collect()
            }
        }
    }

    /// Structural checks that do not need the dataset: `K ≥ 2`, feature index in range,
    /// and consistent feature dimensions.
    pub fn check_shape(&self, dim: usize) -> Result<(), ContractError> {
        if let Query::Comparison { items } = self {
            if items.len() < 2 {
                return Err(ContractError::Malformed(format!(
                    "comparison needs at least 2 items, got {}",
                    items.len()
                )));
            }
        }
        if let Query::FeatureLabel { feature_index, .. } = self {
            if *feature_index >= dim {
                return Err(ContractError::Malformed(format!(
                    "feature index {feature_index} out of range for dimension {dim}"
                )));
            }
        }
        if let Some(c) = self.trajectories().into_iter().find(|c| c.features.dim() != dim) {
            return Err(ContractError::Malformed(format!(
                "feature vector of dimension {} in a dimension-{dim} model",
                c.features.dim()
            )));
        }
        Ok(())
    }
}
