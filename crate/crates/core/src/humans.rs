//! Boltzmann-rational observation model and a simulated human oracle.
//!
//! Every query type reduces to one of two choice families:
//!
//! * sigmoid (binary): labels use `z = β(ωᵀ(u⊙Φ) − r₀)`, feature labels use
//!   `z = β(|ω_i| − τ)`; the first outcome has probability `σ(z)`.
//! * softmax: comparisons, demonstrations and corrections pick option `j` with
//!   probability `exp(β ωᵀ(u⊙Φ_j)) / Σ_k exp(β ωᵀ(u⊙Φ_k))`.
//!
//! `u` is the learner's per-feature relevance vector; the simulated human
//! always answers with `u = 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imdp::query::{ContractError, Query, Response};
use crate::scalar::{dot, norm, sigmoid, softmax, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("beta must be finite and non-negative (got {0})")]
    InvalidBeta(f64),
    #[error("threshold must be finite (got {0})")]
    InvalidThreshold(f64),
    #[error("ground-truth omega must be unit norm (norm {0})")]
    NotUnit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct ObservationModel<S> {
    pub beta: S,
    pub label_threshold: S,
    pub feature_threshold: S,
}

impl<S: Real> Default for ObservationModel<S> {
    fn default() -> Self {
        ObservationModel { beta: S::one(), label_threshold: S::of(0.5), feature_threshold: S::of(0.25) }
    }
}

enum Family<S> {
    Sigmoid(S),
    Softmax(Vec<S>),
}

fn scaled_utility<S: Real>(omega: &[S], phi: &[S], scale: &[S]) -> S {
    omega.iter().zip(phi).zip(scale).map(|((&w, &x), &u)| w * x * u).sum()
}

fn softplus<S: Real>(x: S) -> S {
    x.max(S::zero()) + (-x.abs()).exp().ln_1p()
}

impl<S: Real> ObservationModel<S> {
    pub fn new(beta: S, label_threshold: S, feature_threshold: S) -> Result<Self, ModelError> {
        if !beta.is_finite() || beta < S::zero() {
            return Err(ModelError::InvalidBeta(beta.to_f64_lossy()));
        }
        for t in [label_threshold, feature_threshold] {
            if !t.is_finite() {
                return Err(ModelError::InvalidThreshold(t.to_f64_lossy()));
            }
        }
        Ok(ObservationModel { beta, label_threshold, feature_threshold })
    }

    pub fn with_beta(beta: S) -> Result<Self, ModelError> {
        Self::new(beta, S::of(0.5), S::of(0.25))
    }

    fn family(&self, query: &Query<S>, omega: &[S], scale: &[S]) -> Result<Family<S>, ContractError> {
        let beta = self.beta;
        let utilities = |items: &mut dyn Iterator<Item = &[S]>| -> Vec<S> {
            items.map(|phi| beta * scaled_utility(omega, phi, scale)).collect()
        };
        Ok(match query {
            Query::Label { candidate } => Family::Sigmoid(
                beta * (scaled_utility(omega, candidate.features.as_slice(), scale) - self.label_threshold),
            ),
            Query::FeatureLabel { feature_index, .. } => {
                let w = omega.get(*feature_index).copied().ok_or_else(|| {
                    ContractError::Malformed(format!("feature index {feature_index} out of range"))
                })?;
                Family::Sigmoid(beta * (w.abs() - self.feature_threshold))
            }
            Query::Comparison { items: opts }
            | Query::Demonstration { support: opts, .. }
            | Query::Correction { candidates: opts, .. } => {
                if opts.is_empty() {
                    return Err(ContractError::EmptySupport);
                }
                Family::Softmax(utilities(&mut opts.iter().map(|c| c.features.as_slice())))
            }
        })
    }

    /// Probabilities of every outcome index, in [`Query::response_at`] order.
    pub fn outcome_probabilities(
        &self,
        query: &Query<S>,
        omega: &[S],
        scale: &[S],
    ) -> Result<Vec<S>, ContractError> {
        let mut out = Vec::with_capacity(query.support_size());
        self.push_outcome_probabilities(query, omega, scale, &mut out)?;
        Ok(out)
    }

    /// Appends the outcome probabilities to `out`; the allocation-free form of
    /// [`ObservationModel::outcome_probabilities`] used when scoring many particles.
    pub(crate) fn push_outcome_probabilities(
        &self,
        query: &Query<S>,
        omega: &[S],
        scale: &[S],
        out: &mut Vec<S>,
    ) -> Result<(), ContractError> {
        let beta = self.beta;
        let binary = |out: &mut Vec<S>, z: S| {
            out.push(sigmoid(z));
            out.push(sigmoid(-z));
        };
        match query {
            Query::Label { candidate } => binary(
                out,
                beta * (scaled_utility(omega, candidate.features.as_slice(), scale) - self.label_threshold),
            ),
            Query::FeatureLabel { feature_index, .. } => {
                let w = omega.get(*feature_index).copied().ok_or_else(|| {
                    ContractError::Malformed(format!("feature index {feature_index} out of range"))
                })?;
                binary(out, beta * (w.abs() - self.feature_threshold));
            }
            Query::Comparison { items: opts }
            | Query::Demonstration { support: opts, .. }
            | Query::Correction { candidates: opts, .. } => {
                if opts.is_empty() {
                    return Err(ContractError::EmptySupport);
                }
                // Same arithmetic as `softmax`, written in place.
                let start = out.len();
                let mut max = S::neg_infinity();
                for c in opts {
                    let z = beta * scaled_utility(omega, c.features.as_slice(), scale);
                    if z > max {
                        max = z;
                    }
                    out.push(z);
                }
                let slots = &mut out[start..];
                for v in slots.iter_mut() {
                    *v = (*v - max).exp();
                }
                let total: S = slots.iter().copied().sum();
                for v in slots.iter_mut() {
                    *v = *v / total;
                }
            }
        }
        Ok(())
    }

    /// `P(response | query, ω)`. Out-of-support responses have probability zero.
    pub fn likelihood(
        &self,
        query: &Query<S>,
        response: &Response,
        omega: &[S],
        scale: &[S],
    ) -> Result<S, ContractError> {
        match query.outcome_index(response)? {
            None => Ok(S::zero()),
            Some(i) => Ok(self.outcome_probabilities(query, omega, scale)?[i]),
        }
    }

    /// The full response distribution `o ↦ P(o | query, ω)`.
    pub fn response_distribution(
        &self,
        query: &Query<S>,
        omega: &[S],
        scale: &[S],
    ) -> Result<Vec<(Response, S)>, ContractError> {
        let probs = self.outcome_probabilities(query, omega, scale)?;
        Ok(query.responses().into_iter().zip(probs).collect())
    }

    /// `log P(outcome | query, ω)` computed in log space. Valid for any `ω`, not just unit vectors.
    pub fn log_likelihood(
        &self,
        query: &Query<S>,
        outcome: usize,
        omega: &[S],
        scale: &[S],
    ) -> Result<S, ContractError> {
        match self.family(query, omega, scale)? {
            Family::Sigmoid(z) => match outcome {
                0 => Ok(-softplus(-z)),
                1 => Ok(-softplus(z)),
                _ => Err(ContractError::OutOfSupport),
            },
            Family::Softmax(logits) => {
                let zj = *logits.get(outcome).ok_or(ContractError::OutOfSupport)?;
                let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
                let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<S>().ln();
                Ok(zj - lse)
            }
        }
    }

    /// Analytic `∇_ω log P(outcome | query, ω)` in ambient coordinates.
    pub fn log_likelihood_gradient(
        &self,
        query: &Query<S>,
        outcome: usize,
        omega: &[S],
        scale: &[S],
    ) -> Result<Vec<S>, ContractError> {
        let beta = self.beta;
        let d = omega.len();
        let sigmoid_coeff = |z: S| -> Result<S, ContractError> {
            // d/dz log σ(z) = 1 − σ(z);  d/dz log(1 − σ(z)) = −σ(z)
            match outcome {
                0 => Ok(sigmoid(-z)),
                1 => Ok(-sigmoid(z)),
                _ => Err(ContractError::OutOfSupport),
            }
        };
        match (self.family(query, omega, scale)?, query) {
            (Family::Sigmoid(z), Query::Label { candidate }) => {
                let c = sigmoid_coeff(z)? * beta;
                Ok(candidate.features.as_slice().iter().zip(scale).map(|(&x, &u)| c * x * u).collect())
            }
            (Family::Sigmoid(z), Query::FeatureLabel { feature_index, .. }) => {
                let c = sigmoid_coeff(z)? * beta;
                let mut g = vec![S::zero(); d];
                let w = omega[*feature_index];
                g[*feature_index] = if w > S::zero() {
                    c
                } else if w < S::zero() {
                    -c
                } else {
                    S::zero()
                };
                Ok(g)
            }
            (Family::Softmax(logits), q) => {
                if outcome >= logits.len() {
                    return Err(ContractError::OutOfSupport);
                }
                let probs = softmax(&logits);
                let opts: Vec<Vec<S>> =
                    q.trajectories_for_choice().iter().map(|c| c.features.scaled(scale)).collect();
                let mut g = opts[outcome].clone();
                for (p, x) in probs.iter().zip(&opts) {
                    for (gk, &xk) in g.iter_mut().zip(x) {
                        *gk = *gk - *p * xk;
                    }
                }
                Ok(g.into_iter().map(|v| v * beta).collect())
            }
            _ => unreachable!("family matches query variant"),
        }
    }
}

impl<S: Real> Query<S> {
    /// Options of a softmax-family query in outcome order.
    pub(crate) fn trajectories_for_choice(&self) -> &[crate::imdp::query::Candidate<S>] {
        match self {
            Query::Comparison { items } => items,
            Query::Demonstration { support, .. } => support,
            Query::Correction { candidates, .. } => candidates,
            Query::Label { candidate } | Query::FeatureLabel { probe: candidate, .. } => {
                std::slice::from_ref(candidate)
            }
        }
    }
}

/// Samples an outcome index from `probs` using one uniform draw.
pub(crate) fn sample_index<S: Real>(probs: &[S], rng: &mut impl Rng) -> usize {
    let u = S::of(rng.random::<f64>());
    let mut acc = S::zero();
    for (i, &p) in probs.iter().enumerate() {
        acc = acc + p;
        if u < acc {
            return i;
        }
    }
    // Rounding left the cumulative sum just below u; take the last positive entry.
    probs.iter().rposition(|&p| p > S::zero()).unwrap_or(probs.len() - 1)
}

/// A simulated human answering queries with Boltzmann-rational noise around `ω*`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct SimulatedHuman<S> {
    omega_star: Vec<S>,
    model: ObservationModel<S>,
    rng: ChaCha8Rng,
}

impl<S: Real> SimulatedHuman<S> {
    pub fn new(omega_star: Vec<S>, model: ObservationModel<S>, seed: u64) -> Result<Self, ModelError> {
        let n = norm(&omega_star).to_f64_lossy();
        if (n - 1.0).abs() > 1e-9 {
            return Err(ModelError::NotUnit(n));
        }
        Ok(SimulatedHuman { omega_star, model, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn omega_star(&self) -> &[S] {
        &self.omega_star
    }

    pub fn model(&self) -> &ObservationModel<S> {
        &self.model
    }

    /// True reward `ω*ᵀΦ`.
    pub fn reward(&self, features: &[S]) -> S {
        dot(&self.omega_star, features)
    }

    pub fn respond(&mut self, query: &Query<S>) -> Result<Response, ContractError> {
        if query.support_size() == 0 {
            return Err(ContractError::EmptySupport);
        }
        let ones = vec![S::one(); self.omega_star.len()];
        let probs = self.model.outcome_probabilities(query, &self.omega_star, &ones)?;
        let i = sample_index(&probs, &mut self.rng);
        Ok(query.response_at(i).expect("sampled index is in support"))
    }
}
