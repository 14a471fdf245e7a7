//! Query scoring (the meta-reward `R′`) and greedy one-step selection.
//!
//! All scorers share one signature so any of them can serve as `R′`. Scores are
//! computed from per-particle response distributions `P(o | q, ω_i)` evaluated
//! with the state's feature relevance `u`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::Belief;
use crate::humans::ObservationModel;
use crate::imdp::query::{ContractError, Query, Response};
use crate::imdp::InfoState;
use crate::scalar::{dot, entropy, norm, Real};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AcquisitionError {
    #[error("no candidate queries to choose from")]
    NoCandidates,
    #[error("committee of {size} exceeds the {particles} available particles")]
    CommitteeTooLarge { size: usize, particles: usize },
    #[error("committee needs at least 2 members (got {0})")]
    CommitteeTooSmall(usize),
    #[error(transparent)]
    Contract(#[from] ContractError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Random,
    Uncertainty,
    Qbc,
    ExpectedModelChange,
    InfoGain,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Random,
        StrategyKind::Uncertainty,
        StrategyKind::Qbc,
        StrategyKind::ExpectedModelChange,
        StrategyKind::InfoGain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::Uncertainty => "uncertainty",
            StrategyKind::Qbc => "qbc",
            StrategyKind::ExpectedModelChange => "expected_model_change",
            StrategyKind::InfoGain => "info_gain",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Strategy {
    pub kind: StrategyKind,
    /// Committee size for `qbc`.
    pub committee_size: usize,
    pub seed: u64,
    /// Ease-of-answering cost `λ`: scores are reduced by `λ · ln |support|`.
    pub ease_penalty: f64,
}

impl Default for Strategy {
    fn default() -> Self {
        Strategy { kind: StrategyKind::InfoGain, committee_size: 5, seed: 0, ease_penalty: 0.0 }
    }
}

impl Strategy {
    pub fn new(kind: StrategyKind) -> Self {
        Strategy { kind, ..Strategy::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct ScoredQuery<S> {
    pub query: Query<S>,
    pub score: S,
    /// Predictive response distribution under the belief.
    pub predicted: Vec<(Response, S)>,
    /// Position of the query in the candidate list.
    pub index: usize,
}

/// `P(o | q, ω_i)` for every particle, flattened row-major with `support_size` columns.
fn flat_distributions<S: Real>(
    belief: &Belief<S>,
    query: &Query<S>,
    obs: &ObservationModel<S>,
    scale: &[S],
) -> Result<(Vec<S>, usize), ContractError> {
    let k = query.support_size();
    if k == 0 {
        return Err(ContractError::EmptySupport);
    }
    let mut flat = Vec::with_capacity(k * belief.len());
    for omega in belief.omegas() {
        obs.push_outcome_probabilities(query, omega, scale, &mut flat)?;
    }
    Ok((flat, k))
}

/// `P(o | q, ω_i)` for every particle, rows in particle order.
pub fn particle_distributions<S: Real>(
    belief: &Belief<S>,
    query: &Query<S>,
    obs: &ObservationModel<S>,
    scale: &[S],
) -> Result<Vec<Vec<S>>, ContractError> {
    let (flat, k) = flat_distributions(belief, query, obs, scale)?;
    Ok(flat.chunks_exact(k).map(<[S]>::to_vec).collect())
}

fn mixture<S: Real>(weights: &[S], flat: &[S], k: usize) -> Vec<S> {
    let mut mix = vec![S::zero(); k];
    for (&w, row) in weights.iter().zip(flat.chunks_exact(k)) {
        for (m, &p) in mix.iter_mut().zip(row) {
            *m = *m + w * p;
        }
    }
    let total: S = mix.iter().copied().sum();
    mix.into_iter().map(|p| p / total).collect()
}

/// `P̄(o) = Σ_i w_i P(o | q, ω_i)`, in outcome order.
pub fn predictive_distribution<S: Real>(
    belief: &Belief<S>,
    query: &Query<S>,
    obs: &ObservationModel<S>,
    scale: &[S],
) -> Result<Vec<S>, ContractError> {
    let (flat, k) = flat_distributions(belief, query, obs, scale)?;
    Ok(mixture(belief.weights(), &flat, k))
}

fn mutual_information<S: Real>(weights: &[S], flat: &[S], k: usize, mix: &[S]) -> S {
    let mut ig = S::zero();
    for (&w, row) in weights.iter().zip(flat.chunks_exact(k)) {
        if w == S::zero() {
            continue;
        }
        let mut kl = S::zero();
        for (&p, &m) in row.iter().zip(mix) {
            if p > S::zero() {
                kl = kl + p * (p / m).ln();
            }
        }
        ig = ig + w * kl;
    }
    ig.max(S::zero())
}

/// Mutual information between `ω` and the response, in nats.
pub fn info_gain<S: Real>(
    belief: &Belief<S>,
    query: &Query<S>,
    obs: &ObservationModel<S>,
    scale: &[S],
) -> Result<S, ContractError> {
    let (flat, k) = flat_distributions(belief, query, obs, scale)?;
    let mix = mixture(belief.weights(), &flat, k);
    Ok(mutual_information(belief.weights(), &flat, k, &mix))
}

/// Entropy of the predictive distribution.
pub fn uncertainty_score<S: Real>(
    belief: &Belief<S>,
    query: &Query<S>,
    obs: &ObservationModel<S>,
    scale: &[S],
) -> Result<S, ContractError> {
    Ok(entropy(&predictive_distribution(belief, query, obs, scale)?))
}

/// Weighted sampling without replacement (exponential keys), ties by index.
fn draw_committee<S: Real>(weights: &[S], size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut keys: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            let w = w.to_f64_lossy();
            (if w > 0.0 { u.ln() / w } else { f64::NEG_INFINITY }, i)
        })
        .collect();
    keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keys.into_iter().take(size).map(|(_, i)| i).collect()
}

fn argmax_lowest<S: Real>(values: &[S]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Vote entropy of a seeded committee; each member votes its most likely response.
pub fn qbc_score<S: Real>(
    belief: &Belief<S>,
    query: &Query<S>,
    obs: &ObservationModel<S>,
    scale: &[S],
    committee_size: usize,
    seed: u64,
) -> Result<S, AcquisitionError> {
    if committee_size < 2 {
        return Err(AcquisitionError::CommitteeTooSmall(committee_size));
    }
    if committee_size > belief.len() {
        return Err(AcquisitionError::CommitteeTooLarge { size: committee_size, particles: belief.len() });
    }
    if query.support_size() == 0 {
        return Err(ContractError::EmptySupport.into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let committee = draw_committee(belief.weights(), committee_size, &mut rng);
    let mut votes = vec![0usize; query.support_size()];
    for i in committee {
        let dist = obs.outcome_probabilities(query, &belief.omegas()[i], scale)?;
        votes[argmax_lowest(&dist)] += 1;
    }
    let shares: Vec<S> = votes.iter().map(|&v| S::of_usize(v) / S::of_usize(committee_size)).collect();
    Ok(entropy(&shares))
}

/// Projects `g` onto the tangent space of the unit sphere at unit vector `at`.
pub fn tangent_projection<S: Real>(g: &[S], at: &[S]) -> Vec<S> {
    let radial = dot(g, at);
    g.iter().zip(at).map(|(&gk, &ak)| gk - radial * ak).collect()
}

/// Expected norm of the tangent log-likelihood gradient at the mean estimate,
/// `E_{o ~ P̄}[ ‖Π ∇_ω log P(o | q, ω̂)‖ ]`.
pub fn model_change_score<S: Real>(
    belief: &Belief<S>,
    query: &Query<S>,
    obs: &ObservationModel<S>,
    scale: &[S],
) -> Result<S, ContractError> {
    let predictive = predictive_distribution(belief, query, obs, scale)?;
    let estimate = belief.mean_estimate();
    let mut score = S::zero();
    for (o, &p) in predictive.iter().enumerate() {
        if p == S::zero() {
            continue;
        }
        let g = obs.log_likelihood_gradient(query, o, &estimate, scale)?;
        score = score + p * norm(&tangent_projection(&g, &estimate));
    }
    Ok(score)
}

fn ease_cost<S: Real>(strategy: &Strategy, query: &Query<S>) -> S {
    if strategy.ease_penalty == 0.0 {
        return S::zero();
    }
    S::of(strategy.ease_penalty) * S::of_usize(query.support_size().max(1)).ln()
}

/// Scores every candidate under `strategy`, in candidate order.
pub fn score_candidates<S: Real>(
    strategy: &Strategy,
    state: &InfoState<S>,
    candidates: &[Query<S>],
    obs: &ObservationModel<S>,
) -> Result<Vec<S>, AcquisitionError> {
    let belief = state.belief();
    let scale = state.feature_weights();
    let step_seed = seed::derive(strategy.seed, state.step());
    let mut random = ChaCha8Rng::seed_from_u64(step_seed);
    candidates
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let raw = match strategy.kind {
                StrategyKind::Random => S::of(random.random::<f64>()),
                StrategyKind::Uncertainty => uncertainty_score(belief, q, obs, scale)?,
                StrategyKind::Qbc => qbc_score(
                    belief,
                    q,
                    obs,
                    scale,
                    strategy.committee_size,
                    seed::derive(step_seed, i as u64),
                )?,
                StrategyKind::ExpectedModelChange => model_change_score(belief, q, obs, scale)?,
                StrategyKind::InfoGain => info_gain(belief, q, obs, scale)?,
            };
            Ok(raw - ease_cost(strategy, q))
        })
        .collect()
}

/// Index of the maximum score; ties and NaNs resolve to the earliest position.
pub fn argmax_first<S: Real>(scores: &[S]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        match best {
            Some(b) if s <= scores[b] => {}
            _ => best = Some(i),
        }
    }
    best.or(if scores.is_empty() { None } else { Some(0) })
}

/// The greedy policy: score all candidates and return the best one.
pub fn select_query<S: Real>(
    strategy: &Strategy,
    state: &InfoState<S>,
    candidates: &[Query<S>],
    obs: &ObservationModel<S>,
) -> Result<ScoredQuery<S>, AcquisitionError> {
    if candidates.is_empty() {
        return Err(AcquisitionError::NoCandidates);
    }
    let scores = score_candidates(strategy, state, candidates, obs)?;
    let index = argmax_first(&scores).ok_or(AcquisitionError::NoCandidates)?;
    let query = candidates[index].clone();
    let predicted = predictive_distribution(state.belief(), &query, obs, state.feature_weights())?;
    Ok(ScoredQuery {
        predicted: query.responses().into_iter().zip(predicted).collect(),
        score: scores[index],
        query,
        index,
    })
}
