//! Weighted particle belief over unit reward-weight vectors `ω`.
//!
//! Updates are exact Bayesian reweighting on a fixed particle support. When the
//! effective sample size drops below `ess_fraction · M` the support is refreshed
//! by systematic resampling and one Metropolis random-walk move per particle,
//! targeting the posterior given the complete evidence log.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::humans::ObservationModel;
use crate::imdp::query::{ContractError, Query, Response};
use crate::scalar::{norm, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BeliefError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("belief needs at least 2 particles (got {0})")]
    TooFewParticles(usize),
    #[error("every particle assigns zero likelihood to the evidence")]
    DegenerateEvidence,
    #[error("evidence weight must lie in [0, 1] (got {0})")]
    InvalidEvidenceWeight(f64),
    #[error("particle {index} is not unit norm (norm {norm})")]
    NotUnit { index: usize, norm: f64 },
    #[error("invalid particle weights: {0}")]
    InvalidWeights(String),
    #[error(transparent)]
    Contract(#[from] ContractError),
}

/// One answered query, as consumed by the learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct Evidence<S> {
    pub query: Query<S>,
    pub response: Response,
    /// Likelihood exponent in `[0, 1]`; lowered by dataset tuning.
    pub weight: S,
    /// Feature relevance vector `u` in effect when the evidence was recorded.
    pub feature_scale: Vec<S>,
}

impl<S: Real> Evidence<S> {
    pub fn new(query: Query<S>, response: Response, feature_scale: Vec<S>) -> Self {
        Evidence { query, response, weight: S::one(), feature_scale }
    }

    fn log_likelihood(&self, obs: &ObservationModel<S>, omega: &[S]) -> Result<S, ContractError> {
        if self.weight == S::zero() {
            return Ok(S::zero());
        }
        match self.query.outcome_index(&self.response)? {
            None => Ok(S::neg_infinity()),
            Some(i) => Ok(self.weight * obs.log_likelihood(&self.query, i, omega, &self.feature_scale)?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub resample: bool,
    pub ess_fraction: f64,
    pub rw_scale: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig { resample: true, ess_fraction: 0.5, rw_scale: 0.1 }
    }
}

impl FilterConfig {
    pub fn without_resampling(self) -> Self {
        FilterConfig { resample: false, ..self }
    }
}

/// A borrowed view of one particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaParticle<'a, S> {
    pub omega: &'a [S],
    pub weight: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct Belief<S> {
    dim: usize,
    particles: Vec<Vec<S>>,
    weights: Vec<S>,
    generation: u64,
    rng: ChaCha8Rng,
}

fn sphere_point<S: Real>(dim: usize, rng: &mut ChaCha8Rng) -> Vec<S> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| S::of(x / n)).collect();
        }
    }
}

/// Draws a point uniformly from the unit sphere in `R^dim`.
pub fn sample_unit_sphere<S: Real>(dim: usize, seed: u64) -> Vec<S> {
    sphere_point(dim, &mut ChaCha8Rng::seed_from_u64(seed))
}

impl<S: Real> Belief<S> {
    /// `M` particles uniform on the unit sphere with weights `1/M`.
    pub fn init(dim: usize, particles: usize, seed: u64) -> Result<Self, BeliefError> {
        if dim == 0 {
            return Err(BeliefError::ZeroDimension);
        }
        if particles < 2 {
            return Err(BeliefError::TooFewParticles(particles));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let omegas = (0..particles).map(|_| sphere_point(dim, &mut rng)).collect();
        Ok(Belief {
            dim,
            particles: omegas,
            weights: vec![S::one() / S::of_usize(particles); particles],
            generation: 0,
            rng,
        })
    }

    /// A belief over an explicit particle set. Weights are normalized.
    pub fn from_particles(omegas: Vec<Vec<S>>, weights: Vec<S>, seed: u64) -> Result<Self, BeliefError> {
        if omegas.len() < 2 {
            return Err(BeliefError::TooFewParticles(omegas.len()));
        }
        if weights.len() != omegas.len() {
            return Err(BeliefError::InvalidWeights(format!(
                "{} weights for {} particles",
                weights.len(),
                omegas.len()
            )));
        }
        let dim = omegas[0].len();
        if dim == 0 {
            return Err(BeliefError::ZeroDimension);
        }
        for (index, w) in omegas.iter().enumerate() {
            let n = norm(w).to_f64_lossy();
            if w.len() != dim || (n - 1.0).abs() > 1e-9 {
                return Err(BeliefError::NotUnit { index, norm: n });
            }
        }
        if weights.iter().any(|w| !w.is_finite() || *w < S::zero()) {
            return Err(BeliefError::InvalidWeights("weights must be finite and non-negative".into()));
        }
        let total: S = weights.iter().copied().sum();
        if total <= S::zero() {
            return Err(BeliefError::InvalidWeights("weights sum to zero".into()));
        }
        Ok(Belief {
            dim,
            particles: omegas,
            weights: weights.into_iter().map(|w| w / total).collect(),
            generation: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn omegas(&self) -> &[Vec<S>] {
        &self.particles
    }

    pub fn particles(&self) -> impl Iterator<Item = OmegaParticle<'_, S>> + '_ {
        self.particles
            .iter()
            .zip(&self.weights)
            .map(|(omega, &weight)| OmegaParticle { omega, weight })
    }

    pub(crate) fn with_generation(mut self, generation: u64) -> Self {
        self.generation = generation;
        self
    }

    pub fn effective_sample_size(&self) -> S {
        let sum: S = self.weights.iter().copied().sum();
        let sq: S = self.weights.iter().map(|&w| w * w).sum();
        sum * sum / sq
    }

    /// Conditions on one piece of evidence. `history` is the evidence already
    /// absorbed; it is only read if rejuvenation runs.
    pub fn bayes_update(
        &self,
        evidence: &Evidence<S>,
        history: &[Evidence<S>],
        obs: &ObservationModel<S>,
        filter: FilterConfig,
    ) -> Result<Self, BeliefError> {
        let w = evidence.weight;
        if !(w >= S::zero() && w <= S::one()) {
            return Err(BeliefError::InvalidEvidenceWeight(w.to_f64_lossy()));
        }
        let outcome = evidence
            .query
            .outcome_index(&evidence.response)?
            .ok_or(BeliefError::DegenerateEvidence)?;
        let mut weights = Vec::with_capacity(self.len());
        for (omega, &prior) in self.particles.iter().zip(&self.weights) {
            let factor = if w == S::zero() {
                S::one()
            } else {
                let p = obs.outcome_probabilities(&evidence.query, omega, &evidence.feature_scale)?[outcome];
                if w == S::one() {
                    p
                } else {
                    p.powf(w)
                }
            };
            weights.push(prior * factor);
        }
        let total: S = weights.iter().copied().sum();
        if !(total > S::zero()) || !total.is_finite() {
            return Err(BeliefError::DegenerateEvidence);
        }
        for v in &mut weights {
            *v = *v / total;
        }
        let mut next = Belief {
            dim: self.dim,
            particles: self.particles.clone(),
            weights,
            generation: self.generation + 1,
            rng: self.rng.clone(),
        };
        if filter.resample && next.effective_sample_size() < S::of(filter.ess_fraction * self.len() as f64) {
            next.resample_and_move(history, evidence, obs, filter.rw_scale)?;
        }
        Ok(next)
    }

    fn log_target(
        history: &[Evidence<S>],
        latest: &Evidence<S>,
        obs: &ObservationModel<S>,
        omega: &[S],
    ) -> Result<S, ContractError> {
        let mut total = latest.log_likelihood(obs, omega)?;
        for e in history {
            total = total + e.log_likelihood(obs, omega)?;
        }
        Ok(total)
    }

    fn resample_and_move(
        &mut self,
        history: &[Evidence<S>],
        latest: &Evidence<S>,
        obs: &ObservationModel<S>,
        rw_scale: f64,
    ) -> Result<(), ContractError> {
        let m = self.len();
        // Systematic resampling.
        let offset = self.rng.random::<f64>() / m as f64;
        let mut chosen = Vec::with_capacity(m);
        let mut cumulative = self.weights[0].to_f64_lossy();
        let mut j = 0;
        for k in 0..m {
            let u = offset + k as f64 / m as f64;
            while u >= cumulative && j + 1 < m {
                j += 1;
                cumulative += self.weights[j].to_f64_lossy();
            }
            chosen.push(j);
        }
        let mut particles: Vec<Vec<S>> = chosen.iter().map(|&i| self.particles[i].clone()).collect();
        // One random-walk Metropolis step per particle; the renormalized Gaussian
        // step is symmetric on the sphere, so the acceptance ratio is the target ratio.
        for omega in &mut particles {
            let current = Self::log_target(history, latest, obs, omega)?;
            let mut proposal: Vec<f64> = omega
                .iter()
                .map(|&x| x.to_f64_lossy() + rw_scale * self.rng.sample::<f64, _>(StandardNormal))
                .collect();
            let n = proposal.iter().map(|x| x * x).sum::<f64>().sqrt();
            let accept_draw = self.rng.random::<f64>();
            if n < 1e-12 {
                continue;
            }
            proposal.iter_mut().for_each(|x| *x /= n);
            let proposal: Vec<S> = proposal.into_iter().map(S::of).collect();
            let proposed = Self::log_target(history, latest, obs, &proposal)?;
            let log_ratio = (proposed - current).to_f64_lossy();
            if log_ratio >= 0.0 || accept_draw.ln() < log_ratio {
                *omega = proposal;
            }
        }
        self.particles = particles;
        self.weights = vec![S::one() / S::of_usize(m); m];
        Ok(())
    }

    /// Rebuilds the belief from the sphere prior by folding the whole log in order.
    /// Resampling, if enabled, may only run on the final entry.
    pub fn relearn(
        prior_seed: u64,
        log: &[Evidence<S>],
        obs: &ObservationModel<S>,
        dim: usize,
        particles: usize,
        filter: FilterConfig,
    ) -> Result<Self, BeliefError> {
        Self::relearn_from(&Belief::init(dim, particles, prior_seed)?, log, obs, filter)
    }

    /// [`Belief::relearn`] starting from an arbitrary prior.
    pub fn relearn_from(
        prior: &Belief<S>,
        log: &[Evidence<S>],
        obs: &ObservationModel<S>,
        filter: FilterConfig,
    ) -> Result<Self, BeliefError> {
        let mut belief = prior.clone();
        for (k, e) in log.iter().enumerate() {
            let f = FilterConfig { resample: filter.resample && k + 1 == log.len(), ..filter };
            belief = belief.bayes_update(e, &log[..k], obs, f)?;
        }
        Ok(belief)
    }

    /// Weighted mean renormalized to unit length; falls back to the heaviest
    /// particle (lowest index on ties) when the mean is numerically zero.
    pub fn mean_estimate(&self) -> Vec<S> {
        let mut mean = vec![S::zero(); self.dim];
        for (omega, &w) in self.particles.iter().zip(&self.weights) {
            for (m, &x) in mean.iter_mut().zip(omega) {
                *m = *m + w * x;
            }
        }
        let n = norm(&mean);
        if n < S::of(1e-12) {
            let mut best = 0;
            for (i, &w) in self.weights.iter().enumerate() {
                if w > self.weights[best] {
                    best = i;
                }
            }
            return self.particles[best].clone();
        }
        mean.into_iter().map(|x| x / n).collect()
    }

    /// Trace of the weighted particle covariance.
    pub fn spread(&self) -> S {
        let mut total = S::zero();
        for k in 0..self.dim {
            let mean: S = self.particles.iter().zip(&self.weights).map(|(o, &w)| w * o[k]).sum();
            let var: S = self
                .particles
                .iter()
                .zip(&self.weights)
                .map(|(o, &w)| w * (o[k] - mean) * (o[k] - mean))
                .sum();
            total = total + var;
        }
        total.max(S::zero())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Action, Cell, FeatureVector, Step, Trajectory};
    use crate::imdp::query::Candidate;

    fn cand(id: u32, phi: &[f64]) -> Candidate<f64> {
        Candidate {
            trajectory: Trajectory::from_steps_unchecked(vec![Step { state: Cell(id, 0), action: Action::Stay }]),
            features: FeatureVector(phi.to_vec()),
        }
    }

    fn comparison(a: &[f64], b: &[f64], choice: usize) -> Evidence<f64> {
        Evidence::new(
            Query::Comparison { items: vec![cand(0, a), cand(1, b)] },
            Response::Comparison { choice },
            vec![1.0; a.len()],
        )
    }

    fn no_resample() -> FilterConfig {
        FilterConfig::default().without_resampling()
    }

    #[test]
    fn one_dimensional_prior_is_plus_minus_one() {
        let b: Belief<f64> = Belief::init(1, 50, 4).unwrap();
        assert!(b.omegas().iter().all(|o| o[0] == 1.0 || o[0] == -1.0));
        assert!(b.weights().iter().all(|&w| w == 1.0 / 50.0));
    }

    #[test]
    fn prior_is_centered() {
        let b: Belief<f64> = Belief::init(3, 10_000, 17).unwrap();
        for k in 0..3 {
            let m: f64 = b.omegas().iter().map(|o| o[k]).sum::<f64>() / 10_000.0;
            assert!(m.abs() < 0.05, "coordinate {k} mean {m}");
        }
    }

    #[test]
    fn init_rejects_bad_sizes() {
        assert_eq!(Belief::<f64>::init(0, 10, 0), Err(BeliefError::ZeroDimension));
        assert_eq!(Belief::<f64>::init(2, 1, 0), Err(BeliefError::TooFewParticles(1)));
    }

    #[test]
    fn hand_bayes_normalization() {
        // Likelihoods 0.8 / 0.2 via a label query whose good-probability is 0.8 for ω=(1) and 0.2 for ω=(−1).
        let logit = (0.8_f64 / 0.2).ln();
        let obs = ObservationModel::new(1.0, 0.0, 0.25).unwrap();
        let b = Belief::from_particles(vec![vec![1.0], vec![-1.0]], vec![0.5, 0.5], 0).unwrap();
        let e = Evidence::new(
            Query::Label { candidate: cand(0, &[logit]) },
            Response::Label { value: crate::imdp::query::LabelValue::Good },
            vec![1.0],
        );
        let post = b.bayes_update(&e, &[], &obs, no_resample()).unwrap();
        assert!((post.weights()[0] - 0.8).abs() < 1e-15);
        assert!((post.weights()[1] - 0.2).abs() < 1e-15);
        assert_eq!(post.generation(), 1);
    }

    #[test]
    fn constant_likelihood_and_zero_weight_leave_weights_alone() {
        let obs = ObservationModel::with_beta(2.0).unwrap();
        let b = Belief::from_particles(
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.8]],
            vec![0.2, 0.3, 0.5],
            0,
        )
        .unwrap();
        let flat = comparison(&[0.3, 0.3], &[0.3, 0.3], 1);
        let post = b.bayes_update(&flat, &[], &obs, no_resample()).unwrap();
        for (a, b) in post.weights().iter().zip(b.weights()) {
            assert!((a - b).abs() < 1e-15);
        }
        let mut muted = comparison(&[1.0, 0.0], &[0.0, 0.0], 0);
        muted.weight = 0.0;
        let post = b.bayes_update(&muted, &[], &obs, no_resample()).unwrap();
        assert_eq!(post.weights(), b.weights());
    }

    #[test]
    fn degenerate_evidence_is_an_error() {
        let obs = ObservationModel::with_beta(1.0).unwrap();
        let b: Belief<f64> = Belief::init(2, 10, 0).unwrap();
        let e = comparison(&[1.0, 0.0], &[0.0, 0.0], 5);
        assert_eq!(b.bayes_update(&e, &[], &obs, no_resample()), Err(BeliefError::DegenerateEvidence));
        let mut bad = comparison(&[1.0, 0.0], &[0.0, 0.0], 0);
        bad.weight = 1.5;
        assert!(matches!(
            b.bayes_update(&bad, &[], &obs, no_resample()),
            Err(BeliefError::InvalidEvidenceWeight(_))
        ));
    }

    #[test]
    fn relearn_of_empty_log_is_prior() {
        let obs = ObservationModel::with_beta(1.0).unwrap();
        let prior: Belief<f64> = Belief::init(3, 20, 9).unwrap();
        let relearned = Belief::relearn(9, &[], &obs, 3, 20, FilterConfig::default()).unwrap();
        assert_eq!(prior, relearned);
    }

    #[test]
    fn three_evidence_fold_by_hand() {
        let obs = ObservationModel::with_beta(1.0).unwrap();
        let omegas = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let log = vec![
            comparison(&[1.0, 0.0], &[0.0, 0.0], 0),
            comparison(&[0.0, 1.0], &[0.0, 0.0], 0),
            comparison(&[0.5, 0.0], &[0.0, 0.5], 1),
        ];
        let mut b = Belief::from_particles(omegas, vec![0.5, 0.5], 0).unwrap();
        for (k, e) in log.iter().enumerate() {
            b = b.bayes_update(e, &log[..k], &obs, no_resample()).unwrap();
        }
        let s = |z: f64| 1.0 / (1.0 + (-z).exp());
        // Particle (1,0): σ(1)·σ(0)·σ(−0.5); particle (0,1): σ(0)·σ(1)·σ(0.5).
        let a = s(1.0) * s(0.0) * s(-0.5);
        let c = s(0.0) * s(1.0) * s(0.5);
        assert!((b.weights()[0] - a / (a + c)).abs() < 1e-15);
        assert!((b.weights()[1] - c / (a + c)).abs() < 1e-15);
    }

    #[test]
    fn mean_estimate_cases() {
        let single = Belief::from_particles(vec![vec![0.6, 0.8], vec![1.0, 0.0]], vec![1.0, 0.0], 0).unwrap();
        assert_eq!(single.mean_estimate(), vec![0.6, 0.8]);
        let antipodal = Belief::from_particles(vec![vec![0.6, 0.8], vec![-0.6, -0.8]], vec![0.5, 0.5], 0).unwrap();
        assert_eq!(antipodal.mean_estimate(), vec![0.6, 0.8]);
        let three = Belief::from_particles(
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]],
            vec![0.5, 0.3, 0.2],
            0,
        )
        .unwrap();
        // Weighted sum (0.3, 0.3) → (1/√2, 1/√2).
        let m = three.mean_estimate();
        assert!((m[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((m[1] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn spread_cases() {
        let same: Belief<f64> = Belief::from_particles(vec![vec![0.6, 0.8], vec![0.6, 0.8]], vec![0.3, 0.7], 0).unwrap();
        assert!(same.spread().abs() < 1e-15);
        let pm: Belief<f64> = Belief::from_particles(vec![vec![1.0], vec![-1.0]], vec![0.5, 0.5], 0).unwrap();
        assert!((pm.spread() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn resampling_keeps_unit_norm_and_simplex() {
        let obs = ObservationModel::with_beta(20.0).unwrap();
        let mut b: Belief<f64> = Belief::init(3, 200, 1).unwrap();
        let mut log = Vec::new();
        for k in 0..10 {
            let e = comparison(&[1.0, 0.0, -0.2 * f64::from(k)], &[0.0, 1.0, 0.0], 0);
            b = b.bayes_update(&e, &log, &obs, FilterConfig::default()).unwrap();
            log.push(e);
            let total: f64 = b.weights().iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
            for o in b.omegas() {
                assert!((norm(o) - 1.0).abs() < 1e-9);
            }
        }
        assert_eq!(b.generation(), 10);
    }

    #[test]
    fn f32_belief_updates() {
        let obs = ObservationModel::<f32>::with_beta(2.0).unwrap();
        let b: Belief<f32> = Belief::init(2, 64, 3).unwrap();
        let e = Evidence::new(
            Query::Comparison {
                items: vec![
                    Candidate { trajectory: cand(0, &[0.0]).trajectory, features: FeatureVector(vec![1.0, 0.0]) },
                    Candidate { trajectory: cand(1, &[0.0]).trajectory, features: FeatureVector(vec![0.0, 1.0]) },
                ],
            },
            Response::Comparison { choice: 0 },
            vec![1.0, 1.0],
        );
        let post = b.bayes_update(&e, &[], &obs, FilterConfig::default()).unwrap();
        let total: f32 = post.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-5);
        assert!(post.mean_estimate()[0] > post.mean_estimate()[1]);
    }
}
