//! Candidate query generation respecting each query type's membership constraint.

use itertools::Itertools;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::query::{Candidate, Query};
use super::InfoState;
use crate::domain::{enumerate_trajectories, DomainError, FeatureMap, GridWorld, Trajectory};
use crate::scalar::Real;

/// Per-variant caps on the number of generated candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    pub label: usize,
    pub comparison: usize,
    /// Items per comparison (`K`).
    pub comparison_k: usize,
    pub demonstration: usize,
    /// Trajectories enumerated per demonstration query.
    pub demonstration_support: usize,
    /// Waypoints drawn per demonstration query.
    pub demonstration_waypoints: usize,
    pub feature_label: usize,
    pub correction: usize,
    pub correction_candidates: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            label: 0,
            comparison: 0,
            comparison_k: 2,
            demonstration: 0,
            demonstration_support: 64,
            demonstration_waypoints: 0,
            feature_label: 0,
            correction: 0,
            correction_candidates: 32,
        }
    }
}

impl Budgets {
    pub fn comparison_only(count: usize) -> Self {
        Budgets { comparison: count, ..Budgets::default() }
    }

    pub fn total(&self) -> usize {
        self.label + self.comparison + self.demonstration + self.feature_label + self.correction
    }
}

/// Indices of a seeded uniform sample of `k` out of `n`, in ascending order.
fn sample_sorted(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    let mut picked = index::sample(rng, n, k).into_vec();
    picked.sort_unstable();
    picked
}

fn candidates_of<S: Real>(
    world: &GridWorld,
    features: &FeatureMap,
    trajectories: Vec<Trajectory>,
) -> Result<Vec<Candidate<S>>, DomainError> {
    trajectories
        .into_iter()
        .map(|t| Ok(Candidate { features: features.features(world, &t)?, trajectory: t }))
        .collect()
}

/// Generates the action set `A′` available in `state`.
///
/// Variants are emitted in the order label, comparison, demonstration,
/// feature label, correction. Variants needing dataset members contribute
/// nothing while `D` is empty; demonstration and correction queries whose
/// support comes out empty are dropped.
pub fn legal_queries<S: Real>(
    state: &InfoState<S>,
    world: &GridWorld,
    features: &FeatureMap,
    pool: &[Candidate<S>],
    budgets: &Budgets,
    seed: u64,
) -> Result<Vec<Query<S>>, DomainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dataset = state.dataset();
    let mut out = Vec::new();

    let unlabeled: Vec<&Candidate<S>> = pool.iter().filter(|c| !state.contains(&c.trajectory)).collect();
    for i in sample_sorted(unlabeled.len(), budgets.label, &mut rng) {
        out.push(Query::Label { candidate: unlabeled[i].clone() });
    }

    if budgets.comparison > 0 && budgets.comparison_k >= 2 && dataset.len() >= budgets.comparison_k {
        let tuples: Vec<Vec<usize>> = (0..dataset.len()).combinations(budgets.comparison_k).collect();
        for i in sample_sorted(tuples.len(), budgets.comparison, &mut rng) {
            let items = tuples[i].iter().map(|&j| dataset[j].candidate()).collect();
            out.push(Query::Comparison { items });
        }
    }

    if budgets.demonstration > 0 {
        let free = world.free_cells();
        for i in sample_sorted(free.len(), budgets.demonstration, &mut rng) {
            let waypoints: Vec<_> = (0..budgets.demonstration_waypoints)
                .map(|_| free[rng.random_range(0..free.len())])
                .collect();
            let support_seed: u64 = rng.random();
            let support = enumerate_trajectories(
                world,
                free[i],
                &waypoints,
                budgets.demonstration_support,
                support_seed,
            )?;
            if !support.is_empty() {
                out.push(Query::Demonstration {
                    start: free[i],
                    waypoints,
                    support: candidates_of(world, features, support)?,
                });
            }
        }
    }

    if !dataset.is_empty() {
        let d = features.dim();
        let pairs = d * dataset.len();
        for p in sample_sorted(pairs, budgets.feature_label, &mut rng) {
            out.push(Query::FeatureLabel { feature_index: p % d, probe: dataset[p / d].candidate() });
        }
    }

    if budgets.correction > 0 {
        let mut targets: Vec<usize> = Vec::new();
        for (i, item) in dataset.iter().enumerate() {
            if !targets.iter().any(|&j| dataset[j].trajectory == item.trajectory) {
                targets.push(i);
            }
        }
        for t in sample_sorted(targets.len(), budgets.correction, &mut rng) {
            let target = &dataset[targets[t]];
            let support_seed: u64 = rng.random();
            // Over-enumerate so that filtering out dataset members still leaves enough.
            let pool_size = budgets.correction_candidates.saturating_add(dataset.len());
            let mut options = enumerate_trajectories(world, target.trajectory.start(), &[], pool_size, support_seed)?;
            options.retain(|c| !state.contains(c));
            options.truncate(budgets.correction_candidates);
            if !options.is_empty() {
                out.push(Query::Correction {
                    target: target.candidate(),
                    candidates: candidates_of(world, features, options)?,
                });
            }
        }
    }

    Ok(out)
}
