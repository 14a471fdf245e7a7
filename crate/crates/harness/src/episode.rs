//! One learner interacting with one human, from a config and a seed.

use infomdp_core::acquisition::{select_query, Strategy};
use infomdp_core::belief::sample_unit_sphere;
use infomdp_core::domain::enumerate_trajectories_within;
use infomdp_core::imdp::{legal_queries, Budgets};
use infomdp_core::seed::derive;
use infomdp_core::{
    Belief, Candidate, FeatureMap, GridWorld, InfoState, LabeledItem, ObservationModel, Query, Response,
    ScoredQuery, SimulatedHuman, TransitionConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, MAX_PER_START};
use crate::transcript::{state_digest, TranscriptLine};
use crate::HarnessError;

const TAG_POOL: u64 = 1;
const TAG_OMEGA: u64 = 2;
const TAG_HUMAN: u64 = 3;
const TAG_PRIOR: u64 = 4;
const TAG_STATE: u64 = 5;
const TAG_LEGAL: u64 = 6;
const TAG_STRATEGY: u64 = 7;

/// Draws `size` distinct trajectories. Each draw first picks a length cap
/// uniformly, so short and long paths are both common. Even draws are walks
/// from a random free cell; odd draws are walks that end at the goal.
pub fn build_pool(
    world: &GridWorld,
    features: &FeatureMap,
    size: usize,
    seed: u64,
) -> Result<Vec<Candidate>, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let free = world.free_cells();
    let mut pool: Vec<Candidate> = Vec::with_capacity(size);
    let mut attempts = 0usize;
    while pool.len() < size {
        attempts += 1;
        if attempts > size * MAX_PER_START {
            return Err(HarnessError::Setup(format!("could only draw {} distinct pool trajectories", pool.len())));
        }
        let to_goal = pool.len() % 2 == 1;
        let start = if to_goal { world.goal() } else { free[rng.random_range(0..free.len())] };
        let max_states = rng.random_range(1..=world.horizon());
        let walk_seed: u64 = rng.random();
        let Some(walk) = enumerate_trajectories_within(world, start, &[], max_states, 1, walk_seed)?.pop() else {
            continue;
        };
        let walk = if to_goal {
            // Effective moves are reversible, so a reversed walk from the goal is a walk into it.
            let mut cells = walk.cells();
            cells.reverse();
            infomdp_core::Trajectory::from_cells(world, &cells)?
        } else {
            walk
        };
        if pool.iter().any(|c| c.trajectory == walk) {
            continue;
        }
        pool.push(Candidate { features: features.features(world, &walk)?, trajectory: walk });
    }
    Ok(pool)
}

/// The learner side of a run: world, pool, policy and current meta-state.
#[derive(Debug, Clone)]
pub struct Episode {
    seed: u64,
    world: GridWorld,
    features: FeatureMap,
    pool: Vec<Candidate>,
    obs: ObservationModel,
    strategy: Strategy,
    transition: TransitionConfig,
    budgets: Budgets,
    omega_star: Vec<f64>,
    state: InfoState,
}

impl Episode {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self, HarnessError> {
        let world = cfg.world.build()?;
        let pool = build_pool(&world, &cfg.features, cfg.pool_size, derive(seed, TAG_POOL))?;
        let dataset = pool[..cfg.init_dataset_size].iter().cloned().map(LabeledItem::unlabeled).collect();
        let prior = Belief::init(cfg.dim(), cfg.particles, derive(seed, TAG_PRIOR))?;
        let state = InfoState::new(dataset, prior, derive(seed, TAG_STATE));
        Self::assemble(cfg, seed, world, pool, state)
    }

    /// Rebuilds an episode around a previously saved state.
    pub fn restore(cfg: &ExperimentConfig, seed: u64, state: InfoState) -> Result<Self, HarnessError> {
        let world = cfg.world.build()?;
        let pool = build_pool(&world, &cfg.features, cfg.pool_size, derive(seed, TAG_POOL))?;
        if state.dim() != cfg.dim() {
            return Err(HarnessError::Setup(format!(
                "saved state has dimension {}, config expects {}",
                state.dim(),
                cfg.dim()
            )));
        }
        Self::assemble(cfg, seed, world, pool, state)
    }

    fn assemble(
        cfg: &ExperimentConfig,
        seed: u64,
        world: GridWorld,
        pool: Vec<Candidate>,
        state: InfoState,
    ) -> Result<Self, HarnessError> {
        let mut strategy = cfg.strategy;
        strategy.seed = derive(derive(seed, TAG_STRATEGY), cfg.strategy.seed);
        Ok(Episode {
            seed,
            world,
            features: cfg.features.clone(),
            pool,
            obs: cfg.observation.build()?,
            strategy,
            transition: cfg.transition,
            budgets: cfg.budgets,
            omega_star: sample_unit_sphere(cfg.dim(), derive(seed, TAG_OMEGA)),
            state,
        })
    }

    /// The simulated human whose true weights are [`Episode::omega_star`].
    pub fn human(&self) -> Result<SimulatedHuman, HarnessError> {
        Ok(SimulatedHuman::new(self.omega_star.clone(), self.obs, derive(self.seed, TAG_HUMAN))?)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn world(&self) -> &GridWorld {
        &self.world
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    pub fn pool(&self) -> &[Candidate] {
        &self.pool
    }

    pub fn state(&self) -> &InfoState {
        &self.state
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    pub fn omega_star(&self) -> &[f64] {
        &self.omega_star
    }

    /// The candidate queries `A′` at the current state.
    pub fn candidates(&self) -> Result<Vec<Query>, HarnessError> {
        let seed = derive(derive(self.seed, TAG_LEGAL), self.state.step());
        Ok(legal_queries(&self.state, &self.world, &self.features, &self.pool, &self.budgets, seed)?)
    }

    /// The query the configured policy asks next.
    pub fn propose(&self) -> Result<ScoredQuery, HarnessError> {
        let candidates = self.candidates()?;
        Ok(select_query(&self.strategy, &self.state, &candidates, &self.obs)?)
    }

    /// Checks that every trajectory in `query` is feasible here and carries its true features.
    pub fn check_query(&self, query: &Query) -> Result<(), String> {
        for c in query.trajectories() {
            c.trajectory.validate(&self.world).map_err(|e| e.to_string())?;
            let phi = self.features.features(&self.world, &c.trajectory).map_err(|e| e.to_string())?;
            if phi != c.features {
                return Err("embedded features differ from the trajectory's features".into());
            }
        }
        Ok(())
    }

    /// Applies one answered query and returns its transcript line.
    pub fn apply(&mut self, query: &Query, response: &Response) -> Result<TranscriptLine, HarnessError> {
        let (next, record) = self.state.transition(query, response, &self.transition, &self.obs)?;
        let line = TranscriptLine {
            step: next.step(),
            query: query.clone(),
            response: response.clone(),
            alpha_draw: record.alpha_draw,
            dataset_delta: record.dataset_delta,
            belief_generation: record.belief_generation,
            state_digest: state_digest(&next),
        };
        self.state = next;
        Ok(line)
    }

    /// Cosine between the belief's mean estimate and the true weights.
    pub fn alignment(&self) -> f64 {
        cosine(&self.state.belief().mean_estimate(), &self.omega_star)
    }

    pub fn spread(&self) -> f64 {
        self.state.belief().spread()
    }

    /// True reward lost by acting on the learner's favourite pool trajectory.
    pub fn regret(&self) -> f64 {
        let truth = &self.omega_star;
        let estimate = self.state.belief().mean_estimate();
        let u = self.state.feature_weights();
        let true_reward = |c: &Candidate| dot(truth, c.features.as_slice());
        let learned = |c: &Candidate| {
            c.features.as_slice().iter().zip(u).zip(&estimate).map(|((x, s), w)| x * s * w).sum::<f64>()
        };
        let best = self.pool.iter().map(true_reward).fold(f64::NEG_INFINITY, f64::max);
        let mut pick = 0;
        for (i, c) in self.pool.iter().enumerate() {
            if learned(c) > learned(&self.pool[pick]) {
                pick = i;
            }
        }
        best - true_reward(&self.pool[pick])
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let n = dot(a, a).sqrt() * dot(b, b).sqrt();
    if n == 0.0 {
        return 0.0;
    }
    (dot(a, b) / n).clamp(-1.0, 1.0)
}
