//! Deterministic gridworld base MDP, trajectories and the feature map.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("grid must have positive width and height (got {width}x{height})")]
    EmptyGrid { width: u32, height: u32 },
    #[error("horizon must be at least 2 (got {0})")]
    HorizonTooShort(usize),
    #[error("cell ({0}, {1}) is out of bounds")]
    OutOfBounds(u32, u32),
    #[error("cell ({0}, {1}) is an obstacle")]
    Obstacle(u32, u32),
    #[error("goal cell ({0}, {1}) is not a free cell")]
    InvalidGoal(u32, u32),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("feature map has no features")]
    NoFeatures,
}

/// A grid cell `(x, y)`; serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell(pub u32, pub u32);

impl Cell {
    pub fn x(self) -> u32 {
        self.0
    }

    pub fn y(self) -> u32 {
        self.1
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        self.0.abs_diff(other.0) + self.1.abs_diff(other.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl Action {
    pub const ALL: [Action; 5] = [Action::Up, Action::Down, Action::Left, Action::Right, Action::Stay];
    pub const MOVES: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    fn delta(self) -> (i64, i64) {
        match self {
            Action::Up => (0, -1),
            Action::Down => (0, 1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
            Action::Stay => (0, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridWorld {
    width: u32,
    height: u32,
    obstacles: BTreeSet<Cell>,
    goal: Cell,
    horizon: usize,
}

impl GridWorld {
    pub fn new(
        width: u32,
        height: u32,
        obstacles: impl IntoIterator<Item = Cell>,
        goal: Cell,
        horizon: usize,
    ) -> Result<Self, DomainError> {
        if width == 0 || height == 0 {
            return Err(DomainError::EmptyGrid { width, height });
        }
        if horizon < 2 {
            return Err(DomainError::HorizonTooShort(horizon));
        }
        let obstacles: BTreeSet<Cell> = obstacles.into_iter().collect();
        if let Some(c) = obstacles.iter().find(|c| c.0 >= width || c.1 >= height) {
            return Err(DomainError::OutOfBounds(c.0, c.1));
        }
        let world = GridWorld { width, height, obstacles, goal, horizon };
        if !world.is_free(goal) {
            return Err(DomainError::InvalidGoal(goal.0, goal.1));
        }
        Ok(world)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn obstacles(&self) -> &BTreeSet<Cell> {
        &self.obstacles
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.0 < self.width && c.1 < self.height
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.obstacles.contains(&c)
    }

    pub fn check_cell(&self, c: Cell) -> Result<(), DomainError> {
        if !self.in_bounds(c) {
            Err(DomainError::OutOfBounds(c.0, c.1))
        } else if self.obstacles.contains(&c) {
            Err(DomainError::Obstacle(c.0, c.1))
        } else {
            Ok(())
        }
    }

    /// Free cells in row-major order.
    pub fn free_cells(&self) -> Vec<Cell> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| Cell(x, y)))
            .filter(|&c| !self.obstacles.contains(&c))
            .collect()
    }

    /// Deterministic successor. Moves off the grid or into an obstacle leave the state unchanged.
    pub fn step(&self, state: Cell, action: Action) -> Result<Cell, DomainError> {
        self.check_cell(state)?;
        let (dx, dy) = action.delta();
        let nx = i64::from(state.0) + dx;
        let ny = i64::from(state.1) + dy;
        if nx < 0 || ny < 0 {
            return Ok(state);
        }
        let next = Cell(nx as u32, ny as u32);
        Ok(if self.is_free(next) { next } else { state })
    }

    fn adjacent_to_obstacle(&self, c: Cell) -> bool {
        Action::MOVES.iter().any(|a| {
            let (dx, dy) = a.delta();
            let nx = i64::from(c.0) + dx;
            let ny = i64::from(c.1) + dy;
            nx >= 0 && ny >= 0 && self.obstacles.contains(&Cell(nx as u32, ny as u32))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Step {
    pub state: Cell,
    pub action: Action,
}

/// A finite `(state, action)` sequence. The final action is always `stay`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory {
    steps: Vec<Step>,
}

impl Trajectory {
    /// Builds a trajectory from a cell path, inferring the actions between consecutive cells.
    pub fn from_cells(world: &GridWorld, cells: &[Cell]) -> Result<Self, DomainError> {
        if cells.is_empty() {
            return Err(DomainError::InvalidTrajectory("empty path".into()));
        }
        let mut steps = Vec::with_capacity(cells.len());
        for w in cells.windows(2) {
            let action = Action::ALL
                .iter()
                .copied()
                .find(|&a| world.step(w[0], a).ok() == Some(w[1]))
                .ok_or_else(|| {
                    DomainError::InvalidTrajectory(format!("no action moves {:?} to {:?}", w[0], w[1]))
                })?;
            steps.push(Step { state: w[0], action });
        }
        steps.push(Step { state: *cells.last().expect("nonempty"), action: Action::Stay });
        let traj = Trajectory { steps };
        traj.validate(world)?;
        Ok(traj)
    }

    /// Wraps raw steps without validation; call [`Trajectory::validate`] before trusting it.
    pub fn from_steps_unchecked(steps: Vec<Step>) -> Self {
        Trajectory { steps }
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn start(&self) -> Cell {
        self.steps[0].state
    }

    pub fn end(&self) -> Cell {
        self.steps[self.steps.len() - 1].state
    }

    pub fn cells(&self) -> Vec<Cell> {
        self.steps.iter().map(|s| s.state).collect()
    }

    pub fn validate(&self, world: &GridWorld) -> Result<(), DomainError> {
        let bad = |m: String| Err(DomainError::InvalidTrajectory(m));
        if self.steps.is_empty() {
            return bad("trajectory has no states".into());
        }
        if self.steps.len() > world.horizon() {
            return bad(format!("length {} exceeds horizon {}", self.steps.len(), world.horizon()));
        }
        for s in &self.steps {
            world.check_cell(s.state)?;
        }
        for (i, w) in self.steps.windows(2).enumerate() {
            if world.step(w[0].state, w[0].action)? != w[1].state {
                return bad(format!("step {i} is inconsistent with the grid dynamics"));
            }
        }
        if self.steps[self.steps.len() - 1].action != Action::Stay {
            return bad("final action must be stay".into());
        }
        Ok(())
    }
}

/// One component of the feature map. Every component lies in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Negated final Manhattan distance to goal, normalized by the grid diameter.
    GoalDistance,
    /// Negated path length `T / (H - 1)`.
    PathLength,
    /// Negated count of states adjacent to an obstacle, normalized by `H`.
    ObstacleProximity,
    /// 1 if the trajectory ends on the goal, else 0.
    GoalReached,
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::GoalDistance => "goal_distance",
            FeatureKind::PathLength => "path_length",
            FeatureKind::ObstacleProximity => "obstacle_proximity",
            FeatureKind::GoalReached => "goal_reached",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureMap {
    kinds: Vec<FeatureKind>,
}

impl Default for FeatureMap {
    fn default() -> Self {
        FeatureMap {
            kinds: vec![
                FeatureKind::GoalDistance,
                FeatureKind::PathLength,
                FeatureKind::ObstacleProximity,
                FeatureKind::GoalReached,
            ],
        }
    }
}

impl FeatureMap {
    pub fn new(kinds: Vec<FeatureKind>) -> Result<Self, DomainError> {
        if kinds.is_empty() {
            return Err(DomainError::NoFeatures);
        }
        Ok(FeatureMap { kinds })
    }

    pub fn dim(&self) -> usize {
        self.kinds.len()
    }

    pub fn kinds(&self) -> &[FeatureKind] {
        &self.kinds
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.kinds.iter().map(|k| k.name()).collect()
    }

    pub fn features<S: Real>(
        &self,
        world: &GridWorld,
        traj: &Trajectory,
    ) -> Result<FeatureVector<S>, DomainError> {
        traj.validate(world)?;
        let horizon = world.horizon();
        let path_len = traj.len() - 1;
        let diameter = (world.width() - 1) + (world.height() - 1);
        let values = self
            .kinds
            .iter()
            .map(|kind| match kind {
                FeatureKind::GoalDistance => {
                    if diameter == 0 {
                        0.0
                    } else {
                        -f64::from(traj.end().manhattan(world.goal())) / f64::from(diameter)
                    }
                }
                FeatureKind::PathLength => -(path_len as f64) / ((horizon - 1) as f64),
                FeatureKind::ObstacleProximity => {
                    let near = traj
                        .steps()
                        .iter()
                        .filter(|s| world.adjacent_to_obstacle(s.state))
                        .count();
                    -(near as f64) / (horizon as f64)
                }
                FeatureKind::GoalReached => {
                    if traj.end() == world.goal() {
                        1.0
                    } else {
                        0.0
                    }
                }
            })
            .map(|v| if v == 0.0 { 0.0 } else { v })
            .map(S::of)
            .collect();
        Ok(FeatureVector(values))
    }
}

/// `Φ(ξ)`: a fixed-dimension vector of finite components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound = "S: Real")]
pub struct FeatureVector<S>(pub Vec<S>);

impl<S: Real> FeatureVector<S> {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Element-wise product with a relevance vector of the same dimension.
    pub fn scaled(&self, scale: &[S]) -> Vec<S> {
        self.0.iter().zip(scale).map(|(&x, &u)| x * u).collect()
    }
}

/// All trajectories of at most `world.horizon()` states from `start` that visit
/// `waypoints` in order. See [`enumerate_trajectories_within`].
pub fn enumerate_trajectories(
    world: &GridWorld,
    start: Cell,
    waypoints: &[Cell],
    max_count: usize,
    seed: u64,
) -> Result<Vec<Trajectory>, DomainError> {
    enumerate_trajectories_within(world, start, waypoints, world.horizon(), max_count, seed)
}

/// Enumerates walks of at most `max_states` states (capped by the world horizon).
///
/// Intermediate actions are restricted to moves that change the cell, so each
/// returned trajectory is identified by its cell sequence. When more than
/// `max_count` trajectories qualify, a uniform sample of `max_count` of them is
/// drawn by reservoir sampling and returned in enumeration order.
pub fn enumerate_trajectories_within(
    world: &GridWorld,
    start: Cell,
    waypoints: &[Cell],
    max_states: usize,
    max_count: usize,
    seed: u64,
) -> Result<Vec<Trajectory>, DomainError> {
    world.check_cell(start)?;
    for &w in waypoints {
        world.check_cell(w)?;
    }
    let max_states = max_states.min(world.horizon());
    if max_count == 0 || max_states == 0 {
        return Ok(Vec::new());
    }
    let mut search = Search {
        world,
        waypoints,
        max_states,
        max_count,
        rng: ChaCha8Rng::seed_from_u64(seed),
        seen: 0,
        reservoir: Vec::new(),
        path: vec![Step { state: start, action: Action::Stay }],
    };
    let matched = usize::from(waypoints.first() == Some(&start));
    search.visit(matched);
    let mut kept = search.reservoir;
    kept.sort_by_key(|(idx, _)| *idx);
    Ok(kept.into_iter().map(|(_, t)| t).collect())
}

struct Search<'a> {
    world: &'a GridWorld,
    waypoints: &'a [Cell],
    max_states: usize,
    max_count: usize,
    rng: ChaCha8Rng,
    seen: usize,
    reservoir: Vec<(usize, Trajectory)>,
    path: Vec<Step>,
}

impl Search<'_> {
    fn remaining_distance(&self, matched: usize) -> usize {
        let mut at = self.path[self.path.len() - 1].state;
        let mut total = 0usize;
        for &w in &self.waypoints[matched..] {
            total += at.manhattan(w) as usize;
            at = w;
        }
        total
    }

    fn visit(&mut self, matched: usize) {
        let remaining_moves = self.max_states - self.path.len();
        if self.remaining_distance(matched) > remaining_moves {
            return;
        }
        if matched == self.waypoints.len() {
            self.offer();
        }
        if remaining_moves == 0 {
            return;
        }
        let here = self.path[self.path.len() - 1].state;
        for action in Action::MOVES {
            let next = self.world.step(here, action).expect("path cells are free");
            if next == here {
                continue;
            }
            let last = self.path.len() - 1;
            self.path[last].action = action;
            self.path.push(Step { state: next, action: Action::Stay });
            let hit = matched < self.waypoints.len() && self.waypoints[matched] == next;
            self.visit(matched + usize::from(hit));
            self.path.pop();
            self.path[last].action = Action::Stay;
        }
    }

    fn offer(&mut self) {
        let idx = self.seen;
        self.seen += 1;
        if self.reservoir.len() < self.max_count {
            self.reservoir.push((idx, Trajectory { steps: self.path.clone() }));
        } else {
            let j = self.rng.random_range(0..self.seen);
            if j < self.max_count {
                self.reservoir[j] = (idx, Trajectory { steps: self.path.clone() });
            }
        }
    }
}
