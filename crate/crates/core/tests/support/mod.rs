//! Independent reference computations. Nothing here calls the likelihood,
//! belief or enumeration code under test.
#![allow(dead_code)]

use std::collections::BTreeSet;

use infomdp_core::domain::{Action, Cell, FeatureVector, GridWorld, Step, Trajectory};
use infomdp_core::imdp::{Candidate, LabelValue, Query, Relevance, Response};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every cell path of at most `max_states` states obtained by applying any
/// sequence of the five actions, keeping only sequences whose moves all change
/// the cell, and visiting `waypoints` as an ordered subsequence.
pub fn brute_force_paths(world: &GridWorld, start: Cell, waypoints: &[Cell], max_states: usize) -> BTreeSet<Vec<Cell>> {
    let mut out = BTreeSet::new();
    let moves = max_states.saturating_sub(1);
    for len in 0..=moves {
        let total = 5usize.pow(len as u32);
        'seq: for code in 0..total {
            let mut c = code;
            let mut path = vec![start];
            for _ in 0..len {
                let a = Action::ALL[c % 5];
                c /= 5;
                let here = *path.last().unwrap();
                let (dx, dy): (i64, i64) = match a {
                    Action::Up => (0, -1),
                    Action::Down => (0, 1),
                    Action::Left => (-1, 0),
                    Action::Right => (1, 0),
                    Action::Stay => (0, 0),
                };
                let nx = i64::from(here.0) + dx;
                let ny = i64::from(here.1) + dy;
                let free = nx >= 0
                    && ny >= 0
                    && (nx as u32) < world.width()
                    && (ny as u32) < world.height()
                    && !world.obstacles().contains(&Cell(nx as u32, ny as u32));
                if !free || (dx, dy) == (0, 0) {
                    continue 'seq;
                }
                path.push(Cell(nx as u32, ny as u32));
            }
            let mut k = 0;
            for &cell in &path {
                if k < waypoints.len() && waypoints[k] == cell {
                    k += 1;
                }
            }
            if k == waypoints.len() {
                out.insert(path);
            }
        }
    }
    out
}

fn sig(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn utility(omega: &[f64], phi: &[f64], u: &[f64]) -> f64 {
    (0..omega.len()).map(|k| omega[k] * phi[k] * u[k]).sum()
}

fn softmax_pick(beta: f64, omega: &[f64], opts: &[Candidate<f64>], pick: Option<usize>, u: &[f64]) -> f64 {
    let Some(j) = pick else { return 0.0 };
    let num = (beta * utility(omega, &opts[j].features.0, u)).exp();
    let den: f64 = opts.iter().map(|c| (beta * utility(omega, &c.features.0, u)).exp()).sum();
    num / den
}

/// Direct evaluation of the Boltzmann response probability.
pub fn reference_likelihood(
    beta: f64,
    r0: f64,
    tau: f64,
    query: &Query<f64>,
    response: &Response,
    omega: &[f64],
    u: &[f64],
) -> f64 {
    match (query, response) {
        (Query::Label { candidate }, Response::Label { value }) => {
            let p = sig(beta * (utility(omega, &candidate.features.0, u) - r0));
            if *value == LabelValue::Good { p } else { 1.0 - p }
        }
        (Query::FeatureLabel { feature_index, .. }, Response::FeatureLabel { value }) => {
            let p = sig(beta * (omega[*feature_index].abs() - tau));
            if *value == Relevance::Relevant { p } else { 1.0 - p }
        }
        (Query::Comparison { items }, Response::Comparison { choice }) => {
            softmax_pick(beta, omega, items, (*choice < items.len()).then_some(*choice), u)
        }
        (Query::Demonstration { support, .. }, Response::Demonstration { trajectory }) => {
            softmax_pick(beta, omega, support, support.iter().position(|c| &c.trajectory == trajectory), u)
        }
        (Query::Correction { candidates, .. }, Response::Correction { trajectory }) => {
            softmax_pick(beta, omega, candidates, candidates.iter().position(|c| &c.trajectory == trajectory), u)
        }
        _ => panic!("mismatched query/response"),
    }
}

/// Posterior weights on a fixed support: prior times the product of likelihoods, normalized once.
pub fn brute_force_posterior(
    beta: f64,
    r0: f64,
    tau: f64,
    omegas: &[Vec<f64>],
    prior: &[f64],
    log: &[(Query<f64>, Response, Vec<f64>)],
) -> Vec<f64> {
    let raw: Vec<f64> = omegas
        .iter()
        .zip(prior)
        .map(|(omega, &p)| {
            log.iter().fold(p, |acc, (q, r, u)| acc * reference_likelihood(beta, r0, tau, q, r, omega, u))
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// `n` evenly spaced unit vectors on the circle.
pub fn circle_grid(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            vec![t.cos(), t.sin()]
        })
        .collect()
}

fn synthetic(id: u32, phi: Vec<f64>) -> Candidate<f64> {
    Candidate {
        trajectory: Trajectory::from_steps_unchecked(vec![Step { state: Cell(id, id), action: Action::Stay }]),
        features: FeatureVector(phi),
    }
}

fn random_features(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// A random query of the given variant (0..5) over synthetic trajectories with
/// random features, and a uniformly chosen in-support response.
pub fn random_query(rng: &mut ChaCha8Rng, variant: usize, d: usize) -> (Query<f64>, Response) {
    let mut next_id = rng.random_range(0..1000u32) * 100;
    let mut fresh = |rng: &mut ChaCha8Rng| {
        next_id += 1;
        synthetic(next_id, random_features(rng, d))
    };
    let q = match variant {
        0 => Query::Label { candidate: fresh(rng) },
        1 => {
            let k = rng.random_range(2..5);
            Query::Comparison { items: (0..k).map(|_| fresh(rng)).collect() }
        }
        2 => {
            let k = rng.random_range(1..7);
            Query::Demonstration { start: Cell(0, 0), waypoints: vec![], support: (0..k).map(|_| fresh(rng)).collect() }
        }
        3 => Query::FeatureLabel { feature_index: rng.random_range(0..d), probe: fresh(rng) },
        _ => {
            let k = rng.random_range(1..6);
            Query::Correction { target: fresh(rng), candidates: (0..k).map(|_| fresh(rng)).collect() }
        }
    };
    let i = rng.random_range(0..q.support_size());
    let r = q.response_at(i).unwrap();
    (q, r)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Central finite-difference gradient of `f` at `x`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[k] += h;
            minus[k] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}
