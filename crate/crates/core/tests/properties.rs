//! Invariants checked over generated inputs.

mod support;

use infomdp_core::acquisition::{
    argmax_first, info_gain, particle_distributions, predictive_distribution, uncertainty_score,
};
use infomdp_core::belief::{Belief, Evidence, FilterConfig};
use infomdp_core::domain::{enumerate_trajectories, Cell, FeatureMap, FeatureVector, GridWorld};
use infomdp_core::humans::{ObservationModel, SimulatedHuman};
use infomdp_core::imdp::{Candidate, InfoState, LabeledItem, Query, Response, TransitionConfig};
use infomdp_core::scalar::entropy;
use proptest::prelude::*;
use support::*;

fn pair(a: Vec<f64>, b: Vec<f64>) -> Query<f64> {
    let (mut q, _) = random_query(&mut rng(0), 1, a.len());
    if let Query::Comparison { items } = &mut q {
        items.truncate(2);
        if items.len() < 2 {
            items.push(items[0].clone());
        }
        items[0].features = FeatureVector(a);
        items[1].features = FeatureVector(b);
    }
    q
}

#[test]
fn response_distributions_normalize_on_a_grid() {
    let obs = ObservationModel::new(4.0, 0.3, 0.2).unwrap();
    let mut r = rng(3);
    let queries: Vec<_> = (0..25).map(|k| random_query(&mut r, k % 5, 2).0).collect();
    for omega in circle_grid(100) {
        for q in &queries {
            let total: f64 = obs.response_distribution(q, &omega, &[1.0, 0.5]).unwrap().iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn enumerated_trajectories_are_valid_with_bounded_features() {
    let world = GridWorld::new(4, 4, [Cell(1, 1), Cell(2, 3)], Cell(3, 3), 7).unwrap();
    let fm = FeatureMap::default();
    for start in world.free_cells() {
        for t in enumerate_trajectories(&world, start, &[], 200, 1).unwrap() {
            t.validate(&world).unwrap();
            let phi: FeatureVector<f64> = fm.features(&world, &t).unwrap();
            assert!(phi.is_finite());
            assert!(phi.0.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }
}

proptest! {
    #[test]
    fn comparison_probability_is_monotone(delta in -2.0f64..2.0, bump in 0.01f64..1.0, beta in 0.1f64..20.0) {
        let obs = ObservationModel::with_beta(beta).unwrap();
        let omega = [1.0, 0.0];
        let lo = pair(vec![delta, 0.3], vec![0.0, -0.2]);
        let hi = pair(vec![delta + bump, 0.3], vec![0.0, -0.2]);
        let p_lo = obs.likelihood(&lo, &Response::Comparison { choice: 0 }, &omega, &[1.0, 1.0]).unwrap();
        let p_hi = obs.likelihood(&hi, &Response::Comparison { choice: 0 }, &omega, &[1.0, 1.0]).unwrap();
        prop_assert!(p_hi > p_lo || (p_lo == 1.0 && p_hi == 1.0));
    }

    #[test]
    fn feature_scale_trades_against_temperature(
        a in prop::collection::vec(-1.0f64..1.0, 3),
        b in prop::collection::vec(-1.0f64..1.0, 3),
        c in 0.1f64..10.0,
        beta in 0.1f64..5.0,
        seed in 0u64..1000,
    ) {
        let omega = infomdp_core::belief::sample_unit_sphere::<f64>(3, seed);
        let base = ObservationModel::with_beta(beta).unwrap();
        let scaled = ObservationModel::with_beta(beta / c).unwrap();
        let q = pair(a.clone(), b.clone());
        let qc = pair(a.iter().map(|x| x * c).collect(), b.iter().map(|x| x * c).collect());
        let p = base.outcome_probabilities(&q, &omega, &[1.0; 3]).unwrap();
        let pc = scaled.outcome_probabilities(&qc, &omega, &[1.0; 3]).unwrap();
        for (x, y) in p.iter().zip(&pc) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn likelihood_is_finite_for_huge_beta(variant in 0usize..5, seed in 0u64..500, beta in 0.0f64..1e6) {
        let obs = ObservationModel::with_beta(beta).unwrap();
        let (q, r) = random_query(&mut rng(seed), variant, 3);
        let omega = infomdp_core::belief::sample_unit_sphere::<f64>(3, seed);
        let p = obs.likelihood(&q, &r, &omega, &[1.0; 3]).unwrap();
        prop_assert!(p.is_finite() && (0.0..=1.0).contains(&p));
        let l = obs.log_likelihood(&q, q.outcome_index(&r).unwrap().unwrap(), &omega, &[1.0; 3]).unwrap();
        prop_assert!(!l.is_nan());
    }

    #[test]
    fn updates_stay_on_simplex_and_sphere(seed in 0u64..200, steps in 1usize..12, beta in 0.5f64..30.0) {
        let obs = ObservationModel::with_beta(beta).unwrap();
        let mut r = rng(seed);
        let mut b: Belief<f64> = Belief::init(3, 64, seed).unwrap();
        let mut log: Vec<Evidence<f64>> = Vec::new();
        for k in 0..steps {
            let (q, resp) = random_query(&mut r, k % 5, 3);
            let e = Evidence::new(q, resp, vec![1.0; 3]);
            match b.bayes_update(&e, &log, &obs, FilterConfig::default()) {
                Ok(next) => {
                    b = next;
                    log.push(e);
                }
                Err(_) => continue,
            }
            let total: f64 = b.weights().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert!(b.weights().iter().all(|&w| w >= 0.0));
            for o in b.omegas() {
                let n: f64 = o.iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!((n - 1.0).abs() < 1e-9);
            }
            prop_assert!(b.spread() >= 0.0);
        }
    }

    #[test]
    fn relearn_equals_incremental_fold(seed in 0u64..200, steps in 0usize..15) {
        let obs = ObservationModel::with_beta(2.0).unwrap();
        let filter = FilterConfig::default().without_resampling();
        let mut r = rng(seed);
        let log: Vec<Evidence<f64>> = (0..steps)
            .map(|k| {
                let (q, resp) = random_query(&mut r, k % 5, 2);
                Evidence::new(q, resp, vec![1.0, 0.5])
            })
            .collect();
        let mut folded: Belief<f64> = Belief::init(2, 40, seed).unwrap();
        for (k, e) in log.iter().enumerate() {
            folded = folded.bayes_update(e, &log[..k], &obs, filter).unwrap();
        }
        let batch = Belief::relearn(seed, &log, &obs, 2, 40, filter).unwrap();
        for (a, b) in folded.weights().iter().zip(batch.weights()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let mut shuffled = log.clone();
        shuffled.reverse();
        shuffled.rotate_left(steps / 2);
        let permuted = Belief::relearn(seed, &shuffled, &obs, 2, 40, filter).unwrap();
        for (a, b) in permuted.weights().iter().zip(batch.weights()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn information_gain_bounds_and_decomposition(seed in 0u64..500, variant in 0usize..5, particles in 2usize..60) {
        let obs = ObservationModel::new(3.0, 0.0, 0.3).unwrap();
        let mut r = rng(seed);
        let omegas: Vec<Vec<f64>> = (0..particles)
            .map(|k| infomdp_core::belief::sample_unit_sphere(3, seed * 1000 + k as u64))
            .collect();
        let weights: Vec<f64> = (0..particles).map(|k| 0.1 + ((seed + k as u64) % 7) as f64).collect();
        let b = Belief::from_particles(omegas, weights, 0).unwrap();
        let (q, _) = random_query(&mut r, variant, 3);
        let u = [1.0, 1.0, 0.5];
        let ig = info_gain(&b, &q, &obs, &u).unwrap();
        prop_assert!(ig >= 0.0);
        prop_assert!(ig <= (q.support_size() as f64).ln() + 1e-12);
        let rows = particle_distributions(&b, &q, &obs, &u).unwrap();
        let conditional: f64 = b.weights().iter().zip(&rows).map(|(w, row)| w * entropy(row)).sum();
        let decomposition = uncertainty_score(&b, &q, &obs, &u).unwrap() - conditional;
        prop_assert!((ig - decomposition).abs() < 1e-10);
        let total: f64 = predictive_distribution(&b, &q, &obs, &u).unwrap().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn selection_is_invariant_to_positive_scaling(scores in prop::collection::vec(-5.0f64..5.0, 1..30), c in 0.001f64..1000.0) {
        let scaled: Vec<f64> = scores.iter().map(|s| s * c).collect();
        prop_assert_eq!(argmax_first(&scores), argmax_first(&scaled));
    }

    #[test]
    fn tuning_weights_are_bounded_and_non_increasing(seed in 0u64..100, decay in 0.0f64..0.99) {
        let world = GridWorld::new(4, 4, [Cell(1, 1)], Cell(3, 3), 5).unwrap();
        let fm = FeatureMap::default();
        let pool: Vec<Candidate<f64>> = enumerate_trajectories(&world, Cell(0, 0), &[], 6, seed)
            .unwrap()
            .into_iter()
            .map(|t| Candidate { features: fm.features(&world, &t).unwrap(), trajectory: t })
            .collect();
        let obs = ObservationModel::with_beta(1.0).unwrap();
        let cfg = TransitionConfig { tuning_enabled: true, tuning_decay: decay, ..TransitionConfig::default() };
        let mut s = InfoState::new(Vec::<LabeledItem<f64>>::new(), Belief::init(4, 20, seed).unwrap(), seed);
        for c in &pool {
            let q = Query::Label { candidate: c.clone() };
            s = s.transition(&q, &Response::Label { value: infomdp_core::LabelValue::Good }, &cfg, &obs).unwrap().0;
        }
        let mut r = rng(seed);
        let mut previous: Vec<f64> = s.dataset().iter().map(|i| i.weight).collect();
        for _ in 0..20 {
            let a = rand::Rng::random_range(&mut r, 0..pool.len());
            let b = (a + 1 + rand::Rng::random_range(&mut r, 0..pool.len() - 1)) % pool.len();
            let q = Query::Comparison { items: vec![pool[a].clone(), pool[b].clone()] };
            s = s.transition(&q, &Response::Comparison { choice: 0 }, &cfg, &obs).unwrap().0;
            let now: Vec<f64> = s.dataset().iter().map(|i| i.weight).collect();
            for (p, n) in previous.iter().zip(&now) {
                prop_assert!((0.0..=1.0).contains(n));
                prop_assert!(n <= p);
            }
            previous = now;
        }
    }
}

#[test]
fn informative_evidence_contracts_the_belief() {
    // Median spread over 20 seeds at steps 0, 50, 100, 150 must strictly decrease.
    let obs = ObservationModel::with_beta(5.0).unwrap();
    let checkpoints = [0usize, 50, 100, 150];
    let mut spreads = vec![Vec::new(); checkpoints.len()];
    for seed in 0..20u64 {
        let truth = infomdp_core::belief::sample_unit_sphere::<f64>(3, 10_000 + seed);
        let mut human = SimulatedHuman::new(truth, obs, seed).unwrap();
        let mut b: Belief<f64> = Belief::init(3, 300, seed).unwrap();
        let mut log: Vec<Evidence<f64>> = Vec::new();
        let mut r = rng(seed);
        spreads[0].push(b.spread());
        for step in 1..=150 {
            let (q, _) = random_query(&mut r, 1, 3);
            let resp = human.respond(&q).unwrap();
            let e = Evidence::new(q, resp, vec![1.0; 3]);
            b = b.bayes_update(&e, &log, &obs, FilterConfig::default()).unwrap();
            log.push(e);
            if let Some(k) = checkpoints.iter().position(|&c| c == step) {
                spreads[k].push(b.spread());
            }
        }
    }
    let medians: Vec<f64> = spreads
        .into_iter()
        .map(|mut v| {
            v.sort_by(f64::total_cmp);
            (v[9] + v[10]) / 2.0
        })
        .collect();
    for w in medians.windows(2) {
        assert!(w[1] < w[0], "median spread not decreasing: {medians:?}");
    }
}
