mod common;

use common::learning::{batch_least_squares, price_grid, q_terms};
use mgcoop::rl::{
    feature_dim, feature_map, q_value, rls_update, select_action_optimal, ActionVector, PriceBounds, RlsState,
    StateVector, ValueModel,
};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_state(rng: &mut impl Rng, n: usize, t: usize) -> StateVector {
    StateVector::new(
        (0..n).map(|_| (0..t).map(|_| rng.random::<f64>()).collect()).collect(),
        (0..n).map(|_| (0..t).map(|_| rng.random_range(0.0..200.0)).collect()).collect(),
    )
    .unwrap()
}

fn random_action(rng: &mut impl Rng, n: usize, t: usize, b: &PriceBounds) -> ActionVector {
    ActionVector { prices: (0..n).map(|_| (0..t).map(|_| rng.random_range(b.min..=b.max)).collect()).collect() }
}

fn random_model(rng: &mut impl Rng, n: usize) -> ValueModel {
    let theta = DVector::from_fn(feature_dim(n), |_, _| rng.random_range(-1.0..1.0));
    ValueModel::from_theta(n, theta).unwrap()
}

#[test]
fn rls_without_forgetting_reproduces_batch_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 2;
    let d = feature_dim(n);
    let b = PriceBounds::new(0.1, 0.3).unwrap();
    let truth = random_model(&mut rng, n);
    let mut model = ValueModel::zeros(n);
    let mut rls = RlsState::new(d, 0.0, 0.0, 1e10).unwrap();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for _ in 0..d + 10 {
        let s = random_state(&mut rng, n, 1);
        let a = random_action(&mut rng, n, 1, &b);
        let x = feature_map(&s, &a).unwrap();
        let y = truth.predict(&x) + rng.random_range(-0.5..0.5);
        rls_update(&mut model, &mut rls, &x, y).unwrap();
        xs.push(x);
        ys.push(y);
    }
    let ols = batch_least_squares(&xs, &ys);
    let err = (&model.theta - &ols).amax();
    assert!(err < 1e-6, "max |θ_rls − θ_ols| = {err:e}");
}

#[test]
fn q_value_matches_term_by_term_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let b = PriceBounds::new(0.05, 0.4).unwrap();
    for _ in 0..200 {
        let n = rng.random_range(1..=4);
        let t = rng.random_range(1..=4);
        let m = random_model(&mut rng, n);
        let s = random_state(&mut rng, n, t);
        let a = random_action(&mut rng, n, t, &b);
        let q = q_value(&m, &s, &a).unwrap();
        let oracle = q_terms(m.theta.as_slice(), &s.irradiance, &s.load_kw, &a.prices);
        assert!((q - oracle).abs() <= 1e-12 * oracle.abs().max(1.0), "{q} vs {oracle}");
    }
}

#[test]
fn optimal_action_matches_dense_grid_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let b = PriceBounds::new(0.1, 0.3).unwrap();
    let grid = price_grid(b.min, b.max, 101);
    for trial in 0..1000 {
        let m = random_model(&mut rng, 2);
        let s = random_state(&mut rng, 2, 1);
        let chosen = select_action_optimal(&m, &s, &b);
        let (mut best, mut best_q) = ((0.0, 0.0), f64::NEG_INFINITY);
        for &p0 in &grid {
            for &p1 in &grid {
                let q = q_terms(m.theta.as_slice(), &s.irradiance, &s.load_kw, &[vec![p0], vec![p1]]);
                if q > best_q {
                    best_q = q;
                    best = (p0, p1);
                }
            }
        }
        assert_eq!((chosen.prices[0][0], chosen.prices[1][0]), best, "trial {trial}");
    }
}

/// Episodes after a parameter switch until the relative parameter error
/// falls under 5%.
fn episodes_to_track_switch(phi: f64, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = PriceBounds::new(0.1, 0.3).unwrap();
    let before = random_model(&mut rng, 1);
    let after = random_model(&mut rng, 1);
    let mut model = ValueModel::zeros(1);
    let mut rls = RlsState::new(6, phi, 1e-5, 1e3).unwrap();
    let mut sample = |m: &ValueModel, rng: &mut ChaCha8Rng| {
        let s = random_state(rng, 1, 1);
        let a = random_action(rng, 1, 1, &b);
        let x = feature_map(&s, &a).unwrap();
        let y = m.predict(&x) + rng.random_range(-0.01..0.01);
        (x, y)
    };
    for _ in 0..300 {
        let (x, y) = sample(&before, &mut rng);
        rls_update(&mut model, &mut rls, &x, y).unwrap();
    }
    for k in 1..=2000 {
        let (x, y) = sample(&after, &mut rng);
        rls_update(&mut model, &mut rls, &x, y).unwrap();
        if (&model.theta - &after.theta).norm() < 0.05 * after.theta.norm() {
            return k;
        }
    }
    usize::MAX
}

#[test]
fn stronger_forgetting_tracks_a_switch_faster() {
    for seed in 10..15 {
        let fast = episodes_to_track_switch(0.1, seed);
        let slow = episodes_to_track_switch(0.01, seed);
        assert!(fast < slow, "seed {seed}: φ=0.1 took {fast}, φ=0.01 took {slow}");
    }
}

#[test]
fn scaling_targets_keeps_the_greedy_action() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let b = PriceBounds::new(0.1, 0.3).unwrap();
    let truth = random_model(&mut rng, 2);
    let mut plain = ValueModel::zeros(2);
    let mut scaled = ValueModel::zeros(2);
    let mut r1 = RlsState::new(11, 0.01, 1e-5, 1e3).unwrap();
    let mut r2 = r1.clone();
    for _ in 0..100 {
        let s = random_state(&mut rng, 2, 2);
        let a = random_action(&mut rng, 2, 2, &b);
        let x = feature_map(&s, &a).unwrap();
        let y = truth.predict(&x);
        rls_update(&mut plain, &mut r1, &x, y).unwrap();
        rls_update(&mut scaled, &mut r2, &x, 250.0 * y).unwrap();
    }
    for _ in 0..200 {
        let s = random_state(&mut rng, 2, 2);
        assert_eq!(select_action_optimal(&plain, &s, &b), select_action_optimal(&scaled, &s, &b));
    }
}

#[test]
fn delta_stays_symmetric_positive_definite() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let b = PriceBounds::new(0.1, 0.3).unwrap();
    let mut model = ValueModel::zeros(3);
    let mut rls = RlsState::new(16, 0.01, 1e-5, 1e3).unwrap();
    for _ in 0..500 {
        let s = random_state(&mut rng, 3, 4);
        let a = random_action(&mut rng, 3, 4, &b);
        let x = feature_map(&s, &a).unwrap();
        let step = rls_update(&mut model, &mut rls, &x, rng.random_range(-50.0..50.0)).unwrap();
        assert!(!step.reset);
        assert!(rls.asymmetry() <= 1e-10);
        assert!(rls.delta().symmetric_eigen().eigenvalues.min() > 0.0);
    }
}

fn vec2(n: usize, t: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, t), n)
}

proptest! {
    #[test]
    fn value_is_bilinear(
        theta in proptest::collection::vec(-5.0f64..5.0, 11),
        irr in vec2(2, 3), load in vec2(2, 3), p1 in vec2(2, 3), p2 in vec2(2, 3),
    ) {
        let m = ValueModel::from_theta(2, DVector::from_vec(theta)).unwrap();
        // the identities are algebraic, so states outside the physical box are fine
        let s = StateVector { irradiance: irr.clone(), load_kw: load.clone() };
        let a1 = ActionVector { prices: p1.clone() };
        let a2 = ActionVector { prices: p2.clone() };
        let sum = |u: &[Vec<f64>], v: &[Vec<f64>]| -> Vec<Vec<f64>> {
            u.iter().zip(v).map(|(x, y)| x.iter().zip(y).map(|(a, b)| a + b).collect()).collect()
        };
        let q = |s: &StateVector, a: &ActionVector| q_value(&m, s, a).unwrap();
        let zero_a = ActionVector::uniform(2, 3, 0.0);
        let lhs = q(&s, &ActionVector { prices: sum(&p1, &p2) }) + q(&s, &zero_a);
        let rhs = q(&s, &a1) + q(&s, &a2);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0));

        let s2 = StateVector { irradiance: p1.clone(), load_kw: p2.clone() };
        let ssum = StateVector { irradiance: sum(&irr, &p1), load_kw: sum(&load, &p2) };
        let zero_s = StateVector::zeros(2, 3);
        let lhs = q(&ssum, &a1) + q(&zero_s, &a1);
        let rhs = q(&s, &a1) + q(&s2, &a1);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0));
    }

    #[test]
    fn positive_rescaling_keeps_the_greedy_action(seed in 0u64..1000, c in 1e-3f64..1e3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = PriceBounds::new(0.1, 0.3).unwrap();
        let m = random_model(&mut rng, 2);
        let scaled = ValueModel::from_theta(2, &m.theta * c).unwrap();
        let s = random_state(&mut rng, 2, 3);
        prop_assert_eq!(select_action_optimal(&m, &s, &b), select_action_optimal(&scaled, &s, &b));
    }
}
