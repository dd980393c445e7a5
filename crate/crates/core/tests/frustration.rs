use std::f64::consts::PI;

use ld_lattice::asymptotics::PhaseVector;
use ld_lattice::frustration::{
    brute_force_f, classify_optimality, evaluate_f, minimize_f, minimize_finite_layer, reduced_hessian, MultiStartOptions,
    Optimality,
};
use ld_lattice::lattice::ModelParams;
use proptest::prelude::*;

fn params() -> ModelParams {
    ModelParams::new(1.0, 2.0 * PI, 0.5, 0.0).unwrap()
}

fn pv(delta: &[f64]) -> PhaseVector {
    PhaseVector { delta: delta.to_vec() }
}

#[test]
fn evaluate_examples() {
    assert!((evaluate_f(&pv(&[0.0, -PI])) + 1.0).abs() < 1e-15);
    assert!((evaluate_f(&pv(&[0.0, PI, 2.0 * PI])) + 1.0).abs() < 1e-15);
    let t: f64 = 0.9;
    let hps: f64 = 0.6;
    let want = 0.5 * (t.cos() + (t + hps).cos());
    assert!((evaluate_f(&pv(&[0.0, t, -hps])) - want).abs() < 1e-15);
}

#[test]
fn commensurate_cases_reach_minus_one() {
    let prm = params();
    let q1 = prm.q1();
    for n in 1..=6 {
        for l in 0..4 {
            let s = l as f64 * q1;
            let class = classify_optimality(n, s, &prm);
            let got = minimize_f(n, prm.hp() * s, &Default::default());
            if class == Optimality::Frustrated {
                assert!(got.value > -1.0 + 1e-9, "N={n} s={l} q1");
            } else {
                assert!((got.value + 1.0).abs() < 1e-9, "N={n} s={l} q1: {}", got.value);
            }
        }
    }
    assert_eq!(classify_optimality(2, 0.0, &prm), Optimality::OptimalEven);
    assert_eq!(classify_optimality(1, q1, &prm), Optimality::OptimalOdd);
    assert_eq!(classify_optimality(2, q1 / 3.0, &prm), Optimality::Frustrated);
    assert_eq!(classify_optimality(3, 2.0 * q1, &prm), Optimality::Frustrated);
}

#[test]
fn odd_stack_minimizer_alternates() {
    let got = minimize_f(3, PI, &Default::default());
    let d = &got.delta.delta;
    for w in d.windows(2) {
        let diff = (w[1] - w[0]).rem_euclid(2.0 * PI);
        assert!((diff - PI).abs() < 1e-6);
    }
}

#[test]
fn multistart_agrees_with_coarse_scan() {
    for n in 1..=3 {
        for i in 0..6 {
            let hps = 2.0 * PI * i as f64 / 6.0 + 0.1;
            let g = 512;
            let scan = brute_force_f(n, hps, g).unwrap();
            let got = minimize_f(n, hps, &Default::default()).value;
            let tol = (n.max(2) - 1) as f64 * (2.0 * PI / g as f64).powi(2);
            assert!(got <= scan + 1e-12 && scan - got <= tol, "N={n}: {got} vs {scan}");
        }
    }
}

#[test]
fn hessian_examples() {
    let staggered = pv(&[0.0, PI, 2.0 * PI, 3.0 * PI, 4.0 * PI]);
    let h = reduced_hessian(&staggered).unwrap();
    assert!((h.matrix[(0, 0)] - 2.0).abs() < 1e-12 && (h.matrix[(0, 1)] + 1.0).abs() < 1e-12);
    assert!(h.min_eigenvalue > 0.0);
    let planes = pv(&[0.0, 0.0, 0.0, 0.0]);
    let h = reduced_hessian(&planes).unwrap();
    assert!((h.matrix[(0, 0)] + 2.0).abs() < 1e-12 && (h.matrix[(0, 1)] - 1.0).abs() < 1e-12);
    assert!(h.max_eigenvalue < 0.0);
    assert!(reduced_hessian(&pv(&[0.0, 1.0])).is_err());
}

#[test]
fn finite_layer_minimum_is_minus_one() {
    for n in 2..=8 {
        let got = minimize_finite_layer(n, &Default::default());
        assert!((got.value + 1.0).abs() < 1e-12, "N={n}");
    }
}

fn opts() -> MultiStartOptions {
    MultiStartOptions {
        starts: 16,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn objective_is_bounded(delta in prop::collection::vec(-10.0..10.0f64, 2..8)) {
        let mut d = delta;
        d[0] = 0.0;
        let f = evaluate_f(&pv(&d));
        prop_assert!((-1.0..=1.0).contains(&f));
    }

    #[test]
    fn minimum_is_periodic_in_the_shift(n in 1usize..6, hps in -7.0..7.0f64) {
        let a = minimize_f(n, hps, &opts()).value;
        let b = minimize_f(n, hps + 2.0 * PI, &opts()).value;
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!(a >= -1.0 - 1e-12);
    }

    #[test]
    fn reported_minimizers_satisfy_second_order_condition(n in 2usize..8, hps in 0.0..6.3f64) {
        let got = minimize_f(n, hps, &opts());
        let h = reduced_hessian(&got.delta).unwrap();
        prop_assert!(h.min_eigenvalue >= -1e-9, "min eig {}", h.min_eigenvalue);
        prop_assert!((evaluate_f(&got.delta) - got.value).abs() < 1e-12);
    }

    #[test]
    fn two_plane_closed_form(hps in -7.0..7.0f64) {
        let got = minimize_f(2, hps, &opts()).value;
        prop_assert!((got + (hps / 2.0).cos().abs()).abs() < 1e-9);
    }
}
