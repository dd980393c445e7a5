mod common;

use std::f64::consts::PI;

use common::max_abs_diff;
use ld_lattice::asymptotics::{
    c0_closed_form, c1_closed_form, first_order, first_order_configuration, manifold_point, predicted_fields,
    r2_coefficient, solve_difference_equation, velocity_constants, PhaseVector,
};
use ld_lattice::energy::energy;
use ld_lattice::fields::observables;
use ld_lattice::frustration::evaluate_f;
use ld_lattice::lattice::{Model, StackKind};
use nalgebra::{DMatrix, DVector};

fn cases() -> Vec<(Model, PhaseVector)> {
    let mut out = Vec::new();
    for (n, s, kind, interior) in [
        (1, 0.0, StackKind::Biperiodic, vec![]),
        (2, 0.0, StackKind::Biperiodic, vec![PI]),
        (2, 0.21, StackKind::Biperiodic, vec![1.1]),
        (3, 0.5, StackKind::Biperiodic, vec![0.4, 2.5]),
        (3, 0.0, StackKind::FiniteLayer, vec![PI, 0.3]),
        (2, 0.0, StackKind::FiniteLayer, vec![0.8]),
    ] {
        let model = common::model(n, s, kind, 0.0, 32, 4);
        let delta = PhaseVector::from_interior(&model, &interior).unwrap();
        out.push((model, delta));
    }
    out
}

/// Gap phase oracle, extended by the bi-periodic shift.
fn gap_phase(model: &Model, delta: &PhaseVector, n: i64) -> Option<f64> {
    let big = model.n() as i64;
    match model.kind() {
        StackKind::FiniteLayer => (1..=big).contains(&n).then(|| delta.delta[(n - 1) as usize]),
        StackKind::Biperiodic => {
            let mut m = n;
            let mut shift = 0.0;
            while m > big {
                m -= big;
                shift -= model.params.hp() * model.geom.s;
            }
            while m < 1 {
                m += big;
                shift += model.params.hp() * model.geom.s;
            }
            Some(delta.delta[(m - 1) as usize] + shift)
        }
    }
}

fn trig(model: &Model, delta: &PhaseVector, n: i64, x: f64, sine: bool) -> f64 {
    gap_phase(model, delta, n).map_or(0.0, |d| {
        let t = d + model.params.hp() * x;
        if sine {
            t.sin()
        } else {
            t.cos()
        }
    })
}

#[test]
fn modulus_velocity_and_phase_match_closed_forms() {
    for (model, delta) in cases() {
        let fo = first_order(&model, &delta).unwrap();
        let (k2, a, h, p) = (1.0, model.params.hp(), model.params.field, model.params.p);
        let beta = k2 / (2.0 * (a * a + 2.0 * k2));
        let n_top = model.n() as i64;
        let finite = model.kind() == StackKind::FiniteLayer;
        for (slot, &plane) in fo.planes.iter().enumerate() {
            let pl = plane as i64;
            let edge = finite && (pl == 0 || pl == n_top);
            let u: Vec<f64> = model
                .x_grid()
                .iter()
                .map(|&x| {
                    let c = trig(&model, &delta, pl, x, false) + trig(&model, &delta, pl + 1, x, false);
                    if edge {
                        -0.25 + beta * c
                    } else {
                        -0.5 + beta * c
                    }
                })
                .collect();
            assert!(max_abs_diff(&u, &fo.u1[slot]) < 1e-12, "{:?} plane {plane}", model.kind());
            let v: Vec<f64> = model
                .x_grid()
                .iter()
                .map(|&x| k2 / (2.0 * a) * (trig(&model, &delta, pl + 1, x, false) - trig(&model, &delta, pl, x, false)))
                .collect();
            assert!(max_abs_diff(&v, &fo.v1[slot]) < 1e-12);
        }
        for gap in 1..=n_top {
            let phi: Vec<f64> = model
                .x_grid()
                .iter()
                .map(|&x| {
                    k2 / (2.0 * h * h * p * p)
                        * (trig(&model, &delta, gap + 1, x, true) - (2.0 + p * p) * trig(&model, &delta, gap, x, true)
                            + trig(&model, &delta, gap - 1, x, true))
                })
                .collect();
            let got = &fo.varphi1[gap as usize - 1];
            assert!(max_abs_diff(&phi, got) < 1e-11, "{:?} gap {gap}", model.kind());
        }
        assert!(fo.c.iter().chain(&fo.d).all(|v| v.abs() < 1e-14));
    }
}

#[test]
fn difference_equation_matches_dense_solve() {
    let p = 0.7;
    for kind in [StackKind::Biperiodic, StackKind::FiniteLayer] {
        for n in 1..=6 {
            let g: Vec<f64> = (0..n).map(|i| (1.3 * i as f64 + 0.2).sin()).collect();
            let mut m = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                m[(i, i)] += -(2.0 + p * p);
                if i + 1 < n || kind == StackKind::Biperiodic {
                    m[(i, (i + 1) % n)] += 1.0;
                }
                if i > 0 || kind == StackKind::Biperiodic {
                    m[(i, (i + n - 1) % n)] += 1.0;
                }
            }
            let want = m.lu().solve(&DVector::from_vec(g.clone())).unwrap();
            let got = solve_difference_equation(p, &g, kind);
            assert!(max_abs_diff(want.as_slice(), &got) < 1e-12, "{kind:?} N={n}");
            let c = velocity_constants(p, &got, kind);
            assert_eq!(c.len(), if kind == StackKind::Biperiodic { n } else { n + 1 });
        }
    }
}

#[test]
fn second_order_quadrature_matches_closed_constants() {
    for (model, delta) in cases() {
        if model.kind() != StackKind::Biperiodic {
            continue;
        }
        let q = r2_coefficient(&model, &delta).unwrap();
        let area = model.geom.area(&model.params);
        let prm = &model.params;
        let want = c0_closed_form(prm.kappa, prm.hp(), prm.p) + c1_closed_form(prm.kappa, prm.hp()) * evaluate_f(&delta);
        assert!((q.total / area - want).abs() < 1e-12, "{} vs {want}", q.total / area);
        // stationarity of the first-order correction: quadratic part is half the linear part
        assert!((q.quadratic + 0.5 * q.linear).abs() < 1e-12);
    }
}

#[test]
fn first_order_configuration_reproduces_predicted_fields() {
    for (model, delta) in cases() {
        let r = 1e-3;
        let m = model.with_r(r);
        let cfg = first_order_configuration(&m, &delta, r).unwrap();
        let got = observables(&m, &cfg);
        let want = predicted_fields(&m, &delta, r).unwrap();
        assert!(max_abs_diff(&got.h.data, &want.h.data) < 1e-12, "{:?}", model.kind());
        for i in 0..want.f.len() {
            assert!(max_abs_diff(&got.f[i], &want.f[i]) < 1e-12);
            assert!(max_abs_diff(&got.v[i], &want.v[i]) < 1e-12);
            // the current carries f^2, which differs at second order
            assert!(max_abs_diff(&got.jx[i], &want.jx[i]) < 10.0 * r * r);
        }
        for i in 0..want.phi.len() {
            assert!(max_abs_diff(&got.phi[i], &want.phi[i]) < 1e-12, "{:?} gap {}", model.kind(), i + 1);
        }
    }
}

#[test]
fn energy_along_first_order_path_has_expected_expansion() {
    for (model, delta) in cases() {
        let area = model.geom.area(&model.params);
        let q = r2_coefficient(&model, &delta).unwrap().total / area;
        let zeroth = energy(&model.with_r(1.0), &manifold_point(&model, &delta).unwrap()).total / area;
        let coef = |r: f64| {
            let m = model.with_r(r);
            let e = energy(&m, &first_order_configuration(&m, &delta, r).unwrap()).total / area;
            (e - r * zeroth) / (r * r)
        };
        let (c1, c2) = (coef(2e-3), coef(1e-3));
        // remainder is O(r^3), so the quotient converges linearly in r
        let extrapolated = 2.0 * c2 - c1;
        assert!((extrapolated - q).abs() < 1e-5, "{:?}: {extrapolated} vs {q}", model.kind());
        assert!((c2 - q).abs() < 0.6 * (c1 - q).abs() + 1e-9);
    }
}

#[test]
fn manifold_point_has_unit_coupling_energy() {
    // at zero coupling the manifold has zero energy; the Josephson term gives r (1 - F) per gap
    for (model, delta) in cases() {
        let cfg = manifold_point(&model, &delta).unwrap();
        let m = model.with_r(1.0);
        let e = energy(&m, &cfg);
        assert!(e.condensation.abs() < 1e-12 && e.magnetic.abs() < 1e-12);
        assert!(e.josephson > 0.0);
    }
}
