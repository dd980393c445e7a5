#![allow(dead_code)]

use std::f64::consts::PI;

use ld_lattice::lattice::{Configuration, Discretization, LatticeGeometry, Model, ModelParams, StackKind};

pub fn model(n: usize, s: f64, kind: StackKind, r: f64, mx: usize, mz: usize) -> Model {
    let params = ModelParams::new(1.0, 2.0 * PI, 0.5, r).unwrap();
    let geom = LatticeGeometry::build(n, s, 1, &params, kind).unwrap();
    Model::new(params, geom, Discretization::new(mx, mz).unwrap()).unwrap()
}

/// `f = 1`, linear phases with the given offsets, `xi = 0`.
pub fn flat(model: &Model, alphas: &[f64]) -> Configuration {
    let mut cfg = model.zero_configuration();
    cfg.f.iter_mut().for_each(|r| r.iter_mut().for_each(|v| *v = 1.0));
    cfg.alpha = alphas.to_vec();
    if model.kind() == StackKind::Biperiodic {
        cfg.d = alphas[alphas.len() - 1] + model.n() as f64 * model.params.hp() * model.geom.s;
    }
    cfg
}

/// Random configuration with every degree of freedom switched on.
pub fn random(model: &Model, seed: u64) -> Configuration {
    let alphas: Vec<f64> = (0..model.stored_planes()).map(|i| 0.7 * i as f64 + 0.1 * seed as f64).collect();
    let mut cfg = model.perturb(&flat(model, &alphas), 0.1, seed);
    cfg.omega = 0.05 * ((seed % 7) as f64 - 3.0);
    if model.kind() == StackKind::Biperiodic {
        cfg.d += 0.3;
    }
    cfg
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}
