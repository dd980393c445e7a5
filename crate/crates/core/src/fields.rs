//! Gauge-invariant observables, the Stokes phase formula, and gauge fixing of
//! arbitrary (quantized-flux) inputs.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LdError, Result};
use crate::lattice::{decompose_phase, Configuration, Grid, Model, StackKind};
use crate::poisson::solve_periodic_poisson;
use crate::spectral::Spectral;

/// Observable fields of a configuration.
///
/// `planes` lists the plane index of each row of `f`, `v`, `jx`
/// (`1..=N` bi-periodic, `0..=N` finite stack); `phi` and `jz` are indexed by
/// gap `1..=N` (entry `n - 1` belongs to the gap between planes `n - 1` and `n`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSet {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub h: Grid,
    pub planes: Vec<usize>,
    pub f: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub jx: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    pub jz: Vec<Vec<f64>>,
}

impl FieldSet {
    /// Row of `f`, `v`, `jx` holding plane `n`.
    pub fn plane_row(&self, n: usize) -> Option<usize> {
        self.planes.iter().position(|&p| p == n)
    }

    /// `h` averaged over the rows of gap `n`.
    pub fn gap_field(&self, model: &Model, n: usize) -> Vec<f64> {
        gap_average(&self.h, model, n)
    }
}

pub(crate) fn gap_average(h: &Grid, model: &Model, n: usize) -> Vec<f64> {
    let rows = model.gap_rows(n);
    let count = rows.len() as f64;
    let mut out = vec![0.0; h.cols];
    for i in rows {
        for (o, v) in out.iter_mut().zip(h.row(i)) {
            *o += v / count;
        }
    }
    out
}

/// Modulus, phase samples, phase derivative and `A_x` of plane `n` (`0..=N`).
pub(crate) struct PlaneState {
    pub f: Vec<f64>,
    pub phase: Vec<f64>,
    pub v: Vec<f64>,
}

pub(crate) fn plane_state(model: &Model, cfg: &Configuration, n: usize) -> PlaneState {
    let sp = &model.spectral;
    let ax = model.ax_plane(&cfg.xi, n);
    match model.slot(n) {
        Some(slot) => {
            let slope = model.slope(cfg.omega, n);
            let dchi = sp.deriv(&cfg.chi[slot]);
            let v = dchi.iter().zip(&ax).map(|(d, a)| slope + d - a).collect();
            PlaneState {
                f: cfg.f[slot].clone(),
                phase: model.phase(cfg, n),
                v,
            }
        }
        None => {
            // plane 0 of a bi-periodic stack
            let (f, phase) = model.synthesize_plane_zero(cfg);
            let top = model.n() - 1;
            let dchi = sp.deriv(&sp.shift(&cfg.chi[top], model.geom.s));
            let slope = cfg.omega / (2.0 * model.geom.q);
            let v = dchi.iter().zip(&ax).map(|(d, a)| slope + d - a).collect();
            PlaneState { f, phase, v }
        }
    }
}

/// `-int A_z dz` over gap `n` (midpoint rule on the cell centres).
pub(crate) fn gap_az_integral(model: &Model, xi: &Grid, n: usize) -> Vec<f64> {
    let dz = model.dz();
    let mut acc = vec![0.0; xi.cols];
    for i in model.gap_rows(n) {
        for (a, v) in acc.iter_mut().zip(xi.row(i)) {
            *a += v;
        }
    }
    model.spectral.deriv(&acc).into_iter().map(|v| v * dz).collect()
}

pub fn observables(model: &Model, cfg: &Configuration) -> FieldSet {
    let kappa2 = model.params.kappa * model.params.kappa;
    let r = model.params.r;
    let p = model.params.p;
    let n_planes = model.n();
    let states: Vec<PlaneState> = (0..=n_planes).map(|n| plane_state(model, cfg, n)).collect();
    let planes: Vec<usize> = (model.first_plane()..=n_planes).collect();
    let f = planes.iter().map(|&n| states[n].f.clone()).collect();
    let v: Vec<Vec<f64>> = planes.iter().map(|&n| states[n].v.clone()).collect();
    let jx = planes
        .iter()
        .map(|&n| states[n].f.iter().zip(&states[n].v).map(|(f, v)| f * f * v).collect())
        .collect();
    let mut phi = Vec::with_capacity(n_planes);
    let mut jz = Vec::with_capacity(n_planes);
    for n in 1..=n_planes {
        let az = gap_az_integral(model, &cfg.xi, n);
        let (a, b) = (&states[n - 1], &states[n]);
        let gap: Vec<f64> = (0..model.mx()).map(|j| b.phase[j] - a.phase[j] + az[j]).collect();
        jz.push(
            (0..model.mx())
                .map(|j| 0.5 * r * kappa2 * p * a.f[j] * b.f[j] * gap[j].sin())
                .collect(),
        );
        phi.push(gap);
    }
    FieldSet {
        x: model.x_grid(),
        z: (0..model.rows()).map(|i| model.row_z(i)).collect(),
        h: model.field_grid(&cfg.xi),
        planes,
        f,
        v,
        jx,
        phi,
        jz,
    }
}

/// Integral from `0` to each grid point of a periodic sample array.
pub(crate) fn integrate_from_origin(sp: &Spectral, g: &[f64]) -> Vec<f64> {
    let mean = Spectral::mean(g);
    let anti = sp.antiderivative(g);
    sp.grid()
        .iter()
        .zip(&anti)
        .map(|(x, a)| mean * x + a - anti[0])
        .collect()
}

/// `Phi_{n,n-1}` rebuilt from velocities and the gap-averaged field.
pub fn stokes_phase(model: &Model, cfg: &Configuration, n: usize) -> Vec<f64> {
    let below = plane_state(model, cfg, n - 1);
    let above = plane_state(model, cfg, n);
    let h = model.field_grid(&cfg.xi);
    let hbar = gap_average(&h, model, n);
    let p = model.params.p;
    let integrand: Vec<f64> = (0..model.mx())
        .map(|j| above.v[j] - below.v[j] + p * hbar[j])
        .collect();
    let phi0 = above.phase[0] - below.phase[0] + gap_az_integral(model, &cfg.xi, n)[0];
    integrate_from_origin(&model.spectral, &integrand)
        .into_iter()
        .map(|v| v + phi0)
        .collect()
}

/// Fields in an arbitrary gauge, sampled on the staggered layout.
///
/// `ax` lives on the `rows + 1` cell faces, `az` on the cell centres. Plane
/// phases are `slope * x + periodic`, listed for planes `0..=N` (plane 0 is
/// needed for the bi-periodic wrap as well).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawFields {
    pub ax: Grid,
    pub az: Grid,
    pub f: Vec<Vec<f64>>,
    pub phase_slope: Vec<f64>,
    pub phase_periodic: Vec<Vec<f64>>,
}

pub fn to_raw(model: &Model, cfg: &Configuration) -> RawFields {
    let rows = model.rows();
    let mx = model.mx();
    let b = model.background_field();
    let mut ax = Grid::zeros(rows + 1, mx);
    for i in 0..=rows {
        let z = i as f64 * model.dz();
        let row: Vec<f64> = model.xi_dz_face(&cfg.xi, i).into_iter().map(|v| b * z + v).collect();
        ax.set_row(i, &row);
    }
    let mut az = Grid::zeros(rows, mx);
    for i in 0..rows {
        let row: Vec<f64> = model.spectral.deriv(cfg.xi.row(i)).into_iter().map(|v| -v).collect();
        az.set_row(i, &row);
    }
    let x = model.x_grid();
    let mut f = Vec::new();
    let mut slopes = Vec::new();
    let mut periodic = Vec::new();
    for n in 0..=model.n() {
        let st = plane_state(model, cfg, n);
        let slope = match model.slot(n) {
            Some(_) => model.slope(cfg.omega, n),
            None => cfg.omega / (2.0 * model.geom.q),
        };
        f.push(st.f);
        periodic.push(st.phase.iter().zip(&x).map(|(ph, x)| ph - slope * x).collect());
        slopes.push(slope);
    }
    RawFields {
        ax,
        az,
        f,
        phase_slope: slopes,
        phase_periodic: periodic,
    }
}

/// Gauge transform by `lambda = c x + lambda_p(x, z)`, with `lambda_p`
/// periodic in `x` and sampled on the cell faces.
pub fn apply_gauge(model: &Model, raw: &RawFields, c: f64, lambda_faces: &Grid) -> RawFields {
    let sp = &model.spectral;
    let dz = model.dz();
    let mut out = raw.clone();
    for i in 0..raw.ax.rows {
        let dl = sp.deriv(lambda_faces.row(i));
        for (a, d) in out.ax.row_mut(i).iter_mut().zip(&dl) {
            *a -= c + d;
        }
    }
    for i in 0..raw.az.rows {
        let (lo, hi) = (lambda_faces.row(i), lambda_faces.row(i + 1));
        for (j, a) in out.az.row_mut(i).iter_mut().enumerate() {
            *a -= (hi[j] - lo[j]) / dz;
        }
    }
    for n in 0..raw.phase_periodic.len() {
        let face = n * model.disc.mz;
        out.phase_slope[n] -= c;
        for (ph, l) in out.phase_periodic[n].iter_mut().zip(lambda_faces.row(face)) {
            *ph -= l;
        }
    }
    out
}

/// Discrete curl `d_z A_x - d_x A_z` on cell centres.
pub fn raw_curl(model: &Model, raw: &RawFields) -> Grid {
    let dz = model.dz();
    let mut h = Grid::zeros(raw.az.rows, raw.az.cols);
    for i in 0..raw.az.rows {
        let daz = model.spectral.deriv(raw.az.row(i));
        let (lo, hi) = (raw.ax.row(i), raw.ax.row(i + 1));
        for (j, v) in h.row_mut(i).iter_mut().enumerate() {
            *v = (hi[j] - lo[j]) / dz - daz[j];
        }
    }
    h
}

/// Observables evaluated directly from fields in an arbitrary gauge.
pub fn raw_observables(model: &Model, raw: &RawFields) -> FieldSet {
    let sp = &model.spectral;
    let x = model.x_grid();
    let kappa2 = model.params.kappa * model.params.kappa;
    let (r, p, dz) = (model.params.r, model.params.p, model.dz());
    let n_planes = model.n();
    let mut phases = Vec::new();
    let mut vels = Vec::new();
    for n in 0..=n_planes {
        let slope = raw.phase_slope[n];
        let per = &raw.phase_periodic[n];
        let d = sp.deriv(per);
        let ax = raw.ax.row(n * model.disc.mz);
        vels.push((0..x.len()).map(|j| slope + d[j] - ax[j]).collect::<Vec<f64>>());
        phases.push((0..x.len()).map(|j| slope * x[j] + per[j]).collect::<Vec<f64>>());
    }
    let planes: Vec<usize> = (model.first_plane()..=n_planes).collect();
    let mut phi = Vec::new();
    let mut jz = Vec::new();
    for n in 1..=n_planes {
        let mut gap: Vec<f64> = (0..x.len()).map(|j| phases[n][j] - phases[n - 1][j]).collect();
        for i in model.gap_rows(n) {
            for (g, a) in gap.iter_mut().zip(raw.az.row(i)) {
                *g -= a * dz;
            }
        }
        jz.push(
            (0..x.len())
                .map(|j| 0.5 * r * kappa2 * p * raw.f[n - 1][j] * raw.f[n][j] * gap[j].sin())
                .collect(),
        );
        phi.push(gap);
    }
    FieldSet {
        x,
        z: (0..model.rows()).map(|i| model.row_z(i)).collect(),
        h: raw_curl(model, raw),
        f: planes.iter().map(|&n| raw.f[n].clone()).collect(),
        jx: planes
            .iter()
            .map(|&n| raw.f[n].iter().zip(&vels[n]).map(|(f, v)| f * f * v).collect())
            .collect(),
        v: planes.iter().map(|&n| vels[n].clone()).collect(),
        planes,
        phi,
        jz,
    }
}

/// Bring fields in an arbitrary gauge to the gauge-fixed representation.
pub fn gauge_fix(model: &Model, raw: &RawFields) -> Result<Configuration> {
    let rows = model.rows();
    let mx = model.mx();
    let planes = model.n() + 1;
    if raw.ax.rows != rows + 1 || raw.az.rows != rows || raw.ax.cols != mx || raw.az.cols != mx
        || raw.f.len() != planes || raw.phase_periodic.len() != planes || raw.phase_slope.len() != planes
    {
        return Err(LdError::ShapeMismatch("raw fields do not match the model grid".into()));
    }
    let sp = &model.spectral;
    let dz = model.dz();
    let h = raw_curl(model, raw);
    if model.kind() == StackKind::Biperiodic {
        let flux = h.data.iter().sum::<f64>() * model.dx() * dz;
        let expected = 2.0 * PI * model.geom.flux_index() as f64;
        if (flux - expected).abs() > 1e-6 * expected.abs().max(1.0) {
            return Err(LdError::FluxMismatch { found: flux, expected });
        }
    }
    let b = model.background_field();
    let mut rhs = h;
    rhs.data.iter_mut().for_each(|v| *v -= b);
    let xi = solve_periodic_poisson(model, &rhs).xi;

    // residual potential: grad(lambda) = A_raw - A_fixed
    let mut fixed = model.zero_configuration();
    fixed.xi = xi.clone();
    let fixed_raw = to_raw(model, &fixed);
    let dax0: Vec<f64> = raw.ax.row(0).iter().zip(fixed_raw.ax.row(0)).map(|(a, b)| a - b).collect();
    let c = Spectral::mean(&dax0);
    let mut lambda = Grid::zeros(rows + 1, mx);
    lambda.set_row(0, &sp.antiderivative(&dax0));
    for i in 0..rows {
        let next: Vec<f64> = (0..mx)
            .map(|j| lambda.row(i)[j] + dz * (raw.az.row(i)[j] - fixed_raw.az.row(i)[j]))
            .collect();
        lambda.set_row(i + 1, &next);
    }

    let x = model.x_grid();
    let q = model.geom.q;
    let mut cfg = model.zero_configuration();
    cfg.xi = xi;
    let first = model.first_plane();
    let mut omega_acc = 0.0;
    let mut parts = Vec::with_capacity(planes);
    for n in 0..planes {
        let slope = raw.phase_slope[n] - c;
        let face = lambda.row(n * model.disc.mz);
        let per: Vec<f64> = raw.phase_periodic[n].iter().zip(face).map(|(p, l)| p - l).collect();
        let samples: Vec<f64> = x.iter().zip(&per).map(|(x, p)| slope * x + p).collect();
        parts.push((slope, decompose_phase(&samples, slope, &x)));
        if n >= first {
            omega_acc += 2.0 * q * slope - 2.0 * PI * model.geom.k(n as i64) as f64;
        }
    }
    cfg.omega = omega_acc / (planes - first) as f64;
    for n in first..planes {
        let slot = n - first;
        let (_, (alpha, chi)) = &parts[n];
        cfg.f[slot] = raw.f[n].clone();
        cfg.alpha[slot] = *alpha;
        cfg.chi[slot] = chi.clone();
    }
    if model.kind() == StackKind::Biperiodic {
        let top = model.n() - 1;
        let alpha0 = parts[0].1 .0;
        cfg.d = cfg.alpha[top] + model.slope(cfg.omega, model.n()) * model.geom.s - alpha0;
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Discretization, LatticeGeometry, ModelParams};

    fn model(kind: StackKind) -> Model {
        let params = ModelParams::new(1.0, 2.0 * PI, 0.5, 0.2).unwrap();
        let geom = LatticeGeometry::build(2, 0.3, 1, &params, kind).unwrap();
        Model::new(params, geom, Discretization::new(16, 4).unwrap()).unwrap()
    }

    #[test]
    fn manifold_point_observables() {
        let m = model(StackKind::Biperiodic);
        let mut cfg = m.zero_configuration();
        cfg.f.iter_mut().for_each(|r| r.iter_mut().for_each(|v| *v = 1.0));
        let hp = m.params.hp();
        cfg.alpha = vec![0.0, 0.9];
        cfg.d = 0.9 + 2.0 * hp * m.geom.s;
        let fs = observables(&m, &cfg);
        assert!(fs.v.iter().flatten().all(|v| v.abs() < 1e-12));
        assert!(fs.h.data.iter().all(|h| (h - m.params.field).abs() < 1e-12));
        for (j, x) in fs.x.iter().enumerate() {
            assert!((fs.phi[0][j] - hp * x).abs() < 1e-12);
            assert!((fs.phi[1][j] - (0.9 + hp * x)).abs() < 1e-12);
        }
    }

    #[test]
    fn stokes_phase_on_manifold_is_linear() {
        let m = model(StackKind::FiniteLayer);
        let mut cfg = m.zero_configuration();
        cfg.f.iter_mut().for_each(|r| r.iter_mut().for_each(|v| *v = 1.0));
        cfg.alpha = vec![0.0, 0.0, 0.4];
        let phi = stokes_phase(&m, &cfg, 2);
        let hp = m.params.hp();
        for (j, x) in m.x_grid().iter().enumerate() {
            assert!((phi[j] - (0.4 + hp * x)).abs() < 1e-12);
        }
    }
}
