//! Small-coupling expansion around the zero-coupling minimizing manifold.
//!
//! Notation: `a = H p`, `c_n(x) = cos(delta_n + a x)`, `s_n(x) = sin(delta_n + a x)`
//! for gap `n`. In a bi-periodic stack the gap phases extend by
//! `delta_{n+N} = delta_n - a s`; in a finite stack the missing neighbours of
//! the edge planes drop out.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LdError, Result};
use crate::fields::FieldSet;
use crate::lattice::{Configuration, Grid, Model, StackKind};
use crate::poisson::{solve_cyclic, solve_periodic_poisson, solve_tridiagonal};
use crate::spectral::Spectral;

pub(crate) fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Constant gap phases `delta_1 = 0, delta_2, ..., delta_N`, followed for a
/// bi-periodic stack by `delta_{N+1} = -H p s` (mod 2 pi).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseVector {
    pub delta: Vec<f64>,
}

impl PhaseVector {
    /// Build from the free interior phases `delta_2..delta_N`.
    pub fn from_interior(model: &Model, interior: &[f64]) -> Result<Self> {
        let n = model.n();
        if interior.len() + 1 != n {
            return Err(LdError::InvalidParams(format!(
                "need {} interior phases, got {}",
                n - 1,
                interior.len()
            )));
        }
        let mut delta = Vec::with_capacity(n + 1);
        delta.push(0.0);
        delta.extend_from_slice(interior);
        if model.kind() == StackKind::Biperiodic {
            delta.push(-model.params.hp() * model.geom.s);
        }
        Ok(PhaseVector { delta })
    }

    /// `delta_n = (n - 1) pi`.
    pub fn staggered(model: &Model) -> Self {
        let interior: Vec<f64> = (2..=model.n()).map(|n| (n - 1) as f64 * PI).collect();
        Self::from_interior(model, &interior).expect("length matches")
    }

    /// All interior phases zero (vertically aligned vortices).
    pub fn aligned(model: &Model) -> Self {
        Self::from_interior(model, &vec![0.0; model.n() - 1]).expect("length matches")
    }

    pub fn validate(&self, model: &Model) -> Result<()> {
        let n = model.n();
        let expected_len = match model.kind() {
            StackKind::Biperiodic => n + 1,
            StackKind::FiniteLayer => n,
        };
        if self.delta.len() != expected_len || self.delta[0] != 0.0 {
            return Err(LdError::InvalidParams(format!(
                "phase vector needs {expected_len} entries with delta_1 = 0"
            )));
        }
        if model.kind() == StackKind::Biperiodic {
            let want = -model.params.hp() * model.geom.s;
            if wrap_angle(self.delta[n] - want).abs() > 1e-9 {
                return Err(LdError::InvalidParams(format!(
                    "delta_(N+1) must equal -H p s = {want} mod 2 pi"
                )));
            }
        }
        Ok(())
    }

    /// Phase of gap `n`: any `n` for a bi-periodic stack, `1..=N` for a finite one.
    pub fn gap(&self, model: &Model, n: i64) -> Option<f64> {
        let big_n = model.n() as i64;
        match model.kind() {
            StackKind::Biperiodic => {
                let shift = -model.params.hp() * model.geom.s;
                let cell = (n - 1).div_euclid(big_n);
                let idx = (n - 1).rem_euclid(big_n) as usize;
                Some(self.delta[idx] + cell as f64 * shift)
            }
            StackKind::FiniteLayer => (n >= 1 && n <= big_n).then(|| self.delta[(n - 1) as usize]),
        }
    }

    /// Same consecutive differences modulo `2 pi`.
    pub fn equivalent(&self, other: &PhaseVector, tol: f64) -> bool {
        self.delta.len() == other.delta.len()
            && self
                .delta
                .windows(2)
                .zip(other.delta.windows(2))
                .all(|(a, b)| wrap_angle((a[1] - a[0]) - (b[1] - b[0])).abs() <= tol)
    }
}

fn require_admissible(model: &Model) -> Result<()> {
    model.geom.admissible_m(&model.params).map(|_| ())
}

/// Point of the zero-coupling minimizing manifold: `f = 1`, `xi = 0`,
/// `omega = 0`, plane offsets the partial sums of `delta`.
pub fn manifold_point(model: &Model, delta: &PhaseVector) -> Result<Configuration> {
    require_admissible(model)?;
    delta.validate(model)?;
    let mut cfg = model.zero_configuration();
    cfg.f.iter_mut().for_each(|r| r.iter_mut().for_each(|v| *v = 1.0));
    let mut alpha = 0.0;
    for n in model.first_plane()..=model.n() {
        if n >= 2 {
            alpha += delta.delta[n - 1];
        }
        cfg.alpha[model.slot(n).expect("stored")] = alpha;
    }
    if model.kind() == StackKind::Biperiodic {
        cfg.d = alpha + model.slope(0.0, model.n()) * model.geom.s;
    }
    Ok(cfg)
}

/// `D_{n+1} - (2 + p^2) D_n + D_{n-1} = g_n`, `n = 1..N`, closed periodically
/// (`D_{n+N} = D_n`) or by `D_0 = D_{N+1} = 0`.
pub fn solve_difference_equation(p: f64, forcing: &[f64], kind: StackKind) -> Vec<f64> {
    let n = forcing.len();
    let diag = -(2.0 + p * p);
    let rhs: Vec<Complex64> = forcing.iter().map(|&g| Complex64::new(g, 0.0)).collect();
    let sol = match (kind, n) {
        (StackKind::Biperiodic, 1) => vec![rhs[0] / (diag + 2.0)],
        (StackKind::Biperiodic, 2) => {
            // [[diag, 2], [2, diag]]
            let det = diag * diag - 4.0;
            vec![(rhs[0] * diag - rhs[1] * 2.0) / det, (rhs[1] * diag - rhs[0] * 2.0) / det]
        }
        (StackKind::Biperiodic, _) => {
            let one = Complex64::new(1.0, 0.0);
            solve_cyclic(&vec![Complex64::new(diag, 0.0); n], one, one, &rhs)
        }
        (StackKind::FiniteLayer, _) => {
            solve_tridiagonal(&vec![Complex64::new(diag, 0.0); n], Complex64::new(1.0, 0.0), &rhs)
        }
    };
    sol.into_iter().map(|c| c.re).collect()
}

/// Velocity constants from the field constants: `-p C_n = D_{n+1} - D_n`
/// (bi-periodic, `n = 1..N`), plus `-p C_0 = D_1`, `p C_N = D_N` on a finite stack
/// (then indexed `C_0..C_N`).
pub fn velocity_constants(p: f64, d: &[f64], kind: StackKind) -> Vec<f64> {
    let n = d.len();
    match kind {
        StackKind::Biperiodic => (0..n).map(|i| -(d[(i + 1) % n] - d[i]) / p).collect(),
        StackKind::FiniteLayer => {
            let mut c = Vec::with_capacity(n + 1);
            c.push(-d[0] / p);
            for i in 0..n - 1 {
                c.push(-(d[i + 1] - d[i]) / p);
            }
            c.push(d[n - 1] / p);
            c
        }
    }
}

/// Order-`r` corrections on the model grid.
///
/// `u1`, `v1` are listed for the stored planes (`planes`), `b1` and `varphi1`
/// for gaps `1..=N`. `c` holds `C_1..C_N` (bi-periodic) or `C_0..C_N`, `d` holds `D_1..D_N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderCorrection {
    pub planes: Vec<usize>,
    pub u1: Vec<Vec<f64>>,
    pub v1: Vec<Vec<f64>>,
    pub b1: Vec<Vec<f64>>,
    pub varphi1: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
}

struct Expansion<'a> {
    model: &'a Model,
    delta: &'a PhaseVector,
    x: Vec<f64>,
    a: f64,
}

impl<'a> Expansion<'a> {
    fn new(model: &'a Model, delta: &'a PhaseVector) -> Self {
        Expansion {
            model,
            delta,
            x: model.x_grid(),
            a: model.params.hp(),
        }
    }

    fn cos_gap(&self, n: i64) -> Option<Vec<f64>> {
        let d = self.delta.gap(self.model, n)?;
        Some(self.x.iter().map(|x| (d + self.a * x).cos()).collect())
    }

    fn sin_gap(&self, n: i64) -> Option<Vec<f64>> {
        let d = self.delta.gap(self.model, n)?;
        Some(self.x.iter().map(|x| (d + self.a * x).sin()).collect())
    }

    /// Modulus correction of plane `n`: spectral solve of
    /// `-u''/kappa^2 + 2u = (1/2) sum_neighbour_gaps (c_m - 1)`.
    fn modulus(&self, n: i64) -> Vec<f64> {
        let mx = self.x.len();
        let mut rhs = vec![0.0; mx];
        for m in [n, n + 1] {
            if let Some(c) = self.cos_gap(m) {
                for (r, c) in rhs.iter_mut().zip(c) {
                    *r += 0.5 * (c - 1.0);
                }
            }
        }
        let sp = &self.model.spectral;
        let kappa2 = self.model.params.kappa.powi(2);
        let mut spec = sp.forward(&rhs);
        for (j, c) in spec.iter_mut().enumerate() {
            let k = sp.wavenumber(j);
            *c /= k * k / kappa2 + 2.0;
        }
        sp.inverse(spec)
    }

    /// `v'_{n,1} - a_{x,1}(z_n)` for plane `n`, given the velocity constant.
    fn velocity(&self, n: i64, constant: f64) -> Vec<f64> {
        let g = self.model.params.kappa.powi(2) / (2.0 * self.a);
        let mut v = vec![constant; self.x.len()];
        if let Some(c) = self.cos_gap(n) {
            v.iter_mut().zip(c).for_each(|(v, c)| *v -= g * c);
        }
        if let Some(c) = self.cos_gap(n + 1) {
            v.iter_mut().zip(c).for_each(|(v, c)| *v += g * c);
        }
        v
    }

    fn gap_field(&self, n: i64, constant: f64) -> Vec<f64> {
        let g = self.model.params.kappa.powi(2) / (2.0 * self.model.params.field);
        self.cos_gap(n)
            .expect("gap exists")
            .into_iter()
            .map(|c| constant - g * c)
            .collect()
    }
}

pub fn first_order(model: &Model, delta: &PhaseVector) -> Result<FirstOrderCorrection> {
    require_admissible(model)?;
    delta.validate(model)?;
    let ex = Expansion::new(model, delta);
    let n = model.n();
    let p = model.params.p;
    let kind = model.kind();

    let d = solve_difference_equation(p, &vec![0.0; n], kind);
    let c = velocity_constants(p, &d, kind);
    let c_of_plane = |plane: usize| -> f64 {
        match kind {
            StackKind::Biperiodic => c[(plane + n - 1) % n],
            StackKind::FiniteLayer => c[plane],
        }
    };

    let planes: Vec<usize> = (model.first_plane()..=n).collect();
    let u1 = planes.iter().map(|&pl| ex.modulus(pl as i64)).collect();
    let v1: Vec<Vec<f64>> = planes.iter().map(|&pl| ex.velocity(pl as i64, c_of_plane(pl))).collect();
    let b1: Vec<Vec<f64>> = (1..=n).map(|g| ex.gap_field(g as i64, d[g - 1])).collect();

    let sp = &model.spectral;
    let mut varphi1 = Vec::with_capacity(n);
    for gap in 1..=n {
        let above = ex.velocity(gap as i64, c_of_plane(gap));
        let below = ex.velocity(gap as i64 - 1, c_of_plane(gap - 1));
        let slope: Vec<f64> = (0..model.mx())
            .map(|j| above[j] - below[j] + p * b1[gap - 1][j])
            .collect();
        let mean = Spectral::mean(&slope);
        debug_assert!(mean.abs() < 1e-12, "integrability condition violated: {mean}");
        varphi1.push(sp.antiderivative(&slope));
    }
    Ok(FirstOrderCorrection {
        planes,
        u1,
        v1,
        b1,
        varphi1,
        c,
        d,
    })
}

/// The configuration `sigma + r w_1`.
pub fn first_order_configuration(model: &Model, delta: &PhaseVector, r: f64) -> Result<Configuration> {
    let mut cfg = manifold_point(model, delta)?;
    if r == 0.0 {
        return Ok(cfg);
    }
    let fo = first_order(model, delta)?;
    let mut rhs = Grid::zeros(model.rows(), model.mx());
    for gap in 1..=model.n() {
        let row: Vec<f64> = fo.b1[gap - 1].iter().map(|b| r * b).collect();
        for i in model.gap_rows(gap) {
            rhs.set_row(i, &row);
        }
    }
    cfg.xi = solve_periodic_poisson(model, &rhs).xi;
    let sp = &model.spectral;
    for (slot, &plane) in fo.planes.iter().enumerate() {
        let face = model.xi_dz_face(&cfg.xi, plane * model.disc.mz);
        let dchi: Vec<f64> = fo.v1[slot].iter().zip(&face).map(|(v, a)| r * v + a).collect();
        cfg.chi[slot] = sp.antiderivative(&dchi);
        cfg.f[slot] = fo.u1[slot].iter().map(|u| 1.0 + r * u).collect();
    }
    Ok(cfg)
}

/// Fields predicted to first order in `r`.
pub fn predicted_fields(model: &Model, delta: &PhaseVector, r: f64) -> Result<FieldSet> {
    let fo = first_order(model, delta)?;
    let ex = Expansion::new(model, delta);
    let prm = &model.params;
    let n = model.n();
    let mut h = Grid::zeros(model.rows(), model.mx());
    for gap in 1..=n {
        let row: Vec<f64> = fo.b1[gap - 1].iter().map(|b| prm.field + r * b).collect();
        for i in model.gap_rows(gap) {
            h.set_row(i, &row);
        }
    }
    let scale = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
        rows.iter().map(|v| v.iter().map(|x| r * x).collect()).collect()
    };
    let phi = (1..=n)
        .map(|gap| {
            let d = delta.gap(model, gap as i64).expect("gap exists");
            ex.x
                .iter()
                .zip(&fo.varphi1[gap - 1])
                .map(|(x, v)| d + ex.a * x + r * v)
                .collect()
        })
        .collect();
    let jz = (1..=n)
        .map(|gap| {
            ex.sin_gap(gap as i64)
                .expect("gap exists")
                .into_iter()
                .map(|s| 0.5 * r * prm.kappa * prm.kappa * prm.p * s)
                .collect()
        })
        .collect();
    Ok(FieldSet {
        x: ex.x.clone(),
        z: (0..model.rows()).map(|i| model.row_z(i)).collect(),
        h,
        planes: fo.planes.clone(),
        f: fo.u1.iter().map(|u| u.iter().map(|u| 1.0 + r * u).collect()).collect(),
        v: scale(&fo.v1),
        jx: scale(&fo.v1),
        phi,
        jz,
    })
}

/// Closed-form constant term of the order-`r^2` energy coefficient (per area).
pub fn c0_closed_form(kappa: f64, hp: f64, p: f64) -> f64 {
    let (k2, a2) = (kappa * kappa, hp * hp);
    -0.5 * (1.0 + k2 / (2.0 * a2) * (1.0 + a2 / (a2 + 2.0 * k2) + 0.5 * p * p))
}

/// Closed-form coefficient of the reduced objective in the order-`r^2` term.
pub fn c1_closed_form(kappa: f64, hp: f64) -> f64 {
    let (k2, a2) = (kappa * kappa, hp * hp);
    k2 * k2 / (2.0 * a2 * (a2 + 2.0 * k2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    #[serde(rename = "Omega1")]
    pub omega1: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub formula: String,
}

impl ExpansionReport {
    /// Predicted minimum energy `Omega1 (r + r^2 (C0 + C1 F))`.
    pub fn predicted_energy(&self, r: f64) -> f64 {
        self.omega1 * self.predicted_per_area(r)
    }

    pub fn predicted_per_area(&self, r: f64) -> f64 {
        r + r * r * (self.c0 + self.c1 * self.f)
    }
}

/// Expansion constants of a bi-periodic stack, with `F` the reduced minimum.
pub fn expansion_constants(model: &Model) -> Result<ExpansionReport> {
    require_admissible(model)?;
    if model.kind() != StackKind::Biperiodic {
        return Err(LdError::InvalidParams(
            "closed-form constants are available for bi-periodic stacks only".into(),
        ));
    }
    let prm = &model.params;
    let reduced = crate::frustration::minimize_f(model.n(), prm.hp() * model.geom.s, &Default::default());
    let report = ExpansionReport {
        omega1: model.geom.area(prm),
        c0: c0_closed_form(prm.kappa, prm.hp(), prm.p),
        c1: c1_closed_form(prm.kappa, prm.hp()),
        f: reduced.value,
        formula: "E = Omega1 * (r + r^2 * (C0 + C1 * F)) + O(r^3)".into(),
    };
    Ok(report)
}

/// Order-`r^2` energy coefficient by direct quadrature of the first-order fields:
/// the quadratic form of the zero-coupling energy plus the linearized coupling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderQuadrature {
    pub quadratic: f64,
    pub linear: f64,
    pub total: f64,
}

pub fn r2_coefficient(model: &Model, delta: &PhaseVector) -> Result<SecondOrderQuadrature> {
    let fo = first_order(model, delta)?;
    let ex = Expansion::new(model, delta);
    let prm = &model.params;
    let (p, k2inv) = (prm.p, 1.0 / (prm.kappa * prm.kappa));
    let w = model.dx();
    let sp = &model.spectral;
    let n = model.n();

    let mut quadratic = 0.0;
    for (slot, _) in fo.planes.iter().enumerate() {
        let u = &fo.u1[slot];
        let du = sp.deriv(u);
        let v = &fo.v1[slot];
        quadratic += p * w * (0..u.len()).map(|j| 2.0 * u[j] * u[j] + k2inv * (du[j] * du[j] + v[j] * v[j])).sum::<f64>();
    }
    for b in &fo.b1 {
        quadratic += k2inv * p * w * b.iter().map(|b| b * b).sum::<f64>();
    }

    let modulus = |plane: i64| -> Vec<f64> {
        match model.slot(plane as usize) {
            Some(slot) => fo.u1[slot].clone(),
            None => ex.modulus(plane),
        }
    };
    let mut linear = 0.0;
    for gap in 1..=n {
        let (ua, ub) = (modulus(gap as i64 - 1), modulus(gap as i64));
        let c = ex.cos_gap(gap as i64).expect("gap exists");
        let s = ex.sin_gap(gap as i64).expect("gap exists");
        let phi = &fo.varphi1[gap - 1];
        linear += p * w * (0..c.len()).map(|j| (ua[j] + ub[j]) * (1.0 - c[j]) + s[j] * phi[j]).sum::<f64>();
    }
    Ok(SecondOrderQuadrature {
        quadratic,
        linear,
        total: quadratic + linear,
    })
}

/// Least-squares fit `g(x) ~ A sin(theta + a x)`; returns `(A, theta)`.
pub fn fit_phase(x: &[f64], g: &[f64], a: f64) -> (f64, f64) {
    let (mut ss, mut sc) = (0.0, 0.0);
    for (x, g) in x.iter().zip(g) {
        ss += g * (a * x).sin();
        sc += g * (a * x).cos();
    }
    // g = A (cos(theta) sin(ax) + sin(theta) cos(ax)); the basis is orthogonal on the grid
    let norm = 2.0 / x.len() as f64;
    let (cs, sn) = (ss * norm, sc * norm);
    (cs.hypot(sn), sn.atan2(cs))
}
