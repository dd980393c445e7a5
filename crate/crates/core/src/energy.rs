//! Discrete energy, its exact gradient, and Euler–Lagrange residuals.
//!
//! `x`-integrals use the periodic trapezoid rule (weight `dx`), the magnetic
//! term the midpoint rule on cell centres (weight `dx dz`). The gradient is
//! the adjoint of exactly this discretization.

use serde::{Deserialize, Serialize};

use crate::fields::{gap_average, plane_state, PlaneState};
use crate::lattice::{Configuration, Grid, Model, StackKind, Tangent};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub condensation: f64,
    pub josephson: f64,
    pub magnetic: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    /// Energy per unit cross-sectional area, `E / (2 q N p)`.
    pub fn per_area(&self, model: &Model) -> f64 {
        self.total / model.geom.area(&model.params)
    }
}

pub fn energy(model: &Model, cfg: &Configuration) -> EnergyBreakdown {
    evaluate(model, cfg, false).0
}

pub fn gradient(model: &Model, cfg: &Configuration) -> Tangent {
    evaluate(model, cfg, true).1.expect("gradient requested")
}

pub fn energy_and_gradient(model: &Model, cfg: &Configuration) -> (EnergyBreakdown, Tangent) {
    let (e, g) = evaluate(model, cfg, true);
    (e, g.expect("gradient requested"))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (u, v) in y.iter_mut().zip(x) {
        *u += a * v;
    }
}

fn evaluate(model: &Model, cfg: &Configuration, want_grad: bool) -> (EnergyBreakdown, Option<Tangent>) {
    let sp = &model.spectral;
    let prm = &model.params;
    let k2inv = 1.0 / (prm.kappa * prm.kappa);
    let (p, r) = (prm.p, prm.r);
    let w = model.dx();
    let dz = model.dz();
    let pw = p * w;
    let mx = model.mx();
    let n_planes = model.n();
    let first = model.first_plane();
    let x = model.x_grid();
    let two_q = 2.0 * model.geom.q;
    let s = model.geom.s;

    let states: Vec<PlaneState> = (0..=n_planes).map(|n| plane_state(model, cfg, n)).collect();

    let mut grad = if want_grad { Some(model.zero_configuration()) } else { None };
    // adjoints of plane moduli / phase samples for planes 0..=N, and of A_x on planes
    let mut gf = vec![vec![0.0; mx]; n_planes + 1];
    let mut gphase = vec![vec![0.0; mx]; n_planes + 1];
    let mut gv = vec![vec![0.0; mx]; n_planes + 1];

    // condensation
    let mut condensation = 0.0;
    for n in first..=n_planes {
        let st = &states[n];
        let df = sp.deriv(&st.f);
        let mut acc = 0.0;
        for j in 0..mx {
            let (f, v) = (st.f[j], st.v[j]);
            let t = f * f - 1.0;
            acc += 0.5 * t * t + k2inv * (df[j] * df[j] + v * v * f * f);
        }
        condensation += pw * acc;
        if want_grad {
            let ddf = sp.deriv(&df);
            for j in 0..mx {
                let (f, v) = (st.f[j], st.v[j]);
                gf[n][j] += pw * (2.0 * f * (f * f - 1.0) + 2.0 * k2inv * v * v * f - 2.0 * k2inv * ddf[j]);
                gv[n][j] = 2.0 * pw * k2inv * v * f * f;
            }
        }
    }

    // Josephson coupling
    let mut josephson = 0.0;
    let mut gxi = Grid::zeros(cfg.xi.rows, mx);
    for n in 1..=n_planes {
        let (a, b) = (&states[n - 1], &states[n]);
        let az = crate::fields::gap_az_integral(model, &cfg.xi, n);
        let mut acc = 0.0;
        let mut gphi = vec![0.0; mx];
        for j in 0..mx {
            let phi = b.phase[j] - a.phase[j] + az[j];
            let (fa, fb) = (a.f[j], b.f[j]);
            let (sn, cs) = phi.sin_cos();
            acc += fa * fa + fb * fb - 2.0 * fa * fb * cs;
            if want_grad {
                gf[n - 1][j] += r * pw * (fa - fb * cs);
                gf[n][j] += r * pw * (fb - fa * cs);
                gphi[j] = r * pw * fa * fb * sn;
            }
        }
        josephson += 0.5 * r * pw * acc;
        if want_grad {
            axpy(&mut gphase[n], 1.0, &gphi);
            axpy(&mut gphase[n - 1], -1.0, &gphi);
            let back = sp.deriv(&gphi);
            for i in model.gap_rows(n) {
                axpy(gxi.row_mut(i), -dz, &back);
            }
        }
    }

    // magnetic
    let mut hm = model.field_grid(&cfg.xi);
    hm.data.iter_mut().for_each(|v| *v -= prm.field);
    let magnetic = k2inv * w * dz * hm.data.iter().map(|v| v * v).sum::<f64>();
    if want_grad {
        let lh = model.laplacian(&hm);
        axpy(&mut gxi.data, 2.0 * k2inv * w * dz, &lh.data);
    }

    let total = condensation + josephson + magnetic;
    let breakdown = EnergyBreakdown {
        condensation,
        josephson,
        magnetic,
        total,
    };
    if let Some(g) = grad.as_mut() {
        let mut gomega = 0.0;
        let mut gslope = vec![0.0; n_planes + 1];
        for n in 0..=n_planes {
            match model.slot(n) {
                Some(slot) => {
                    // V = slope + D chi - A_x
                    let dv = sp.deriv(&gv[n]);
                    let mut gchi: Vec<f64> = dv.iter().map(|v| -v).collect();
                    gslope[n] += gv[n].iter().sum::<f64>();
                    // phase samples = alpha + slope x + chi
                    axpy(&mut gchi, 1.0, &gphase[n]);
                    g.alpha[slot] += gphase[n].iter().sum::<f64>();
                    gslope[n] += dot(&gphase[n], &x);
                    axpy(&mut g.chi[slot], 1.0, &gchi);
                    axpy(&mut g.f[slot], 1.0, &gf[n]);
                    // A_x on the plane face
                    let gax: Vec<f64> = gv[n].iter().map(|v| -v / dz).collect();
                    add_face_adjoint(model, &mut gxi, n * model.disc.mz, &gax);
                }
                None => {
                    // plane 0 of a bi-periodic stack, synthesized from plane N
                    let top = n_planes - 1;
                    let back_f = sp.shift(&gf[0], -s);
                    axpy(&mut g.f[top], 1.0, &back_f);
                    let back_chi = sp.shift(&gphase[0], -s);
                    axpy(&mut g.chi[top], 1.0, &back_chi);
                    let goff: f64 = gphase[0].iter().sum();
                    g.alpha[top] += goff;
                    gslope[n_planes] += s * goff;
                    g.d -= goff;
                    gomega += dot(&gphase[0], &x) / two_q;
                }
            }
        }
        gomega += gslope.iter().sum::<f64>() / two_q;
        g.omega = gomega;
        g.xi = gxi;
    }
    (breakdown, grad)
}

/// Distribute `g * d(face difference)` onto the rows adjacent to face `i`:
/// `+g` on the row above, `-g` on the row below (through the wrap/ghost maps).
fn add_face_adjoint(model: &Model, gxi: &mut Grid, i: usize, g: &[f64]) {
    let rows = gxi.rows;
    let s = model.geom.s;
    let sp = &model.spectral;
    if i == rows {
        match model.kind() {
            StackKind::Biperiodic => axpy(gxi.row_mut(0), 1.0, &sp.shift(g, s)),
            StackKind::FiniteLayer => axpy(gxi.row_mut(rows - 1), -1.0, g),
        }
    } else {
        axpy(gxi.row_mut(i), 1.0, g);
    }
    if i == 0 {
        match model.kind() {
            StackKind::Biperiodic => axpy(gxi.row_mut(rows - 1), -1.0, &sp.shift(g, -s)),
            StackKind::FiniteLayer => axpy(gxi.row_mut(0), 1.0, g),
        }
    } else {
        axpy(gxi.row_mut(i - 1), -1.0, g);
    }
}

/// Sup-norms of the discretized Euler–Lagrange residuals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ElResiduals {
    /// modulus equation
    pub modulus: f64,
    /// field jump across each plane
    pub jump: f64,
    /// `d_x h` against the Josephson current in each gap
    pub field_x: f64,
    /// current conservation
    pub current: f64,
    /// `z`-variation of `h` inside each gap
    pub field_z: f64,
}

impl ElResiduals {
    pub fn max(&self) -> f64 {
        [self.modulus, self.jump, self.field_x, self.current, self.field_z]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn rows(&self) -> [(&'static str, f64); 5] {
        [
            ("modulus", self.modulus),
            ("jump", self.jump),
            ("field_x", self.field_x),
            ("current", self.current),
            ("field_z", self.field_z),
        ]
    }
}

pub fn el_residuals(model: &Model, cfg: &Configuration) -> ElResiduals {
    let (_, g) = energy_and_gradient(model, cfg);
    let pw = model.params.p * model.dx();
    let sup = |v: &[Vec<f64>]| v.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
    let modulus = sup(&g.f) / (2.0 * pw);
    let current = sup(&g.chi) / (2.0 * pw);

    let fs = crate::fields::observables(model, cfg);
    let sp = &model.spectral;
    let p = model.params.p;
    let h = &fs.h;
    let rows = h.rows;
    let mz = model.disc.mz;
    let mut field_x = 0.0_f64;
    let mut field_z = 0.0_f64;
    for n in 1..=model.n() {
        let hbar = gap_average(h, model, n);
        let dh = sp.deriv(&hbar);
        for (a, b) in dh.iter().zip(&fs.jz[n - 1]) {
            field_x = field_x.max((a - b).abs());
        }
        for i in model.gap_rows(n) {
            for (a, b) in h.row(i).iter().zip(&hbar) {
                field_z = field_z.max((a - b).abs());
            }
        }
    }
    let mut jump = 0.0_f64;
    let outside = vec![model.params.field; model.mx()];
    for (row, &n) in fs.planes.iter().enumerate() {
        let face = n * mz;
        let above = if face == rows {
            match model.kind() {
                StackKind::Biperiodic => sp.shift(h.row(0), -model.geom.s),
                StackKind::FiniteLayer => outside.clone(),
            }
        } else {
            h.row(face).to_vec()
        };
        let below = if face == 0 { outside.clone() } else { h.row(face - 1).to_vec() };
        for j in 0..model.mx() {
            let f = fs.f[row][j];
            let res = above[j] - below[j] + p * f * f * fs.v[row][j];
            jump = jump.max(res.abs());
        }
    }
    ElResiduals {
        modulus,
        jump,
        field_x,
        current,
        field_z,
    }
}
