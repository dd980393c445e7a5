//! Model parameters, period geometry, discretization and the gauge-fixed
//! configuration shared by every other module.
//!
//! Vertical layout: the stack of height `N p` is split into `N * Mz` cells of
//! height `dz = p / Mz`. The stream function `xi` lives at cell centres
//! (`z = (i + 1/2) dz`), planes sit on cell faces (`z_n = n p`, face `n * Mz`).
//! `A_x = <h> z + d_z xi` is therefore evaluated on faces and
//! `A_z = -d_x xi` on cell centres, which keeps the discrete Stokes identity
//! exact gap by gap.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LdError, Result};
use crate::spectral::Spectral;

/// Tolerance used for integer tests on real ratios (`H p q / pi`, `s / q1`).
pub const INTEGER_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub kappa: f64,
    #[serde(rename = "H")]
    pub field: f64,
    pub p: f64,
    pub r: f64,
}

impl ModelParams {
    pub fn new(kappa: f64, field: f64, p: f64, r: f64) -> Result<Self> {
        let params = ModelParams { kappa, field, p, r };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.kappa > 0.0 && self.field > 0.0 && self.p > 0.0 && self.r >= 0.0;
        if !ok || ![self.kappa, self.field, self.p, self.r].iter().all(|v| v.is_finite()) {
            return Err(LdError::InvalidParams(format!(
                "need kappa > 0, H > 0, p > 0, r >= 0 (got {self:?})"
            )));
        }
        Ok(())
    }

    pub fn with_r(mut self, r: f64) -> Self {
        self.r = r;
        self
    }

    /// Half-period of the minimal admissible lattice, `q1 = pi / (H p)`.
    pub fn q1(&self) -> f64 {
        PI / (self.field * self.p)
    }

    /// `H p`, the wavenumber of the r = 0 phase ramp per plane.
    pub fn hp(&self) -> f64 {
        self.field * self.p
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StackKind {
    Biperiodic,
    FiniteLayer,
}

/// Winding numbers `k_n` of the plane phases (with `k_0 = 0`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winding {
    /// `k_n = m n`
    Linear(i64),
    /// `k_0, ..., k_N` listed explicitly, extended by `k_{n+N} = k_n + k_N`.
    Explicit(Vec<i64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Admissibility {
    Admissible(i64),
    Inadmissible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeGeometry {
    pub n_planes: usize,
    pub s: f64,
    pub q: f64,
    pub winding: Winding,
    pub kind: StackKind,
}

impl LatticeGeometry {
    /// Admissible geometry `q = m pi / (H p)`, `k_n = m n`.
    pub fn build(n_planes: usize, s: f64, m: i64, params: &ModelParams, kind: StackKind) -> Result<Self> {
        if n_planes == 0 || m < 1 {
            return Err(LdError::InvalidParams(format!(
                "need N >= 1 and m >= 1 (got N = {n_planes}, m = {m})"
            )));
        }
        params.validate()?;
        Ok(LatticeGeometry {
            n_planes,
            s,
            q: m as f64 * params.q1(),
            winding: Winding::Linear(m),
            kind,
        })
    }

    /// Arbitrary geometry; no admissibility implied.
    pub fn custom(n_planes: usize, s: f64, q: f64, winding: Winding, kind: StackKind) -> Result<Self> {
        if n_planes == 0 || !(q > 0.0) {
            return Err(LdError::InvalidParams("need N >= 1 and q > 0".into()));
        }
        if let Winding::Explicit(k) = &winding {
            if k.len() != n_planes + 1 || k[0] != 0 {
                return Err(LdError::InvalidParams(format!(
                    "explicit winding needs k_0 = 0 and N + 1 = {} entries",
                    n_planes + 1
                )));
            }
        }
        Ok(LatticeGeometry {
            n_planes,
            s,
            q,
            winding,
            kind,
        })
    }

    pub fn k(&self, n: i64) -> i64 {
        match &self.winding {
            Winding::Linear(m) => m * n,
            Winding::Explicit(list) => {
                let big_n = self.n_planes as i64;
                let period = list[self.n_planes];
                let cell = n.div_euclid(big_n);
                let rem = n.rem_euclid(big_n) as usize;
                list[rem] + cell * period
            }
        }
    }

    /// Flux index `K = k_N`.
    pub fn flux_index(&self) -> i64 {
        self.k(self.n_planes as i64)
    }

    /// `<h> = pi K / (p q N)`.
    pub fn mean_field(&self, params: &ModelParams) -> f64 {
        PI * self.flux_index() as f64 / (params.p * self.q * self.n_planes as f64)
    }

    pub fn area(&self, params: &ModelParams) -> f64 {
        2.0 * self.q * self.n_planes as f64 * params.p
    }

    pub fn classify(&self, params: &ModelParams) -> Admissibility {
        let ratio = params.hp() * self.q / PI;
        let m = ratio.round();
        if m < 1.0 || (ratio - m).abs() > INTEGER_TOL * ratio.abs().max(1.0) {
            return Admissibility::Inadmissible;
        }
        let m = m as i64;
        let matches = (0..=self.n_planes as i64).all(|n| self.k(n) == m * n);
        if matches {
            Admissibility::Admissible(m)
        } else {
            Admissibility::Inadmissible
        }
    }

    pub fn admissible_m(&self, params: &ModelParams) -> Result<i64> {
        match self.classify(params) {
            Admissibility::Admissible(m) => Ok(m),
            Admissibility::Inadmissible => Err(LdError::InadmissibleGeometry),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discretization {
    #[serde(rename = "Mx")]
    pub mx: usize,
    #[serde(rename = "Mz")]
    pub mz: usize,
}

impl Discretization {
    pub fn new(mx: usize, mz: usize) -> Result<Self> {
        if mx < 4 || mz < 4 || mx % 2 != 0 {
            return Err(LdError::InvalidParams(format!(
                "need Mx >= 4 even and Mz >= 4 (got Mx = {mx}, Mz = {mz})"
            )));
        }
        Ok(Discretization { mx, mz })
    }
}

/// Row-major real grid; rows run over `z`, columns over `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Grid {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let n = rows.len();
        Grid {
            rows: n,
            cols,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn set_row(&mut self, i: usize, values: &[f64]) {
        self.row_mut(i).copy_from_slice(values);
    }

    pub fn add_row(&mut self, i: usize, values: &[f64], scale: f64) {
        for (a, b) in self.row_mut(i).iter_mut().zip(values) {
            *a += scale * b;
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Gauge-fixed discrete state.
///
/// Planes are stored bottom to top: `1..=N` for the bi-periodic stack (plane 0
/// is synthesized from plane N), `0..=N` for the finite stack. The phase of a
/// stored plane is `alpha + (omega + 2 pi k_n) x / (2q) + chi(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub f: Vec<Vec<f64>>,
    pub chi: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub omega: f64,
    pub d: f64,
    pub xi: Grid,
}

/// Gradients and search directions share the configuration layout.
pub type Tangent = Configuration;

impl Configuration {
    pub fn zeros(planes: usize, mx: usize, rows: usize) -> Self {
        Configuration {
            f: vec![vec![0.0; mx]; planes],
            chi: vec![vec![0.0; mx]; planes],
            alpha: vec![0.0; planes],
            omega: 0.0,
            d: 0.0,
            xi: Grid::zeros(rows, mx),
        }
    }

    pub fn len(&self) -> usize {
        let planes = self.f.len();
        let mx = self.f.first().map_or(0, Vec::len);
        2 * planes * mx + planes + 2 + self.xi.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flatten as `[f..., chi..., alpha..., omega, d, xi...]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        self.f.iter().for_each(|r| out.extend_from_slice(r));
        self.chi.iter().for_each(|r| out.extend_from_slice(r));
        out.extend_from_slice(&self.alpha);
        out.push(self.omega);
        out.push(self.d);
        out.extend_from_slice(&self.xi.data);
        out
    }

    /// Inverse of [`Configuration::to_vec`] using `self` as shape template.
    pub fn from_vec_like(&self, v: &[f64]) -> Configuration {
        assert_eq!(v.len(), self.len());
        let planes = self.f.len();
        let mx = self.f.first().map_or(0, Vec::len);
        let mut it = 0;
        let mut take = |n: usize| {
            let s = v[it..it + n].to_vec();
            it += n;
            s
        };
        let f = (0..planes).map(|_| take(mx)).collect();
        let chi = (0..planes).map(|_| take(mx)).collect();
        let alpha = take(planes);
        let omega = take(1)[0];
        let d = take(1)[0];
        let data = take(self.xi.data.len());
        Configuration {
            f,
            chi,
            alpha,
            omega,
            d,
            xi: Grid {
                rows: self.xi.rows,
                cols: self.xi.cols,
                data,
            },
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.to_vec().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min_modulus(&self) -> f64 {
        self.f.iter().flatten().fold(f64::INFINITY, |m, &v| m.min(v))
    }
}

/// Parameters, geometry and discretization bundled with the FFT plans.
#[derive(Clone, Debug)]
pub struct Model {
    pub params: ModelParams,
    pub geom: LatticeGeometry,
    pub disc: Discretization,
    pub spectral: Spectral,
}

impl Model {
    pub fn new(params: ModelParams, geom: LatticeGeometry, disc: Discretization) -> Result<Self> {
        params.validate()?;
        Discretization::new(disc.mx, disc.mz)?;
        let spectral = Spectral::new(disc.mx, 2.0 * geom.q);
        Ok(Model {
            params,
            geom,
            disc,
            spectral,
        })
    }

    pub fn with_r(&self, r: f64) -> Model {
        let mut m = self.clone();
        m.params.r = r;
        m
    }

    pub fn kind(&self) -> StackKind {
        self.geom.kind
    }

    pub fn n(&self) -> usize {
        self.geom.n_planes
    }

    pub fn mx(&self) -> usize {
        self.disc.mx
    }

    /// Index of the first stored plane.
    pub fn first_plane(&self) -> usize {
        match self.kind() {
            StackKind::Biperiodic => 1,
            StackKind::FiniteLayer => 0,
        }
    }

    pub fn stored_planes(&self) -> usize {
        match self.kind() {
            StackKind::Biperiodic => self.n(),
            StackKind::FiniteLayer => self.n() + 1,
        }
    }

    /// Storage slot of plane `n` (plane 0 of a bi-periodic stack has none).
    pub fn slot(&self, n: usize) -> Option<usize> {
        let first = self.first_plane();
        if n < first || n > self.n() {
            None
        } else {
            Some(n - first)
        }
    }

    pub fn rows(&self) -> usize {
        self.n() * self.disc.mz
    }

    pub fn dz(&self) -> f64 {
        self.params.p / self.disc.mz as f64
    }

    pub fn dx(&self) -> f64 {
        self.spectral.dx()
    }

    pub fn x_grid(&self) -> Vec<f64> {
        self.spectral.grid()
    }

    pub fn row_z(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dz()
    }

    pub fn plane_z(&self, n: usize) -> f64 {
        n as f64 * self.params.p
    }

    /// Rows making up gap `n` (between planes `n - 1` and `n`), `1 <= n <= N`.
    pub fn gap_rows(&self, n: usize) -> std::ops::Range<usize> {
        (n - 1) * self.disc.mz..n * self.disc.mz
    }

    /// Background field in `A = <h>(z, 0) + curl xi`: `<h>` bi-periodic, `H` finite stack.
    pub fn background_field(&self) -> f64 {
        match self.kind() {
            StackKind::Biperiodic => self.geom.mean_field(&self.params),
            StackKind::FiniteLayer => self.params.field,
        }
    }

    /// Slope of the linear phase part of plane `n`.
    pub fn slope(&self, omega: f64, n: usize) -> f64 {
        (omega + 2.0 * PI * self.geom.k(n as i64) as f64) / (2.0 * self.geom.q)
    }

    pub fn zero_configuration(&self) -> Configuration {
        Configuration::zeros(self.stored_planes(), self.mx(), self.rows())
    }

    pub fn check(&self, cfg: &Configuration) -> Result<()> {
        let planes = self.stored_planes();
        let mx = self.mx();
        let ok = cfg.f.len() == planes
            && cfg.chi.len() == planes
            && cfg.alpha.len() == planes
            && cfg.f.iter().chain(cfg.chi.iter()).all(|r| r.len() == mx)
            && cfg.xi.rows == self.rows()
            && cfg.xi.cols == mx;
        if ok {
            Ok(())
        } else {
            Err(LdError::ShapeMismatch(format!(
                "expected {planes} planes of {mx} samples and a {}x{mx} stream function",
                self.rows()
            )))
        }
    }

    /// Phase samples `phi_n(x_j)` of a stored plane.
    pub fn phase(&self, cfg: &Configuration, n: usize) -> Vec<f64> {
        let slot = self.slot(n).expect("plane is stored");
        let slope = self.slope(cfg.omega, n);
        self.x_grid()
            .iter()
            .zip(&cfg.chi[slot])
            .map(|(x, c)| cfg.alpha[slot] + slope * x + c)
            .collect()
    }

    /// Phase of a stored plane at any `x` (trigonometric interpolation of `chi`).
    pub fn phase_at(&self, cfg: &Configuration, n: usize, x: f64) -> f64 {
        let slot = self.slot(n).expect("plane is stored");
        cfg.alpha[slot] + self.slope(cfg.omega, n) * x + self.spectral.eval(&cfg.chi[slot], x)
    }

    /// Plane-0 modulus and phase samples of a bi-periodic stack:
    /// `f_0(x) = f_N(x + s)`, `phi_0(x) = phi_N(x + s) - (K pi / q) x - d`.
    pub fn synthesize_plane_zero(&self, cfg: &Configuration) -> (Vec<f64>, Vec<f64>) {
        match self.kind() {
            StackKind::Biperiodic => {
                let top = self.n() - 1;
                let s = self.geom.s;
                let f0 = self.spectral.shift(&cfg.f[top], s);
                let chi0 = self.spectral.shift(&cfg.chi[top], s);
                let offset = cfg.alpha[top] + self.slope(cfg.omega, self.n()) * s - cfg.d;
                let slope0 = cfg.omega / (2.0 * self.geom.q);
                let phi0 = self
                    .x_grid()
                    .iter()
                    .zip(&chi0)
                    .map(|(x, c)| offset + slope0 * x + c)
                    .collect();
                (f0, phi0)
            }
            StackKind::FiniteLayer => (cfg.f[0].clone(), self.phase(cfg, 0)),
        }
    }

    /// Stream-function row just above the top cell (`z = N p + dz/2`).
    pub fn xi_above_top(&self, xi: &Grid) -> Vec<f64> {
        match self.kind() {
            StackKind::Biperiodic => self.spectral.shift(xi.row(0), -self.geom.s),
            StackKind::FiniteLayer => xi.row(xi.rows - 1).iter().map(|v| -v).collect(),
        }
    }

    /// Stream-function row just below the bottom cell (`z = -dz/2`).
    pub fn xi_below_bottom(&self, xi: &Grid) -> Vec<f64> {
        match self.kind() {
            StackKind::Biperiodic => self.spectral.shift(xi.row(xi.rows - 1), self.geom.s),
            StackKind::FiniteLayer => xi.row(0).iter().map(|v| -v).collect(),
        }
    }

    /// `d_z xi` on face `i` (`0 <= i <= rows`).
    pub fn xi_dz_face(&self, xi: &Grid, i: usize) -> Vec<f64> {
        let rows = xi.rows;
        let above = if i == rows { self.xi_above_top(xi) } else { xi.row(i).to_vec() };
        let below = if i == 0 { self.xi_below_bottom(xi) } else { xi.row(i - 1).to_vec() };
        let dz = self.dz();
        above.iter().zip(&below).map(|(a, b)| (a - b) / dz).collect()
    }

    /// `A_x` on the face of plane `n`.
    pub fn ax_plane(&self, xi: &Grid, n: usize) -> Vec<f64> {
        let base = self.background_field() * self.plane_z(n);
        self.xi_dz_face(xi, n * self.disc.mz)
            .into_iter()
            .map(|v| base + v)
            .collect()
    }

    /// Discrete Laplacian: spectral in `x`, second difference in `z` with the
    /// sheared-periodic (bi-periodic) or Dirichlet (finite stack) closure.
    pub fn laplacian(&self, xi: &Grid) -> Grid {
        let rows = xi.rows;
        let dz2 = self.dz() * self.dz();
        let above = self.xi_above_top(xi);
        let below = self.xi_below_bottom(xi);
        let mut out = Grid::zeros(rows, xi.cols);
        for i in 0..rows {
            let up = if i + 1 == rows { &above[..] } else { xi.row(i + 1) };
            let dn = if i == 0 { &below[..] } else { xi.row(i - 1) };
            let dxx = self.spectral.deriv2(xi.row(i));
            let row = out.row_mut(i);
            for j in 0..xi.cols {
                row[j] = (up[j] - 2.0 * xi.row(i)[j] + dn[j]) / dz2 + dxx[j];
            }
        }
        out
    }

    /// Local field `h = <h> + Laplacian(xi)` (finite stack: `H + Laplacian(xi)`).
    pub fn field_grid(&self, xi: &Grid) -> Grid {
        let mut h = self.laplacian(xi);
        let b = self.background_field();
        h.data.iter_mut().for_each(|v| *v += b);
        h
    }

    /// Remove the mean and the Nyquist mode from each `chi` row and the Nyquist
    /// mode from each `xi` row (directions the energy does not see).
    pub fn project(&self, cfg: &mut Configuration) {
        let sp = &self.spectral;
        let nyq = sp.nyquist();
        let strip = |row: &[f64], drop_mean: bool| -> Vec<f64> {
            let mut spec = sp.forward(row);
            spec[nyq] = num_complex::Complex64::new(0.0, 0.0);
            if drop_mean {
                spec[0] = num_complex::Complex64::new(0.0, 0.0);
            }
            sp.inverse(spec)
        };
        for row in cfg.chi.iter_mut() {
            *row = strip(row, true);
        }
        for i in 0..cfg.xi.rows {
            let r = strip(cfg.xi.row(i), false);
            cfg.xi.set_row(i, &r);
        }
    }

    /// Seeded random perturbation of `base`: smooth Gaussian noise (Fourier modes
    /// `|j| <= 4`) of standard deviation `amplitude` on `f`, `chi`, `alpha` and on
    /// the field `h` (through `xi`), then projected.
    pub fn perturb(&self, base: &Configuration, amplitude: f64, seed: u64) -> Configuration {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        const MODES: usize = 4;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let sp = &self.spectral;
        let x = self.x_grid();
        let modes = MODES.min(sp.nyquist().saturating_sub(1));
        let shifts: Vec<f64> = (0..base.alpha.len()).map(|_| amplitude * normal.sample(&mut rng)).collect();
        let mut noise = || -> Vec<f64> {
            // each of the 2 modes + 1 coefficients carries an equal share of the variance
            let scale = amplitude / ((2 * modes + 1) as f64).sqrt();
            let c0 = scale * normal.sample(&mut rng);
            let coeffs: Vec<(f64, f64)> = (1..=modes)
                .map(|_| (normal.sample(&mut rng) * scale * 2f64.sqrt(), normal.sample(&mut rng) * scale * 2f64.sqrt()))
                .collect();
            x.iter()
                .map(|&x| {
                    c0 + coeffs
                        .iter()
                        .enumerate()
                        .map(|(j, (a, b))| {
                            let k = sp.wavenumber(j + 1);
                            a * (k * x).cos() + b * (k * x).sin()
                        })
                        .sum::<f64>()
                })
                .collect()
        };
        let mut cfg = base.clone();
        for slot in 0..cfg.f.len() {
            cfg.f[slot].iter_mut().zip(noise()).for_each(|(a, b)| *a += b);
            cfg.chi[slot].iter_mut().zip(noise()).for_each(|(a, b)| *a += b);
        }
        for (a, shift) in cfg.alpha.iter_mut().zip(&shifts) {
            *a += shift;
        }
        let mut h = Grid::zeros(cfg.xi.rows, self.mx());
        for i in 0..h.rows {
            h.set_row(i, &noise());
        }
        let dxi = crate::poisson::solve_periodic_poisson(self, &h).xi;
        cfg.xi.data.iter_mut().zip(&dxi.data).for_each(|(a, b)| *a += b);
        self.project(&mut cfg);
        cfg
    }

    /// Translate every field by a grid-commensurate `x0` (`x0 = shift * dx`).
    pub fn translate(&self, cfg: &Configuration, shift: usize) -> Configuration {
        let x0 = shift as f64 * self.dx();
        let roll = |v: &[f64]| -> Vec<f64> {
            let m = v.len();
            (0..m).map(|j| v[(j + m - shift % m) % m]).collect()
        };
        let mut out = cfg.clone();
        let first = self.first_plane();
        for slot in 0..cfg.f.len() {
            out.f[slot] = roll(&cfg.f[slot]);
            out.chi[slot] = roll(&cfg.chi[slot]);
            out.alpha[slot] = cfg.alpha[slot] - self.slope(cfg.omega, slot + first) * x0;
        }
        for i in 0..cfg.xi.rows {
            out.xi.set_row(i, &roll(cfg.xi.row(i)));
        }
        if self.kind() == StackKind::Biperiodic {
            out.d = cfg.d - PI * self.geom.flux_index() as f64 / self.geom.q * x0;
        }
        out
    }
}

/// Split phase samples with known increment per period into `(alpha, chi)`
/// with `chi` mean-free.
pub fn decompose_phase(samples: &[f64], slope: f64, x: &[f64]) -> (f64, Vec<f64>) {
    let periodic: Vec<f64> = samples.iter().zip(x).map(|(p, x)| p - slope * x).collect();
    let alpha = Spectral::mean(&periodic);
    (alpha, periodic.into_iter().map(|v| v - alpha).collect())
}
