//! Poisson and shifted-Helmholtz solves for the stream function.
//!
//! The discrete operator is the one used everywhere else: spectral second
//! derivative in `x` (Nyquist mode dropped) plus the three-point second
//! difference in `z` closed by the sheared wrap (bi-periodic) or by odd
//! reflection across `z = 0, Np` (finite stack). After an FFT along each row
//! every `x`-mode decouples into a tridiagonal system in `z`, cyclic with
//! corner factors `e^{∓iks}` for the bi-periodic stack.

use num_complex::Complex64;

use crate::lattice::{Grid, Model, StackKind};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Thomas algorithm for a tridiagonal system with constant off-diagonals `off`.
pub fn solve_tridiagonal(diag: &[Complex64], off: Complex64, rhs: &[Complex64]) -> Vec<Complex64> {
    let n = diag.len();
    let mut c = vec![ZERO; n];
    let mut d = vec![ZERO; n];
    c[0] = off / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - off * c[i - 1];
        c[i] = off / denom;
        d[i] = (rhs[i] - off * d[i - 1]) / denom;
    }
    let mut x = vec![ZERO; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Cyclic tridiagonal solve (unit off-diagonals) by Sherman–Morrison.
/// `lower` multiplies `x[n-1]` in row 0, `upper` multiplies `x[0]` in row `n-1`.
pub fn solve_cyclic(diag: &[Complex64], lower: Complex64, upper: Complex64, rhs: &[Complex64]) -> Vec<Complex64> {
    let n = diag.len();
    assert!(n >= 3, "cyclic solve needs at least three unknowns");
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= upper * lower / gamma;
    let x = solve_tridiagonal(&bb, ONE, rhs);
    let mut u = vec![ZERO; n];
    u[0] = gamma;
    u[n - 1] = upper;
    let z = solve_tridiagonal(&bb, ONE, &u);
    let fact = (x[0] + lower * x[n - 1] / gamma) / (ONE + z[0] + lower * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(a, b)| a - fact * b).collect()
}

/// Periodic second difference `c[i+1] - 2c[i] + c[i-1] = rhs[i]` (mean-free data,
/// mean-free solution).
fn solve_periodic_singular(rhs: &[Complex64]) -> Vec<Complex64> {
    let n = rhs.len();
    let mean = rhs.iter().sum::<Complex64>() / n as f64;
    // first differences e[i] = c[i+1] - c[i] satisfy e[i] - e[i-1] = rhs[i]
    let mut e = vec![ZERO; n];
    let mut acc = ZERO;
    for i in 0..n {
        acc += rhs[i] - mean;
        e[i] = acc;
    }
    let e_mean = e.iter().sum::<Complex64>() / n as f64;
    let mut c = vec![ZERO; n];
    for i in 1..n {
        c[i] = c[i - 1] + e[i - 1] - e_mean;
    }
    let c_mean = c.iter().sum::<Complex64>() / n as f64;
    c.iter().map(|v| v - c_mean).collect()
}

/// Result of a bi-periodic solve together with the mean that had to be removed.
#[derive(Clone, Debug)]
pub struct PoissonSolution {
    pub xi: Grid,
    pub removed_mean: f64,
}

impl PoissonSolution {
    /// Diagnostic flag: the data were not compatible with a periodic solution.
    pub fn mean_warning(&self) -> bool {
        self.removed_mean.abs() > 1e-8
    }
}

/// Solve `(L - mu) xi = rhs`. For `mu = 0` on the bi-periodic stack the mean of
/// `rhs` is removed first and the returned `xi` has zero mean.
pub fn solve_shifted(model: &Model, rhs: &Grid, mu: f64) -> PoissonSolution {
    let rows = rhs.rows;
    let cols = rhs.cols;
    let sp = &model.spectral;
    let dz = model.dz();
    let dz2 = dz * dz;
    let mut removed_mean = 0.0;
    let singular_possible = mu == 0.0 && model.kind() == StackKind::Biperiodic;
    let mut data = rhs.clone();
    if singular_possible {
        removed_mean = data.mean();
        data.data.iter_mut().for_each(|v| *v -= removed_mean);
    }
    let spectra: Vec<Vec<Complex64>> = (0..rows).map(|i| sp.forward(data.row(i))).collect();
    let nyq = sp.nyquist();
    let s = model.geom.s;
    let mut out_spec = vec![vec![ZERO; cols]; rows];
    for j in 0..cols {
        let k = sp.wavenumber(j);
        let k2 = if j == nyq { 0.0 } else { k * k };
        let col: Vec<Complex64> = spectra.iter().map(|r| r[j] * dz2).collect();
        let base = Complex64::new(-2.0 - (k2 + mu) * dz2, 0.0);
        let sol = match model.kind() {
            StackKind::FiniteLayer => {
                let mut diag = vec![base; rows];
                diag[0] -= ONE;
                diag[rows - 1] -= ONE;
                solve_tridiagonal(&diag, ONE, &col)
            }
            StackKind::Biperiodic => {
                let (up, down) = if j == nyq {
                    let c = Complex64::new((k * s).cos(), 0.0);
                    (c, c)
                } else {
                    (Complex64::from_polar(1.0, -k * s), Complex64::from_polar(1.0, k * s))
                };
                let singular = singular_possible && k2 == 0.0 && (up - ONE).norm() < 1e-14;
                if singular {
                    solve_periodic_singular(&col)
                } else {
                    let diag = vec![base; rows];
                    solve_cyclic(&diag, down, up, &col)
                }
            }
        };
        for (i, v) in sol.into_iter().enumerate() {
            out_spec[i][j] = v;
        }
    }
    let mut xi = Grid::zeros(rows, cols);
    for (i, spec) in out_spec.into_iter().enumerate() {
        xi.set_row(i, &sp.inverse(spec));
    }
    PoissonSolution { xi, removed_mean }
}

/// `Laplacian(xi) = rhs` with the closure of the model's stack kind.
pub fn solve_periodic_poisson(model: &Model, rhs: &Grid) -> PoissonSolution {
    solve_shifted(model, rhs, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Discretization, LatticeGeometry, ModelParams};
    use std::f64::consts::PI;

    fn model(kind: StackKind, s: f64, n: usize) -> Model {
        let params = ModelParams::new(1.0, 2.0 * PI, 0.5, 0.1).unwrap();
        let geom = LatticeGeometry::build(n, s, 1, &params, kind).unwrap();
        Model::new(params, geom, Discretization::new(16, 6).unwrap()).unwrap()
    }

    fn band_limited(model: &Model, seed: u64) -> Grid {
        let mut g = Grid::zeros(model.rows(), model.mx());
        let x = model.x_grid();
        let q = model.geom.q;
        for i in 0..g.rows {
            let row: Vec<f64> = x
                .iter()
                .map(|&x| {
                    let t = (seed as f64 + 1.0) * 0.37 + i as f64 * 0.61;
                    (PI * x / q + t).sin() + 0.3 * (3.0 * PI * x / q - 2.0 * t).cos() + 0.1 * t.sin()
                })
                .collect();
            g.set_row(i, &row);
        }
        g
    }

    fn max_diff(a: &Grid, b: &Grid) -> f64 {
        a.data.iter().zip(&b.data).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn cyclic_matches_dense() {
        let n = 7;
        let diag: Vec<Complex64> = (0..n).map(|i| Complex64::new(-2.3 - 0.1 * i as f64, 0.2)).collect();
        let lower = Complex64::from_polar(1.0, 0.4);
        let upper = Complex64::from_polar(1.0, -0.4);
        let rhs: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0 - i as f64)).collect();
        let x = solve_cyclic(&diag, lower, upper, &rhs);
        let mut dense = nalgebra::DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            dense[(i, i)] = diag[i];
            if i + 1 < n {
                dense[(i, i + 1)] = ONE;
                dense[(i + 1, i)] = ONE;
            }
        }
        dense[(0, n - 1)] = lower;
        dense[(n - 1, 0)] = upper;
        let b = nalgebra::DVector::from_vec(rhs);
        let want = dense.lu().solve(&b).unwrap();
        for i in 0..n {
            assert!((x[i] - want[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let m = model(StackKind::Biperiodic, 0.3, 2);
        let sol = solve_periodic_poisson(&m, &Grid::zeros(m.rows(), m.mx()));
        assert_eq!(sol.xi.sup_norm(), 0.0);
    }

    #[test]
    fn analytic_eigenfunction() {
        let m = model(StackKind::Biperiodic, 0.0, 1);
        let q = m.geom.q;
        let mut rhs = Grid::zeros(m.rows(), m.mx());
        let row: Vec<f64> = m.x_grid().iter().map(|x| (PI * x / q).cos()).collect();
        for i in 0..rhs.rows {
            rhs.set_row(i, &row);
        }
        let sol = solve_periodic_poisson(&m, &rhs);
        let eig = -(PI / q) * (PI / q);
        for i in 0..rhs.rows {
            for (a, b) in sol.xi.row(i).iter().zip(&row) {
                assert!((a - b / eig).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn round_trip_both_kinds() {
        for (kind, s) in [(StackKind::Biperiodic, 0.37), (StackKind::Biperiodic, 0.0), (StackKind::FiniteLayer, 0.0)] {
            let m = model(kind, s, 3);
            let mut rhs = band_limited(&m, 3);
            if kind == StackKind::Biperiodic {
                let mean = rhs.mean();
                rhs.data.iter_mut().for_each(|v| *v -= mean);
            }
            let sol = solve_periodic_poisson(&m, &rhs);
            assert!(!sol.mean_warning());
            let back = m.laplacian(&sol.xi);
            assert!(max_diff(&back, &rhs) <= 1e-10 * rhs.sup_norm(), "{kind:?}");
        }
    }

    #[test]
    fn shifted_operator_round_trip() {
        let m = model(StackKind::Biperiodic, 0.21, 2);
        let rhs = band_limited(&m, 5);
        let sol = solve_shifted(&m, &rhs, 1.7);
        let mut back = m.laplacian(&sol.xi);
        for (b, x) in back.data.iter_mut().zip(&sol.xi.data) {
            *b -= 1.7 * x;
        }
        assert!(max_diff(&back, &rhs) < 1e-10 * rhs.sup_norm());
    }

    #[test]
    fn mean_is_reported() {
        let m = model(StackKind::Biperiodic, 0.0, 1);
        let mut rhs = Grid::zeros(m.rows(), m.mx());
        rhs.data.iter_mut().for_each(|v| *v = 0.5);
        let sol = solve_periodic_poisson(&m, &rhs);
        assert!(sol.mean_warning());
        assert!((sol.removed_mean - 0.5).abs() < 1e-14);
    }
}
