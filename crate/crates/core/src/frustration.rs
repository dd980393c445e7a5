//! The reduced problem `F(N, s) = min (1/N) sum_{n=1}^N cos(delta_n - delta_{n+1})`
//! over the interior phases, with `delta_1 = 0` and `delta_{N+1} = -H p s`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{wrap_angle, PhaseVector};
use crate::error::{LdError, Result};
use crate::lattice::ModelParams;

const EQUIVALENCE_TOL: f64 = 1e-5;
const MULTIPLICITY_GAP: f64 = 1e-6;

/// `(1/N) sum_{n=1}^N cos(delta_n - delta_{n+1})` for `delta = (delta_1, ..., delta_{N+1})`.
pub fn evaluate_f(delta: &PhaseVector) -> f64 {
    let d = &delta.delta;
    let n = d.len() - 1;
    d.windows(2).map(|w| (w[0] - w[1]).cos()).sum::<f64>() / n as f64
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultiStartOptions {
    pub starts: usize,
    pub seed: u64,
    pub max_iters: usize,
}

impl Default for MultiStartOptions {
    fn default() -> Self {
        MultiStartOptions {
            starts: 32,
            seed: 0x5eed,
            max_iters: 500,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReducedMinimum {
    pub value: f64,
    pub delta: PhaseVector,
    pub multiple: bool,
}

/// Unnormalized objective `sum cos(delta_n - delta_{n+1})` over consecutive pairs,
/// its gradient and tridiagonal Hessian in the interior variables `delta_2..delta_N`.
/// `tail` is `delta_{N+1}` when the last pair is present.
struct Reduced {
    n: usize,
    tail: Option<f64>,
}

impl Reduced {
    fn full(&self, interior: &[f64]) -> Vec<f64> {
        let mut d = Vec::with_capacity(self.n + 1);
        d.push(0.0);
        d.extend_from_slice(interior);
        if let Some(t) = self.tail {
            d.push(t);
        }
        d
    }

    fn value(&self, interior: &[f64]) -> f64 {
        self.full(interior).windows(2).map(|w| (w[0] - w[1]).cos()).sum()
    }

    fn gradient(&self, interior: &[f64]) -> Vec<f64> {
        let d = self.full(interior);
        (1..=interior.len())
            .map(|k| {
                let below = (d[k - 1] - d[k]).sin();
                let above = d.get(k + 1).map_or(0.0, |next| (d[k] - next).sin());
                below - above
            })
            .collect()
    }

    /// Diagonal and super-diagonal of the Hessian.
    fn hessian(&self, interior: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.full(interior);
        let c: Vec<f64> = d.windows(2).map(|w| (w[0] - w[1]).cos()).collect();
        let m = interior.len();
        let diag = (1..=m).map(|k| -(c[k - 1] + c.get(k).copied().unwrap_or(0.0))).collect();
        let off = (1..m).map(|k| c[k]).collect();
        (diag, off)
    }

    fn descend(&self, start: Vec<f64>, max_iters: usize) -> Vec<f64> {
        let mut y = start;
        let mut val = self.value(&y);
        for _ in 0..max_iters {
            let g = self.gradient(&y);
            if g.iter().fold(0.0_f64, |m, v| m.max(v.abs())) < 1e-14 {
                break;
            }
            let (diag, off) = self.hessian(&y);
            let dir = newton_direction(&diag, &off, &g).unwrap_or_else(|| g.iter().map(|v| -v).collect());
            let mut t = 1.0;
            let mut moved = false;
            while t > 1e-12 {
                let trial: Vec<f64> = y.iter().zip(&dir).map(|(y, d)| y + t * d).collect();
                let tv = self.value(&trial);
                if tv < val {
                    y = trial;
                    val = tv;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        y
    }
}

/// `-H^{-1} g` when the tridiagonal Hessian is positive definite.
fn newton_direction(diag: &[f64], off: &[f64], g: &[f64]) -> Option<Vec<f64>> {
    let m = diag.len();
    let mut piv = vec![0.0; m];
    let mut rhs: Vec<f64> = g.iter().map(|v| -v).collect();
    for i in 0..m {
        piv[i] = diag[i] - if i > 0 { off[i - 1] * off[i - 1] / piv[i - 1] } else { 0.0 };
        if piv[i] <= 1e-12 {
            return None;
        }
        if i > 0 {
            rhs[i] -= off[i - 1] / piv[i - 1] * rhs[i - 1];
        }
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let next = if i + 1 < m { off[i] * x[i + 1] } else { 0.0 };
        x[i] = (rhs[i] - next) / piv[i];
    }
    Some(x)
}

fn wrapped_differences(delta: &[f64]) -> Vec<f64> {
    delta.windows(2).map(|w| wrap_angle(w[1] - w[0])).collect()
}

fn canonical(delta: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(delta.len());
    out.push(0.0);
    for w in wrapped_differences(delta) {
        out.push(out.last().unwrap() + w);
    }
    out
}

fn multistart(problem: &Reduced, normalization: f64, opts: &MultiStartOptions) -> ReducedMinimum {
    let m = problem.n - 1;
    if m == 0 {
        let d = problem.full(&[]);
        return ReducedMinimum {
            value: problem.value(&[]) / normalization,
            delta: PhaseVector { delta: d },
            multiple: false,
        };
    }
    let mut results: Vec<(f64, Vec<f64>)> = (0..opts.starts.max(1))
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(i as u64));
            let start: Vec<f64> = (0..m).map(|_| rng.random_range(-PI..PI)).collect();
            let y = problem.descend(start, opts.max_iters);
            let d = canonical(&problem.full(&y));
            (problem.value(&y) / normalization, d)
        })
        .collect();
    results.sort_by(|a, b| {
        let key = |v: f64| (v * 1e12).round();
        key(a.0)
            .total_cmp(&key(b.0))
            .then_with(|| a.1.iter().zip(&b.1).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal))
    });
    let (best, delta) = results[0].clone();
    let multiple = results.iter().skip(1).any(|(v, d)| {
        (v - best).abs() <= MULTIPLICITY_GAP
            && wrapped_differences(d)
                .iter()
                .zip(wrapped_differences(&delta))
                .any(|(a, b)| wrap_angle(a - b).abs() > EQUIVALENCE_TOL)
    });
    ReducedMinimum {
        value: best,
        delta: PhaseVector { delta },
        multiple,
    }
}

/// Multi-start minimization for a bi-periodic stack, given `H p s`.
pub fn minimize_f(n: usize, hps: f64, opts: &MultiStartOptions) -> ReducedMinimum {
    let problem = Reduced {
        n,
        tail: Some(-hps),
    };
    let mut out = multistart(&problem, n as f64, opts);
    // keep the prescribed boundary entry rather than its wrapped representative
    if let Some(last) = out.delta.delta.last_mut() {
        *last = -hps;
    }
    out
}

/// Minimum of the finite-stack reduced problem (no closing pair), per coupled pair.
pub fn minimize_finite_layer(n: usize, opts: &MultiStartOptions) -> ReducedMinimum {
    let problem = Reduced { n, tail: None };
    multistart(&problem, (n.max(2) - 1) as f64, opts)
}

/// Exhaustive scan of the interior phases on a uniform grid.
pub fn brute_force_f(n: usize, hps: f64, grid_points: usize) -> Result<f64> {
    if n > 4 {
        return Err(LdError::DimensionTooLarge(n));
    }
    let g = grid_points.max(1);
    let h = 2.0 * PI / g as f64;
    let cos_tab: Vec<f64> = (0..g).map(|i| (i as f64 * h).cos()).collect();
    // cos(delta_N - delta_{N+1}) with delta_N on the grid
    let tail: Vec<f64> = (0..g).map(|i| (i as f64 * h + hps).cos()).collect();
    let diff = |a: usize, b: usize| cos_tab[(a + g - b) % g];
    let best = match n {
        0 => return Err(LdError::InvalidParams("N must be at least 1".into())),
        1 => hps.cos(),
        2 => (0..g).map(|a| diff(0, a) + tail[a]).fold(f64::INFINITY, f64::min),
        3 => {
            let mut best = f64::INFINITY;
            for a in 0..g {
                let head = diff(0, a);
                for b in 0..g {
                    best = best.min(head + diff(a, b) + tail[b]);
                }
            }
            best
        }
        _ => {
            let mut best = f64::INFINITY;
            for a in 0..g {
                let head = diff(0, a);
                for b in 0..g {
                    let mid = head + diff(a, b);
                    for c in 0..g {
                        best = best.min(mid + diff(b, c) + tail[c]);
                    }
                }
            }
            best
        }
    };
    Ok(best / n as f64)
}

#[derive(Clone, Debug)]
pub struct HessianSummary {
    pub matrix: DMatrix<f64>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

/// Hessian of `sum cos(delta_n - delta_{n+1})` in `delta_2..delta_N`.
pub fn reduced_hessian(delta: &PhaseVector) -> Result<HessianSummary> {
    let d = &delta.delta;
    if d.len() < 3 {
        return Err(LdError::InvalidParams("reduced Hessian needs N >= 2".into()));
    }
    let c: Vec<f64> = d.windows(2).map(|w| (w[0] - w[1]).cos()).collect();
    let m = d.len() - 2;
    let mut matrix = DMatrix::zeros(m, m);
    for i in 0..m {
        matrix[(i, i)] = -(c[i] + c[i + 1]);
        if i + 1 < m {
            matrix[(i, i + 1)] = c[i + 1];
            matrix[(i + 1, i)] = c[i + 1];
        }
    }
    let eig = SymmetricEigen::new(matrix.clone()).eigenvalues;
    Ok(HessianSummary {
        matrix,
        min_eigenvalue: eig.min(),
        max_eigenvalue: eig.max(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimality {
    OptimalEven,
    OptimalOdd,
    Frustrated,
}

pub fn classify_optimality(n: usize, s: f64, params: &ModelParams) -> Optimality {
    let ratio = s / params.q1();
    let nearest = ratio.round();
    if (ratio - nearest).abs() > 1e-9 * nearest.abs().max(1.0) {
        return Optimality::Frustrated;
    }
    let odd_ratio = (nearest as i64).rem_euclid(2) == 1;
    match (n % 2 == 0, odd_ratio) {
        (true, false) => Optimality::OptimalEven,
        (false, true) => Optimality::OptimalOdd,
        _ => Optimality::Frustrated,
    }
}
