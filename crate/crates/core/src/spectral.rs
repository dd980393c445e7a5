//! Fourier tools for real samples of a `2q`-periodic function on a uniform grid.
//!
//! Every operator here maps real arrays to real arrays. First derivatives drop
//! the Nyquist mode, so `deriv` is antisymmetric and `deriv2 == deriv∘deriv`.
//! Shifts keep `cos(k s)` on the Nyquist mode, which makes `shift(-s)` the exact
//! transpose of `shift(s)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct Spectral {
    n: usize,
    period: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral")
            .field("n", &self.n)
            .field("period", &self.period)
            .finish()
    }
}

impl Spectral {
    pub fn new(n: usize, period: f64) -> Self {
        assert!(n >= 2 && n % 2 == 0, "grid size must be even");
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let wavenumbers = (0..n)
            .map(|j| {
                let signed = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                2.0 * PI * signed / period
            })
            .collect();
        Spectral {
            n,
            period,
            forward,
            inverse,
            wavenumbers,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dx(&self) -> f64 {
        self.period / self.n as f64
    }

    /// Grid abscissae `x_j = j * dx`.
    pub fn grid(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n).map(|j| j as f64 * dx).collect()
    }

    /// Signed wavenumber of mode `j` (`2π j / period`, Nyquist taken positive).
    pub fn wavenumber(&self, j: usize) -> f64 {
        self.wavenumbers[j]
    }

    pub fn nyquist(&self) -> usize {
        self.n / 2
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Inverse of [`Spectral::forward`], returning the real part.
    pub fn inverse(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.inverse.process(&mut spec);
        let scale = 1.0 / self.n as f64;
        spec.iter().map(|c| c.re * scale).collect()
    }

    fn apply(&self, data: &[f64], mult: impl Fn(usize, f64) -> Complex64) -> Vec<f64> {
        let mut spec = self.forward(data);
        for (j, c) in spec.iter_mut().enumerate() {
            *c *= mult(j, self.wavenumbers[j]);
        }
        self.inverse(spec)
    }

    pub fn deriv(&self, data: &[f64]) -> Vec<f64> {
        let nyq = self.nyquist();
        self.apply(data, |j, k| {
            if j == nyq {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k)
            }
        })
    }

    pub fn deriv2(&self, data: &[f64]) -> Vec<f64> {
        let nyq = self.nyquist();
        self.apply(data, |j, k| {
            if j == nyq {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(-k * k, 0.0)
            }
        })
    }

    /// Samples of `g(x + s)` by trigonometric interpolation.
    pub fn shift(&self, data: &[f64], s: f64) -> Vec<f64> {
        if s == 0.0 {
            return data.to_vec();
        }
        let nyq = self.nyquist();
        self.apply(data, |j, k| {
            if j == nyq {
                Complex64::new((k * s).cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, k * s)
            }
        })
    }

    /// Mean-free antiderivative of the mean-free part of `data` (Nyquist dropped).
    pub fn antiderivative(&self, data: &[f64]) -> Vec<f64> {
        let nyq = self.nyquist();
        self.apply(data, |j, k| {
            if j == 0 || j == nyq {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, -1.0 / k)
            }
        })
    }

    /// Evaluate the trigonometric interpolant at an arbitrary `x`.
    pub fn eval(&self, data: &[f64], x: f64) -> f64 {
        let spec = self.forward(data);
        self.eval_spectrum(&spec, x)
    }

    pub fn eval_spectrum(&self, spec: &[Complex64], x: f64) -> f64 {
        let nyq = self.nyquist();
        let mut acc = spec[0].re;
        for j in 1..nyq {
            let k = self.wavenumbers[j];
            acc += 2.0 * (spec[j] * Complex64::from_polar(1.0, k * x)).re;
        }
        acc += spec[nyq].re * (self.wavenumbers[nyq] * x).cos();
        acc / self.n as f64
    }

    /// Resample onto a finer (or coarser) uniform grid of `m` points.
    pub fn resample(&self, data: &[f64], m: usize) -> Vec<f64> {
        let spec = self.forward(data);
        let target = Spectral::new(m, self.period);
        let mut out = vec![Complex64::new(0.0, 0.0); m];
        let keep = self.nyquist().min(target.nyquist());
        let ratio = m as f64 / self.n as f64;
        for j in 0..keep {
            out[j] = spec[j] * ratio;
            if j > 0 {
                out[m - j] = spec[self.n - j] * ratio;
            }
        }
        if m > self.n {
            // split the source Nyquist mode symmetrically
            let half = spec[self.nyquist()] * (0.5 * ratio);
            out[self.nyquist()] = half;
            out[m - self.nyquist()] = half;
        } else {
            out[keep] = Complex64::new(spec[keep].re * ratio, 0.0);
        }
        target.inverse(out)
    }

    pub fn mean(data: &[f64]) -> f64 {
        data.iter().sum::<f64>() / data.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(sp: &Spectral, f: impl Fn(f64) -> f64) -> Vec<f64> {
        sp.grid().into_iter().map(f).collect()
    }

    #[test]
    fn derivative_of_trig_polynomial_is_exact() {
        let sp = Spectral::new(32, 3.0);
        let k = 2.0 * PI / 3.0;
        let g = sample(&sp, |x| (2.0 * k * x).sin() + 0.5 * (k * x).cos());
        let dg = sp.deriv(&g);
        for (x, d) in sp.grid().into_iter().zip(dg) {
            let want = 2.0 * k * (2.0 * k * x).cos() - 0.5 * k * (k * x).sin();
            assert!((d - want).abs() < 1e-11);
        }
    }

    #[test]
    fn shift_transpose_is_reverse_shift() {
        let sp = Spectral::new(16, 2.0);
        let a: Vec<f64> = (0..16).map(|i| ((i * 7 % 5) as f64).sin()).collect();
        let b: Vec<f64> = (0..16).map(|i| ((i * 3 % 7) as f64).cos()).collect();
        let s = 0.3137;
        let lhs: f64 = sp.shift(&a, s).iter().zip(&b).map(|(x, y)| x * y).sum();
        let rhs: f64 = a.iter().zip(sp.shift(&b, -s)).map(|(x, y)| x * y).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn antiderivative_inverts_derivative() {
        let sp = Spectral::new(24, 5.0);
        let g = sample(&sp, |x| (2.0 * PI * x / 5.0).cos() + 0.2 * (6.0 * PI * x / 5.0).sin());
        let back = sp.antiderivative(&sp.deriv(&g));
        for (a, b) in g.iter().zip(back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn eval_reproduces_off_grid_values() {
        let sp = Spectral::new(16, 2.0);
        let g = sample(&sp, |x| (PI * x).sin() + (3.0 * PI * x).cos());
        let x = 0.123;
        let want = (PI * x).sin() + (3.0 * PI * x).cos();
        assert!((sp.eval(&g, x) - want).abs() < 1e-12);
    }

    #[test]
    fn resample_band_limited() {
        let sp = Spectral::new(16, 2.0);
        let g = sample(&sp, |x| (PI * x).sin() + 0.1);
        let fine = sp.resample(&g, 64);
        let fsp = Spectral::new(64, 2.0);
        for (x, v) in fsp.grid().into_iter().zip(fine) {
            assert!((v - ((PI * x).sin() + 0.1)).abs() < 1e-12);
        }
    }
}
