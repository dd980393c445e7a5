//! Preconditioned limited-memory quasi-Newton minimization of the discrete
//! energy, continuation in the coupling, and comparison with the expansion.

use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{expansion_constants, first_order_configuration, fit_phase, wrap_angle, PhaseVector};
use crate::energy::{energy_and_gradient, EnergyBreakdown};
use crate::error::{LdError, Result};
use crate::fields::observables;
use crate::lattice::{Configuration, Model, StackKind};
use crate::poisson::{solve_periodic_poisson, solve_shifted};

const ARMIJO: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub memory: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 20_000,
            grad_tol: 1e-9,
            memory: 10,
            seed: 1,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) || self.max_iters == 0 || self.memory == 0 {
            return Err(LdError::InvalidParams(
                "solver options need grad_tol > 0, max_iters >= 1, memory >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of a run; `config` is the best iterate found even without convergence.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Minimized {
    pub config: Configuration,
    pub energy: EnergyBreakdown,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    /// Energies of the accepted iterates, starting with the initial one.
    pub trace: Vec<f64>,
}

impl Minimized {
    pub fn into_result(self, at_r: Option<f64>) -> Result<Minimized> {
        if self.converged {
            Ok(self)
        } else {
            Err(LdError::NoConvergence {
                iterations: self.iterations,
                grad_norm: self.grad_norm,
                at_r,
            })
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Block-diagonal approximation of the inverse Hessian near the manifold.
struct Preconditioner<'a> {
    model: &'a Model,
}

impl Preconditioner<'_> {
    fn apply(&self, g: &Configuration) -> Configuration {
        let model = self.model;
        let sp = &model.spectral;
        let prm = &model.params;
        let k2inv = 1.0 / (prm.kappa * prm.kappa);
        let pw = prm.p * model.dx();
        let nyq = sp.nyquist();
        let scale_rows = |row: &[f64], weight: &dyn Fn(f64) -> f64| -> Vec<f64> {
            let mut spec = sp.forward(row);
            for (j, c) in spec.iter_mut().enumerate() {
                let k = sp.wavenumber(j);
                let wgt = weight(k);
                *c = if j == nyq || wgt == 0.0 { Complex64::new(0.0, 0.0) } else { *c / wgt };
            }
            sp.inverse(spec)
        };
        let mut out = g.clone();
        for slot in 0..g.f.len() {
            out.f[slot] = scale_rows(&g.f[slot], &|k| pw * (4.0 + 2.0 * k * k * k2inv));
            out.chi[slot] = scale_rows(&g.chi[slot], &|k| pw * 2.0 * k * k * k2inv);
        }
        let q = model.geom.q;
        let coupling = 2.0 * prm.p * q * prm.r.max(1e-2);
        out.alpha.iter_mut().for_each(|a| *a /= coupling);
        out.d /= coupling;
        out.omega /= g.f.len() as f64 * prm.p * k2inv / q;

        let weight = 2.0 * k2inv * model.dx() * model.dz();
        let mut rhs = g.xi.clone();
        rhs.data.iter_mut().for_each(|v| *v /= weight);
        let inner = solve_shifted(model, &rhs, 1.0).xi;
        out.xi = solve_periodic_poisson(model, &inner).xi;
        model.project(&mut out);
        out
    }
}

struct Objective<'a> {
    model: &'a Model,
    template: Configuration,
}

impl Objective<'_> {
    fn eval(&self, x: &[f64]) -> (f64, Vec<f64>, EnergyBreakdown) {
        let cfg = self.template.from_vec_like(x);
        if cfg.min_modulus() <= 0.0 {
            return (f64::INFINITY, vec![], EnergyBreakdown::default());
        }
        let (e, mut g) = energy_and_gradient(self.model, &cfg);
        self.model.project(&mut g);
        (e.total, g.to_vec(), e)
    }

    fn precondition(&self, v: &[f64]) -> Vec<f64> {
        Preconditioner { model: self.model }
            .apply(&self.template.from_vec_like(v))
            .to_vec()
    }
}

/// Limited-memory quasi-Newton descent with backtracking line search. Steps
/// that drive any `f` sample to zero or below are rejected.
pub fn minimize_energy(model: &Model, initial: &Configuration, opts: &SolverOptions) -> Result<Minimized> {
    opts.validate()?;
    model.check(initial)?;
    let mut start = initial.clone();
    model.project(&mut start);
    let obj = Objective {
        model,
        template: start.clone(),
    };
    let mut x = start.to_vec();
    let (mut fx, mut g, mut parts) = obj.eval(&x);
    if !fx.is_finite() {
        return Err(LdError::InvalidParams("initial modulus must be positive".into()));
    }
    let mut trace = vec![fx];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        if sup(&g) <= opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut dir = two_loop(&obj, &history, &g);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            history.clear();
            dir = obj.precondition(&g).iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
        }
        let gnorm = sup(&g);
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-20 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(x, d)| x + t * d).collect();
            let (ft, gt, pt) = obj.eval(&trial);
            if ft.is_finite() {
                let armijo = ft <= fx + ARMIJO * t * slope;
                // near convergence the decrease drowns in rounding; accept on gradient decrease
                let roundoff = ft - fx <= 1e-13 * fx.abs() && sup(&gt) < gnorm;
                if armijo || roundoff {
                    accepted = Some((trial, ft, gt, pt));
                    break;
                }
            }
            t *= BACKTRACK;
        }
        let Some((xn, fnew, gn, pn)) = accepted else {
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 && sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        fx = fnew;
        g = gn;
        parts = pn;
        trace.push(fx);
    }
    Ok(Minimized {
        config: obj.template.from_vec_like(&x),
        energy: parts,
        iterations,
        grad_norm: sup(&g),
        converged: converged || sup(&g) <= opts.grad_tol,
        trace,
    })
}

fn two_loop(obj: &Objective, history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, g: &[f64]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(q, y)| *q -= a * y);
        alphas.push(a);
    }
    let mut r = obj.precondition(&q);
    if let Some((s, y, _)) = history.back() {
        let my = obj.precondition(y);
        let gamma = dot(s, y) / dot(y, &my);
        r.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &r);
        r.iter_mut().zip(s).for_each(|(r, s)| *r += (a - b) * s);
    }
    r.iter_mut().for_each(|v| *v = -*v);
    r
}

/// `f = 1`, seeded random plane offsets, then Gaussian perturbation of amplitude 0.1.
pub fn random_configuration(model: &Model, seed: u64) -> Configuration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut cfg = model.zero_configuration();
    cfg.f.iter_mut().for_each(|r| r.iter_mut().for_each(|v| *v = 1.0));
    cfg.alpha.iter_mut().for_each(|a| *a = rng.random_range(-PI..PI));
    if model.kind() == StackKind::Biperiodic {
        cfg.d = cfg.alpha[cfg.alpha.len() - 1] + model.slope(0.0, model.n()) * model.geom.s;
    }
    model.perturb(&cfg, 0.1, seed)
}

/// Independent seeded runs in parallel; the lowest energy wins, ties by seed order.
pub fn multistart(model: &Model, starts: usize, opts: &SolverOptions) -> Result<Vec<Minimized>> {
    (0..starts as u64)
        .into_par_iter()
        .map(|i| minimize_energy(model, &random_configuration(model, opts.seed.wrapping_add(i)), opts))
        .collect()
}

/// Minimize along ascending `r_list`, starting from the first-order state and
/// warm-starting each value from the previous minimizer shifted by the
/// first-order increment.
pub fn continuation_in_r(model: &Model, delta: &PhaseVector, r_list: &[f64], opts: &SolverOptions) -> Result<Vec<Minimized>> {
    if r_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LdError::InvalidParams("r values must be strictly ascending".into()));
    }
    let mut out: Vec<Minimized> = Vec::with_capacity(r_list.len());
    for &r in r_list {
        let m = model.with_r(r);
        let start = match out.last() {
            None => first_order_configuration(&m, delta, r)?,
            Some(prev) => {
                let r_prev = r_list[out.len() - 1];
                let a = first_order_configuration(&m, delta, r)?.to_vec();
                let b = first_order_configuration(&m, delta, r_prev)?.to_vec();
                let x: Vec<f64> = prev
                    .config
                    .to_vec()
                    .iter()
                    .zip(a.iter().zip(&b))
                    .map(|(x, (a, b))| x + a - b)
                    .collect();
                prev.config.from_vec_like(&x)
            }
        };
        if r == 0.0 {
            let (e, _) = energy_and_gradient(&m, &start);
            out.push(Minimized {
                config: start,
                energy: e,
                iterations: 0,
                grad_norm: 0.0,
                converged: true,
                trace: vec![e.total],
            });
            continue;
        }
        out.push(minimize_energy(&m, &start, opts)?.into_result(Some(r))?);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub r_values: Vec<f64>,
    pub measured_energy_per_area: Vec<f64>,
    #[serde(rename = "fitted_C0_plus_C1F")]
    pub fitted: f64,
    #[serde(rename = "predicted_C0_plus_C1F")]
    pub predicted: f64,
    pub field_sup_errors: Vec<f64>,
    pub delta_extracted: PhaseVector,
    /// `(1 - min f) / sqrt(r)` per state.
    pub modulus_constants: Vec<f64>,
}

impl ComparisonReport {
    pub fn relative_error(&self) -> f64 {
        ((self.fitted - self.predicted) / self.predicted).abs()
    }
}

/// Gap phases `theta_n` from a least-squares fit of `j_z` against `sin(theta + H p x)`.
pub fn extract_phases(model: &Model, cfg: &Configuration) -> Vec<f64> {
    let fs = observables(model, cfg);
    fs.jz.iter().map(|jz| fit_phase(&fs.x, jz, model.params.hp()).1).collect()
}

/// Energies per area, Richardson-extrapolated second-order constant,
/// extracted phases (from the smallest `r`) and field deviations.
pub fn compare_with_asymptotics(model: &Model, states: &[(f64, Configuration)]) -> Result<ComparisonReport> {
    if states.len() < 2 {
        return Err(LdError::InsufficientData {
            needed: 2,
            got: states.len(),
        });
    }
    let expansion = expansion_constants(model)?;
    let area = model.geom.area(&model.params);
    let prm = &model.params;
    let a = prm.hp();
    let x = model.x_grid();
    let mut r_values = Vec::new();
    let mut measured = Vec::new();
    let mut field_sup_errors = Vec::new();
    let mut modulus_constants = Vec::new();
    let mut theta_first = None;
    for (r, cfg) in states {
        let m = model.with_r(*r);
        let (e, _) = energy_and_gradient(&m, cfg);
        r_values.push(*r);
        measured.push(e.total / area);
        let theta = extract_phases(&m, cfg);
        let fs = observables(&m, cfg);
        let g = prm.kappa * prm.kappa / (2.0 * prm.field);
        let mut worst = 0.0_f64;
        for gap in 1..=m.n() {
            let pred: Vec<f64> = x.iter().map(|x| prm.field - r * g * (theta[gap - 1] + a * x).cos()).collect();
            for i in m.gap_rows(gap) {
                for (h, p) in fs.h.row(i).iter().zip(&pred) {
                    worst = worst.max((h - p).abs());
                }
            }
        }
        field_sup_errors.push(worst);
        modulus_constants.push((1.0 - cfg.min_modulus()) / r.sqrt());
        if theta_first.is_none() {
            theta_first = Some(theta);
        }
    }
    let fitted = richardson(&r_values, &measured);
    let theta = theta_first.expect("at least two states");
    let interior: Vec<f64> = theta[1..].iter().map(|t| wrap_angle(t - theta[0])).collect();
    let delta_extracted = PhaseVector::from_interior(model, &interior)?;
    Ok(ComparisonReport {
        r_values,
        measured_energy_per_area: measured,
        fitted,
        predicted: expansion.c0 + expansion.c1 * expansion.f,
        field_sup_errors,
        delta_extracted,
        modulus_constants,
    })
}

/// Limit as `r -> 0` of `(e(r) - r) / r^2`, assumed affine in `r`: exact
/// elimination for two points, least-squares line for more.
fn richardson(r: &[f64], e: &[f64]) -> f64 {
    let y: Vec<f64> = r.iter().zip(e).map(|(r, e)| (e - r) / (r * r)).collect();
    let n = r.len() as f64;
    let (mr, my) = (r.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = r.iter().zip(&y).map(|(r, y)| (r - mr) * (y - my)).sum();
    let sxx: f64 = r.iter().map(|r| (r - mr).powi(2)).sum();
    my - sxy / sxx * mr
}
