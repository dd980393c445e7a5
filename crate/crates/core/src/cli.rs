//! Command-line front end. A run is described by one JSON document
//! ([`RunConfig`]); command-line flags override its scalar entries.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::asymptotics::{expansion_constants, first_order_configuration, predicted_fields, r2_coefficient, PhaseVector};
use crate::energy::el_residuals;
use crate::error::{LdError, Result};
use crate::fields::observables;
use crate::frustration::{brute_force_f, classify_optimality, minimize_f, MultiStartOptions, Optimality};
use crate::io::{checkpoint_header, fmt_num, write_checkpoint, write_csv, write_fields, write_json, Cell};
use crate::lattice::{Admissibility, Discretization, LatticeGeometry, Model, ModelParams, StackKind, Winding};
use crate::minimize::{compare_with_asymptotics, continuation_in_r, minimize_energy, random_configuration, SolverOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub kappa: f64,
    #[serde(rename = "H")]
    pub field: f64,
    pub p: f64,
    pub r: f64,
    pub n_planes: usize,
    /// Horizontal shift per period; `s_over_q1` takes precedence when set.
    pub s: f64,
    pub s_over_q1: Option<f64>,
    pub m: i64,
    /// Explicit period, for geometries that need not be admissible (winding `k_n = n`).
    pub q: Option<f64>,
    pub kind: StackKind,
    #[serde(rename = "Mx")]
    pub mx: usize,
    #[serde(rename = "Mz")]
    pub mz: usize,
    pub solver: SolverOptions,
    /// Interior gap phases `delta_2..delta_N`; defaults to the reduced minimizer.
    pub delta: Option<Vec<f64>>,
    pub r_values: Vec<f64>,
    pub n_max: usize,
    pub s_points: usize,
    pub brute_force_points: Option<usize>,
    pub starts: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            kappa: 1.0,
            field: 2.0 * PI,
            p: 0.5,
            r: 1e-3,
            n_planes: 1,
            s: 0.0,
            s_over_q1: None,
            m: 1,
            q: None,
            kind: StackKind::Biperiodic,
            mx: 64,
            mz: 8,
            solver: SolverOptions::default(),
            delta: None,
            r_values: vec![1e-3, 2e-3, 4e-3],
            n_max: 4,
            s_points: 12,
            brute_force_points: None,
            starts: 32,
        }
    }
}

impl RunConfig {
    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.kappa, self.field, self.p, self.r)
    }

    pub fn shift(&self, params: &ModelParams) -> f64 {
        self.s_over_q1.map_or(self.s, |t| t * params.q1())
    }

    pub fn model(&self) -> Result<Model> {
        let params = self.params()?;
        let s = self.shift(&params);
        let geom = match self.q {
            Some(q) => LatticeGeometry::custom(self.n_planes, s, q, Winding::Linear(1), self.kind)?,
            None => LatticeGeometry::build(self.n_planes, s, self.m, &params, self.kind)?,
        };
        Model::new(params, geom, Discretization::new(self.mx, self.mz)?)
    }

    /// Gap phases from the document, or the reduced-problem minimizer.
    pub fn phases(&self, model: &Model) -> Result<PhaseVector> {
        match &self.delta {
            Some(interior) => PhaseVector::from_interior(model, interior),
            None => match model.kind() {
                StackKind::Biperiodic => {
                    let hps = model.params.hp() * model.geom.s;
                    let best = minimize_f(model.n(), hps, &MultiStartOptions::default());
                    PhaseVector::from_interior(model, &best.delta.delta[1..model.n()])
                }
                StackKind::FiniteLayer => Ok(PhaseVector::staggered(model)),
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ld-lattice", version, about = "Periodic Josephson vortex lattices in layered superconductors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Admissibility, flux and commensurability of a geometry
    Geometry(CommonArgs),
    /// Minimize the energy and write the state and its fields
    Minimize(CommonArgs),
    /// Expansion constants and predicted energy
    Asymptotic(CommonArgs),
    /// Scan of the reduced problem over N and s
    Frustration(CommonArgs),
    /// Continuation in r and comparison with the expansion
    Sweep(CommonArgs),
    /// Fields predicted to first order in r
    Export(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Geometry(_) => "geometry",
            Command::Minimize(_) => "minimize",
            Command::Asymptotic(_) => "asymptotic",
            Command::Frustration(_) => "frustration",
            Command::Sweep(_) => "sweep",
            Command::Export(_) => "export",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Geometry(a)
            | Command::Minimize(a)
            | Command::Asymptotic(a)
            | Command::Frustration(a)
            | Command::Sweep(a)
            | Command::Export(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; all written paths are relative to it
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long = "H")]
    pub field: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long = "N")]
    pub n_planes: Option<usize>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub s_over_q1: Option<f64>,
    #[arg(long)]
    pub m: Option<i64>,
    #[arg(long)]
    pub q: Option<f64>,
    /// biperiodic or finite_layer
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long = "Mx")]
    pub mx: Option<usize>,
    #[arg(long = "Mz")]
    pub mz: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub s_points: Option<usize>,
}

pub fn load_config(command: &str, args: &CommonArgs) -> Result<RunConfig> {
    let mut cfg: RunConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| LdError::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| LdError::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(c) = &cfg.command {
        if c != command {
            return Err(LdError::Config(format!("config is for command '{c}', not '{command}'")));
        }
    }
    cfg.command = Some(command.to_string());
    macro_rules! set {
        ($($flag:ident => $field:expr),* $(,)?) => {
            $(if let Some(v) = args.$flag.clone() { $field = v; })*
        };
    }
    set!(kappa => cfg.kappa, field => cfg.field, p => cfg.p, r => cfg.r, n_planes => cfg.n_planes, s => cfg.s,
         m => cfg.m, mx => cfg.mx, mz => cfg.mz, n_max => cfg.n_max, s_points => cfg.s_points,
         max_iters => cfg.solver.max_iters, grad_tol => cfg.solver.grad_tol, seed => cfg.solver.seed);
    if args.s_over_q1.is_some() {
        cfg.s_over_q1 = args.s_over_q1;
    } else if args.s.is_some() {
        cfg.s_over_q1 = None;
    }
    if args.q.is_some() {
        cfg.q = args.q;
    }
    if let Some(kind) = &args.kind {
        cfg.kind = serde_json::from_value(serde_json::Value::String(kind.clone()))
            .map_err(|_| LdError::Config(format!("unknown stack kind '{kind}'")))?;
    }
    cfg.solver.validate().map_err(|e| LdError::Config(e.to_string()))?;
    Ok(cfg)
}

/// Exit status of a failed run: 2 for non-convergence, 1 otherwise.
pub fn exit_code(err: &LdError) -> i32 {
    match err {
        LdError::NoConvergence { .. } => 2,
        _ => 1,
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let args = cli.command.args();
    let cfg = load_config(cli.command.name(), args)?;
    let out = args.out.as_path();
    fs::create_dir_all(out)?;
    write_json(&out.join("run_config.json"), &cfg)?;
    match &cli.command {
        Command::Geometry(_) => cmd_geometry(&cfg, out),
        Command::Minimize(_) => cmd_minimize(&cfg, out),
        Command::Asymptotic(_) => cmd_asymptotic(&cfg, out),
        Command::Frustration(_) => cmd_frustration(&cfg, out),
        Command::Sweep(_) => cmd_sweep(&cfg, out),
        Command::Export(_) => cmd_export(&cfg, out),
    }
}

#[derive(Serialize)]
struct GeometryReport {
    admissible: bool,
    m: Option<i64>,
    q: f64,
    flux_index: i64,
    mean_field: f64,
    optimality: Option<Optimality>,
}

pub fn cmd_geometry(cfg: &RunConfig, out: &Path) -> Result<()> {
    let model = cfg.model()?;
    let prm = &model.params;
    let geom = &model.geom;
    let class = geom.classify(prm);
    let k = geom.flux_index();
    let optimality = (model.kind() == StackKind::Biperiodic).then(|| classify_optimality(model.n(), geom.s, prm));
    match class {
        Admissibility::Admissible(m) => println!("admissible, m={m}, flux 2pi*{k}"),
        Admissibility::Inadmissible => println!("inadmissible: H p q / pi = {} is not a valid index", prm.hp() * geom.q / PI),
    }
    println!("q = {}, K = {k}, <h> = {}", fmt_num(geom.q), fmt_num(geom.mean_field(prm)));
    match optimality {
        Some(Optimality::OptimalEven) => println!("commensurate-optimal (even case)"),
        Some(Optimality::OptimalOdd) => println!("commensurate-optimal (odd case)"),
        Some(Optimality::Frustrated) => println!("frustrated"),
        None => {}
    }
    write_json(
        &out.join("geometry.json"),
        &GeometryReport {
            admissible: matches!(class, Admissibility::Admissible(_)),
            m: match class {
                Admissibility::Admissible(m) => Some(m),
                Admissibility::Inadmissible => None,
            },
            q: geom.q,
            flux_index: k,
            mean_field: geom.mean_field(prm),
            optimality,
        },
    )
}

#[derive(Serialize)]
struct MinimizeSummary {
    converged: bool,
    iterations: usize,
    grad_norm: f64,
    energy: f64,
    energy_per_area: f64,
    min_modulus: f64,
    residuals: Vec<(&'static str, f64)>,
}

pub fn cmd_minimize(cfg: &RunConfig, out: &Path) -> Result<()> {
    let model = cfg.model()?;
    let start = match model.geom.classify(&model.params) {
        Admissibility::Admissible(_) if cfg.delta.is_some() || model.kind() == StackKind::Biperiodic => {
            let delta = cfg.phases(&model)?;
            first_order_configuration(&model, &delta, cfg.r)?
        }
        _ => random_configuration(&model, cfg.solver.seed),
    };
    let result = minimize_energy(&model, &start, &cfg.solver)?;
    let area = model.geom.area(&model.params);
    let summary = MinimizeSummary {
        converged: result.converged,
        iterations: result.iterations,
        grad_norm: result.grad_norm,
        energy: result.energy.total,
        energy_per_area: result.energy.total / area,
        min_modulus: result.config.min_modulus(),
        residuals: el_residuals(&model, &result.config).rows().to_vec(),
    };
    println!(
        "e(r) = {}  gradient = {:e}  iterations = {}{}",
        fmt_num(summary.energy_per_area),
        result.grad_norm,
        result.iterations,
        if result.converged { "" } else { "  (not converged)" }
    );
    let header = checkpoint_header(&model, &cfg.solver, result.iterations, result.energy);
    write_checkpoint(out, "checkpoint", &header, &result.config)?;
    write_fields(out, "", &observables(&model, &result.config))?;
    write_json(&out.join("summary.json"), &summary)?;
    result.into_result(Some(cfg.r)).map(|_| ())
}

#[derive(Serialize)]
struct AsymptoticReport {
    expansion: crate::asymptotics::ExpansionReport,
    delta: PhaseVector,
    r: f64,
    predicted_energy: f64,
    predicted_energy_per_area: f64,
    quadrature_per_area: f64,
}

pub fn cmd_asymptotic(cfg: &RunConfig, out: &Path) -> Result<()> {
    let model = cfg.model()?;
    let expansion = expansion_constants(&model)?;
    let delta = cfg.phases(&model)?;
    let area = model.geom.area(&model.params);
    let quad = r2_coefficient(&model, &delta)?.total / area;
    println!(
        "C0 = {}  C1 = {}  F = {}  C0 + C1 F = {}",
        fmt_num(expansion.c0),
        fmt_num(expansion.c1),
        fmt_num(expansion.f),
        fmt_num(expansion.c0 + expansion.c1 * expansion.f)
    );
    println!("predicted e({}) = {}", cfg.r, fmt_num(expansion.predicted_per_area(cfg.r)));
    let report = AsymptoticReport {
        predicted_energy: expansion.predicted_energy(cfg.r),
        predicted_energy_per_area: expansion.predicted_per_area(cfg.r),
        expansion,
        delta,
        r: cfg.r,
        quadrature_per_area: quad,
    };
    write_json(&out.join("asymptotic.json"), &report)
}

pub fn cmd_frustration(cfg: &RunConfig, out: &Path) -> Result<()> {
    let params = cfg.params()?;
    let q1 = params.q1();
    let opts = MultiStartOptions {
        starts: cfg.starts,
        seed: cfg.solver.seed,
        ..Default::default()
    };
    let mut rows = Vec::new();
    for n in 1..=cfg.n_max {
        for i in 0..cfg.s_points {
            let s = 2.0 * q1 * i as f64 / cfg.s_points as f64;
            let hps = params.hp() * s;
            let best = minimize_f(n, hps, &opts);
            let class = classify_optimality(n, s, &params);
            let brute = match cfg.brute_force_points {
                Some(g) if n <= 4 => brute_force_f(n, hps, g)?,
                _ => f64::NAN,
            };
            rows.push(vec![
                Cell::Int(n as i64),
                Cell::Num(s),
                Cell::Num(hps),
                Cell::Num(best.value),
                Cell::Num(brute),
                Cell::Text(serde_json::to_value(class)?.as_str().unwrap_or_default().to_string()),
                Cell::Int(best.multiple as i64),
            ]);
        }
    }
    println!("{} reduced problems solved", rows.len());
    write_csv(
        &out.join("phase_diagram.csv"),
        &["N", "s", "Hps", "F", "F_brute_force", "class", "multiple"],
        &rows,
    )
}

pub fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<()> {
    let model = cfg.model()?;
    let delta = cfg.phases(&model)?;
    let states = continuation_in_r(&model, &delta, &cfg.r_values, &cfg.solver)?;
    let pairs: Vec<(f64, _)> = cfg
        .r_values
        .iter()
        .copied()
        .zip(states.into_iter().map(|s| s.config))
        .filter(|(r, _)| *r > 0.0)
        .collect();
    let report = compare_with_asymptotics(&model, &pairs)?;
    println!(
        "fitted C0 + C1 F = {}  predicted = {}  relative error = {:.3e}",
        fmt_num(report.fitted),
        fmt_num(report.predicted),
        report.relative_error()
    );
    let rows: Vec<Vec<Cell>> = (0..report.r_values.len())
        .map(|i| {
            let (r, e) = (report.r_values[i], report.measured_energy_per_area[i]);
            vec![
                Cell::Num(r),
                Cell::Num(e),
                Cell::Num(e / r),
                Cell::Num((e - r) / (r * r)),
                Cell::Num(report.field_sup_errors[i]),
            ]
        })
        .collect();
    write_csv(
        &out.join("sweep.csv"),
        &["r", "energy_per_area", "e_over_r", "r2_coefficient", "field_sup_error"],
        &rows,
    )?;
    write_json(&out.join("sweep.json"), &report)
}

pub fn cmd_export(cfg: &RunConfig, out: &Path) -> Result<()> {
    let model = cfg.model()?;
    let delta = cfg.phases(&model)?;
    write_fields(out, "predicted_", &predicted_fields(&model, &delta, cfg.r)?)?;
    println!("predicted fields written for r = {}", cfg.r);
    Ok(())
}
