//! Monte-Carlo phase-transition and stability sweeps.
//!
//! Every random draw is seeded through [`derive_seed`] from the spec's master
//! seed and the cell/trial coordinates, and per-trial results land in
//! index-ordered slots before any reduction, so the output tables do not
//! depend on the number of worker threads.

mod plot;
mod table;

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::{gen_instance_with, ModelParams, NoiseModel, SensingModel, Setting};
use crate::solvers::{
    check_success, recovery_error, solve_irls_lp, solve_penalized_l1, IrlsConfig, PenalizedL1Config,
};

pub use crate::seed::derive_seed;
pub use plot::{emit_plot, render_plot, PlotKind};
pub use table::{emit_csv, read_csv, Provenance, ResultTable, Value};

pub const VERSION: &str = concat!("corrsense ", env!("CARGO_PKG_VERSION"));

// Seed-path tags. Cells are addressed by their parameters rather than grid
// position, so a cell's draws do not change when the grid is extended.
const TAG_CELL_MODEL: u64 = 1;
const TAG_CELL_TRIAL: u64 = 2;
const TAG_STABILITY_MODEL: u64 = 3;
const TAG_STABILITY_TRIAL: u64 = 4;

pub const PHASE_TRANSITION_COLUMNS: [&str; 9] = [
    "family",
    "n",
    "m",
    "s",
    "k",
    "setting",
    "lambda",
    "trials",
    "success_fraction",
];

pub const STABILITY_COLUMNS: [&str; 11] = [
    "family",
    "n",
    "m",
    "s",
    "k",
    "solver",
    "eps_amp",
    "eps_ball",
    "trials",
    "mean_error",
    "std_error",
];

pub const EPS_BALL_NOTE: &str =
    "eps_ball = eps_amp * sqrt(m) is the residual bound passed to the penalized l1 solver";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    PenalizedL1,
    IrlsLp,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::PenalizedL1 => "penalized_l1",
            SolverKind::IrlsLp => "irls_lp",
        }
    }
}

impl FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "penalized_l1" | "l1" => Ok(SolverKind::PenalizedL1),
            "irls_lp" | "irls" => Ok(SolverKind::IrlsLp),
            other => Err(Error::Argument(format!("unknown solver '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTransitionSpec {
    /// Family, dimensions and options; the seed field is replaced per cell.
    pub model: ModelParams,
    pub s_values: Vec<usize>,
    pub k_values: Vec<usize>,
    pub trials: usize,
    pub setting: Setting,
    pub lambda_reg: f64,
    pub solver_cfg: PenalizedL1Config,
    pub master_seed: u64,
}

impl PhaseTransitionSpec {
    pub fn new(model: ModelParams, s_values: Vec<usize>, k_values: Vec<usize>, trials: usize) -> Self {
        PhaseTransitionSpec {
            model,
            s_values,
            k_values,
            trials,
            setting: Setting::Gaussian,
            lambda_reg: 1.0,
            solver_cfg: PenalizedL1Config::default(),
            master_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.model.n, self.model.m);
        if self.trials == 0 {
            return Err(Error::Argument("trials must be positive".into()));
        }
        if let Some(&s) = self.s_values.iter().find(|&&s| s > n) {
            return Err(Error::Sparsity { s, len: n });
        }
        if let Some(&k) = self.k_values.iter().find(|&&k| k > m) {
            return Err(Error::Sparsity { s: k, len: m });
        }
        let mut cfg = self.solver_cfg.clone();
        cfg.lambda_reg = self.lambda_reg;
        cfg.epsilon = 0.0;
        cfg.validate()
    }

    /// Canonical text form; its hash identifies the spec in result provenance.
    pub fn canonical(&self) -> String {
        let mut out = String::from("experiment = phase_transition\n");
        for (k, v) in self.model.to_pairs() {
            if k != "model_seed" {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let c = &self.solver_cfg;
        let _ = writeln!(out, "s = {}", list(&self.s_values));
        let _ = writeln!(out, "k = {}", list(&self.k_values));
        let _ = writeln!(out, "trials = {}", self.trials);
        let _ = writeln!(out, "setting = {}", self.setting);
        let _ = writeln!(out, "lambda = {:?}", self.lambda_reg);
        let _ = writeln!(
            out,
            "max_iter = {}\ntol = {:?}\nnorm_estimate_tol = {:?}",
            c.max_iter, c.tol, c.norm_estimate_tol
        );
        let _ = writeln!(out, "seed = {}", self.master_seed);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySpec {
    pub model: ModelParams,
    pub s: usize,
    pub k: usize,
    pub eps_values: Vec<f64>,
    pub trials: usize,
    pub solvers: Vec<SolverKind>,
    pub setting: Setting,
    pub noise_model: NoiseModel,
    pub lambda_reg: f64,
    pub l1_cfg: PenalizedL1Config,
    pub irls_cfg: IrlsConfig,
    pub master_seed: u64,
}

impl StabilitySpec {
    pub fn new(model: ModelParams, s: usize, k: usize, eps_values: Vec<f64>, trials: usize) -> Self {
        StabilitySpec {
            model,
            s,
            k,
            eps_values,
            trials,
            solvers: vec![SolverKind::PenalizedL1, SolverKind::IrlsLp],
            setting: Setting::Gaussian,
            noise_model: NoiseModel::Symmetric,
            lambda_reg: 1.0,
            l1_cfg: PenalizedL1Config::default(),
            irls_cfg: IrlsConfig::default(),
            master_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Argument("trials must be positive".into()));
        }
        if self.s > self.model.n {
            return Err(Error::Sparsity {
                s: self.s,
                len: self.model.n,
            });
        }
        if self.k > self.model.m {
            return Err(Error::Sparsity {
                s: self.k,
                len: self.model.m,
            });
        }
        if self.eps_values.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::Argument("noise levels must be finite and >= 0".into()));
        }
        if self.eps_values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Argument("noise levels must be sorted ascending".into()));
        }
        if self.solvers.is_empty() {
            return Err(Error::Argument("at least one solver is required".into()));
        }
        let mut cfg = self.l1_cfg.clone();
        cfg.lambda_reg = self.lambda_reg;
        cfg.validate()?;
        self.irls_cfg.validate()
    }

    pub fn canonical(&self) -> String {
        let mut out = String::from("experiment = stability\n");
        for (k, v) in self.model.to_pairs() {
            if k != "model_seed" {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        let eps: Vec<String> = self.eps_values.iter().map(|e| format!("{e:?}")).collect();
        let solvers: Vec<&str> = self.solvers.iter().map(|s| s.name()).collect();
        let (c, i) = (&self.l1_cfg, &self.irls_cfg);
        let _ = writeln!(out, "s = {}\nk = {}", self.s, self.k);
        let _ = writeln!(out, "eps = {}", eps.join(","));
        let _ = writeln!(out, "trials = {}", self.trials);
        let _ = writeln!(out, "solvers = {}", solvers.join(","));
        let _ = writeln!(out, "setting = {}\nnoise_model = {}", self.setting, self.noise_model);
        let _ = writeln!(out, "lambda = {:?}", self.lambda_reg);
        let _ = writeln!(
            out,
            "max_iter = {}\ntol = {:?}\nnorm_estimate_tol = {:?}",
            c.max_iter, c.tol, c.norm_estimate_tol
        );
        let _ = writeln!(
            out,
            "p = {:?}\nnu = {:?}\neps_init = {:?}\neps_floor = {:?}\neps_shrink = {:?}\nouter_max = {}\ncg_tol = {:?}\ncg_max = {}",
            i.p, i.nu, i.eps_init, i.eps_floor, i.eps_shrink, i.outer_max, i.cg_tol, i.cg_max
        );
        let _ = writeln!(out, "seed = {}", self.master_seed);
        out
    }
}

pub fn spec_hash(canonical: &str) -> String {
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Sum in a fixed pairwise order, independent of how inputs were produced.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => {
            let (a, b) = v.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = pairwise_sum(v) / n;
    if v.len() == 1 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    (mean, (pairwise_sum(&dev) / (n - 1.0)).sqrt())
}

fn build_model(template: &ModelParams, seed: u64) -> Result<SensingModel> {
    let mut p = *template;
    p.seed = seed;
    p.build()
}

/// Success fraction for every `(s, k)` cell, one sensing matrix per cell and
/// a fresh noiseless instance per trial. A cell whose model or solves fail
/// is reported as NaN.
pub fn run_phase_transition(spec: &PhaseTransitionSpec) -> Result<ResultTable> {
    spec.validate()?;
    let cells: Vec<(usize, usize)> = spec
        .k_values
        .iter()
        .flat_map(|&k| spec.s_values.iter().map(move |&s| (s, k)))
        .collect();
    let models: Vec<Result<SensingModel>> = cells
        .par_iter()
        .map(|&(s, k)| {
            build_model(
                &spec.model,
                derive_seed(spec.master_seed, &[TAG_CELL_MODEL, s as u64, k as u64]),
            )
        })
        .collect();
    let mut cfg = spec.solver_cfg.clone();
    cfg.lambda_reg = spec.lambda_reg;
    cfg.epsilon = 0.0;

    let trials = spec.trials;
    let outcomes: Vec<Result<bool>> = (0..cells.len() * trials)
        .into_par_iter()
        .map(|idx| {
            let (c, t) = (idx / trials, idx % trials);
            let (s, k) = cells[c];
            let model = models[c].as_ref().map_err(|e| Error::Numerical(e.to_string()))?;
            let seed = derive_seed(
                spec.master_seed,
                &[TAG_CELL_TRIAL, s as u64, k as u64, t as u64],
            );
            let inst = gen_instance_with(model, s, k, spec.setting, 0.0, NoiseModel::Symmetric, seed)?;
            let result = solve_penalized_l1(model, &inst.y, &cfg)?;
            Ok(check_success(&result, &inst))
        })
        .collect();

    let provenance = Provenance {
        spec_hash: spec_hash(&spec.canonical()),
        seed: spec.master_seed,
        version: VERSION.to_string(),
        notes: vec![format!(
            "success: |x_hat - x|/|x| + |z_hat - z|/|z| < 1e-3 over {trials} trials per cell"
        )],
    };
    let mut table = ResultTable::new(&PHASE_TRANSITION_COLUMNS, provenance);
    for (c, &(s, k)) in cells.iter().enumerate() {
        let slots = &outcomes[c * trials..(c + 1) * trials];
        let fraction = match slots.iter().find_map(|r| r.as_ref().err()) {
            Some(e) => {
                log::warn!("phase-transition cell s={s} k={k} failed: {e}");
                f64::NAN
            }
            None => {
                let hits: Vec<f64> = slots
                    .iter()
                    .map(|r| if matches!(r, Ok(true)) { 1.0 } else { 0.0 })
                    .collect();
                pairwise_sum(&hits) / trials as f64
            }
        };
        table.push(vec![
            spec.model.family.name().into(),
            spec.model.n.into(),
            spec.model.m.into(),
            s.into(),
            k.into(),
            spec.setting.name().into(),
            spec.lambda_reg.into(),
            trials.into(),
            fraction.into(),
        ]);
    }
    Ok(table)
}

/// Mean and spread of `|x_hat - x|_2 + |z_hat - z|_2` against the noise
/// amplitude. One matrix and one set of trial seeds serve the whole sweep, so
/// the signals, corruptions and noise signs are shared across noise levels
/// and solvers and only the amplitude changes.
pub fn run_stability(spec: &StabilitySpec) -> Result<ResultTable> {
    spec.validate()?;
    let model = build_model(
        &spec.model,
        derive_seed(spec.master_seed, &[TAG_STABILITY_MODEL]),
    )?;
    let sqrt_m = (model.m as f64).sqrt();
    let mut l1 = spec.l1_cfg.clone();
    l1.lambda_reg = spec.lambda_reg;

    let tasks: Vec<(usize, SolverKind)> = (0..spec.eps_values.len())
        .flat_map(|e| spec.solvers.iter().map(move |&s| (e, s)))
        .collect();
    let trials = spec.trials;
    let errors: Vec<Result<f64>> = (0..tasks.len() * trials)
        .into_par_iter()
        .map(|idx| {
            let ((e, solver), t) = (tasks[idx / trials], idx % trials);
            let eps = spec.eps_values[e];
            let seed = derive_seed(spec.master_seed, &[TAG_STABILITY_TRIAL, t as u64]);
            let inst = gen_instance_with(&model, spec.s, spec.k, spec.setting, eps, spec.noise_model, seed)?;
            let result = match solver {
                SolverKind::PenalizedL1 => {
                    let mut cfg = l1.clone();
                    cfg.epsilon = eps * sqrt_m;
                    solve_penalized_l1(&model, &inst.y, &cfg)?
                }
                SolverKind::IrlsLp => solve_irls_lp(&model, &inst.y, &spec.irls_cfg)?,
            };
            Ok(recovery_error(&result, &inst))
        })
        .collect();

    let provenance = Provenance {
        spec_hash: spec_hash(&spec.canonical()),
        seed: spec.master_seed,
        version: VERSION.to_string(),
        notes: vec![EPS_BALL_NOTE.to_string()],
    };
    let mut table = ResultTable::new(&STABILITY_COLUMNS, provenance);
    for (i, &(e, solver)) in tasks.iter().enumerate() {
        let eps = spec.eps_values[e];
        let slots = &errors[i * trials..(i + 1) * trials];
        let (mean, std) = match slots.iter().find_map(|r| r.as_ref().err()) {
            Some(err) => {
                log::warn!("stability cell eps={eps} solver={} failed: {err}", solver.name());
                (f64::NAN, f64::NAN)
            }
            None => {
                let v: Vec<f64> = slots.iter().map(|r| *r.as_ref().unwrap_or(&f64::NAN)).collect();
                mean_std(&v)
            }
        };
        table.push(vec![
            spec.model.family.name().into(),
            spec.model.n.into(),
            model.m.into(),
            spec.s.into(),
            spec.k.into(),
            solver.name().into(),
            eps.into(),
            (eps * sqrt_m).into(),
            trials.into(),
            mean.into(),
            std.into(),
        ]);
    }
    Ok(table)
}

/// Ordinary least-squares line `y = slope x + intercept` and its R^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Argument("linear fit needs two or more paired points".into()));
    }
    let n = x.len() as f64;
    let mx = pairwise_sum(x) / n;
    let my = pairwise_sum(y) / n;
    let sxx = pairwise_sum(&x.iter().map(|a| (a - mx) * (a - mx)).collect::<Vec<_>>());
    let sxy = pairwise_sum(&x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect::<Vec<_>>());
    let syy = pairwise_sum(&y.iter().map(|b| (b - my) * (b - my)).collect::<Vec<_>>());
    if sxx == 0.0 {
        return Err(Error::Argument("linear fit needs distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}
