//! Command-line front end: argument and config-file parsing, validation, and
//! dispatch to the library operations.
//!
//! Every run writes `run_manifest.txt` into the output directory. The
//! manifest holds only values that are fixed by the arguments, so repeated
//! runs produce identical bytes; wall time goes to `run_timing.txt`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::error::{ContextKind, ContextValue, ErrorKind};
use clap::{Arg, ArgAction, Command};

use crate::error::Error;
use crate::experiments::{
    emit_csv, emit_plot, run_phase_transition, run_stability, PhaseTransitionSpec, PlotKind,
    SolverKind, StabilitySpec, VERSION,
};
use crate::io;
use crate::models::{gen_instance_with, Family, ModelParams, NoiseModel, Setting};
use crate::rip::{
    certify_uniqueness, exact_skrip_detailed, sample_bound_subsampled,
    sample_bound_udb, support_extremes_csv, SubsampledConstants, DEFAULT_BUDGET,
};
use crate::solvers::{
    check_success, recovery_error, solve_irls_lp, solve_penalized_l1, IrlsConfig, PenalizedL1Config,
    SolveResult,
};

pub const MANIFEST: &str = "run_manifest.txt";
pub const TIMING: &str = "run_timing.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Model,
    Gen,
    Solve,
    Pt,
    Stability,
    Rip,
    Bounds,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Model => "model",
            Subcommand::Gen => "gen",
            Subcommand::Solve => "solve",
            Subcommand::Pt => "pt",
            Subcommand::Stability => "stability",
            Subcommand::Rip => "rip",
            Subcommand::Bounds => "bounds",
        }
    }

    const ALL: [Subcommand; 7] = [
        Subcommand::Model,
        Subcommand::Gen,
        Subcommand::Solve,
        Subcommand::Pt,
        Subcommand::Stability,
        Subcommand::Rip,
        Subcommand::Bounds,
    ];

    fn about(self) -> &'static str {
        match self {
            Subcommand::Model => "Build a sensing model and report its structure",
            Subcommand::Gen => "Generate a problem instance file",
            Subcommand::Solve => "Solve a saved instance",
            Subcommand::Pt => "Phase-transition sweep over (s, k)",
            Subcommand::Stability => "Recovery error against noise level",
            Subcommand::Rip => "Exact (2s,2k)-RIP constant and recovery certificate",
            Subcommand::Bounds => "Evaluate the sample-complexity conditions",
        }
    }
}

/// Parsed command line. `params` maps flag names (without `--`) to raw
/// values, config-file entries first and explicit flags on top.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub subcommand: Subcommand,
    pub params: BTreeMap<String, String>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    Usage { flag: Option<String>, message: String },
    Compute(Error),
    /// `--help` or `--version` output; not a failure.
    Help(String),
}

impl CliError {
    fn usage(flag: &str, message: impl Into<String>) -> Self {
        CliError::Usage {
            flag: Some(format!("--{flag}")),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage { .. } => 2,
            CliError::Compute(_) => 1,
            CliError::Help(_) => 0,
        }
    }

    /// Single-line, `key=value` rendering for stderr.
    pub fn line(&self) -> String {
        let quote = |s: &str| format!("{:?}", s.replace('\n', " "));
        match self {
            CliError::Usage { flag, message } => match flag {
                Some(f) => format!("error kind=usage flag={f} message={}", quote(message)),
                None => format!("error kind=usage message={}", quote(message)),
            },
            CliError::Compute(e) => {
                let kind = match e {
                    Error::Dimension { .. } => "dimension",
                    Error::Shape(_) => "shape",
                    Error::Budget { .. } => "budget",
                    Error::Sparsity { .. } => "sparsity",
                    Error::Argument(_) => "argument",
                    Error::Numerical(_) => "numerical",
                    Error::Schema(_) => "schema",
                    Error::Parse(_) => "parse",
                    Error::Io { .. } => "io",
                };
                format!("error kind={kind} message={}", quote(&e.to_string()))
            }
            CliError::Help(text) => text.clone(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Compute(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Value flags shared by every subcommand, with help text.
const FLAGS: &[(&str, &str)] = &[
    ("family", "mtx1, mtx2, partial_circulant, csofdm or drpe"),
    ("n", "signal length"),
    ("m", "number of measurements"),
    ("s", "signal sparsity; pt accepts a list a,b,c or range a:b"),
    ("k", "corruption sparsity; pt accepts a list or range"),
    ("lambda", "regularization weight on the corruption"),
    ("eps", "noise amplitude (gen), residual bound (solve), list of amplitudes (stability)"),
    ("trials", "Monte-Carlo trials per cell"),
    ("setting", "gaussian or flat nonzero values"),
    ("seed", "master seed"),
    ("p", "IRLS exponent"),
    ("nu", "IRLS weight on the corruption"),
    ("solver", "l1 or irls (solve); list for stability"),
    ("out", "output directory"),
    ("config", "key = value file; explicit flags override it"),
    ("threads", "worker threads (default: logical cores)"),
    ("instance", "instance file for solve"),
    ("theorem", "bounds to evaluate: udb or subsampled"),
    ("ntilde", "column count of B for the udb bounds"),
    ("mu-b", "coherence of B"),
    ("mu-g", "coherence of G"),
    ("delta", "target RIP constant in (0, 1)"),
    ("budget", "maximum support pairs enumerated by rip"),
    ("rows", "row selection: random or first"),
    ("modulator", "rademacher or gaussian"),
    ("psi", "identity or hadamard (drpe)"),
    ("noise-model", "symmetric or one_sided"),
    ("max-iter", "penalized l1 iteration cap"),
    ("tol", "penalized l1 stopping tolerance"),
    ("c5", "constant"),
    ("c6", "constant"),
    ("c7", "constant"),
    ("c8", "constant"),
    ("c9", "constant"),
    ("c10", "constant"),
    ("c11", "constant"),
];

const SWITCHES: &[(&str, &str)] = &[
    ("bernoulli-m", "random row count for mtx2"),
    ("csv", "rip: also write per-support eigenvalue extremes"),
];

fn command() -> Command {
    let mut root = Command::new("corrsense")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Sparse signal and sparse corruption recovery")
        .subcommand_required(true);
    for sub in Subcommand::ALL {
        let mut c = Command::new(sub.name()).about(sub.about());
        for (name, help) in FLAGS {
            c = c.arg(Arg::new(*name).long(*name).value_name("VALUE").help(*help));
        }
        for (name, help) in SWITCHES {
            c = c.arg(Arg::new(*name).long(*name).action(ArgAction::SetTrue).help(*help));
        }
        root = root.subcommand(c);
    }
    root
}

fn clap_usage(err: clap::Error) -> CliError {
    if matches!(
        err.kind(),
        ErrorKind::DisplayHelp
            | ErrorKind::DisplayVersion
            | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
    ) {
        return CliError::Help(err.render().to_string());
    }
    let flag = match err.get(ContextKind::InvalidArg) {
        Some(ContextValue::String(s)) => Some(s.split_whitespace().next().unwrap_or(s).to_string()),
        _ => None,
    };
    let rendered = err.render().to_string();
    let message = rendered
        .lines()
        .next()
        .unwrap_or("invalid arguments")
        .trim_start_matches("error: ")
        .to_string();
    CliError::Usage { flag, message }
}

/// Flat `key = value` lines; `#` starts a comment. Keys are flag names.
pub fn parse_config_text(text: &str) -> CliResult<BTreeMap<String, String>> {
    let known: Vec<&str> = FLAGS.iter().chain(SWITCHES).map(|(n, _)| *n).collect();
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::usage("config", format!("line {}: expected 'key = value'", i + 1))
        })?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if !known.contains(&key.as_str()) || key == "config" {
            return Err(CliError::usage("config", format!("line {}: unknown key '{key}'", i + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

/// `argv` includes the program name.
pub fn parse_args<I, T>(argv: I) -> CliResult<CliConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = command().try_get_matches_from(argv).map_err(clap_usage)?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let subcommand = Subcommand::ALL
        .into_iter()
        .find(|s| s.name() == name)
        .expect("registered subcommand");

    let mut params = match sub.get_one::<String>("config") {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage("config", format!("cannot read '{path}': {e}")))?;
            parse_config_text(&text)?
        }
        None => BTreeMap::new(),
    };
    for (flag, _) in FLAGS {
        if *flag == "config" {
            continue;
        }
        if let Some(v) = sub.get_one::<String>(flag) {
            params.insert(flag.to_string(), v.clone());
        }
    }
    for (flag, _) in SWITCHES {
        if sub.get_flag(flag) {
            params.insert(flag.to_string(), "true".into());
        }
    }

    let p = Params(&params);
    let seed = p.opt::<u64>("seed")?.unwrap_or(0);
    let threads = p.opt::<usize>("threads")?;
    if threads == Some(0) {
        return Err(CliError::usage("threads", "must be positive"));
    }
    let output_dir = PathBuf::from(params.get("out").map(String::as_str).unwrap_or("out"));
    params.remove("threads");
    Ok(CliConfig {
        subcommand,
        params,
        seed,
        output_dir,
        threads,
    })
}

struct Params<'a>(&'a BTreeMap<String, String>);

impl Params<'_> {
    fn raw(&self, flag: &str) -> Option<&str> {
        self.0.get(flag).map(String::as_str)
    }

    fn opt<T: FromStr>(&self, flag: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(flag)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::usage(flag, format!("invalid value '{v}': {e}")))
            })
            .transpose()
    }

    fn req<T: FromStr>(&self, flag: &str) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        self.opt(flag)?
            .ok_or_else(|| CliError::usage(flag, format!("missing required flag --{flag}")))
    }

    fn flag(&self, name: &str) -> CliResult<bool> {
        Ok(self.opt::<bool>(name)?.unwrap_or(false))
    }

    fn positive_f64(&self, flag: &str, default: Option<f64>) -> CliResult<f64> {
        let v = match default {
            Some(d) => self.opt::<f64>(flag)?.unwrap_or(d),
            None => self.req::<f64>(flag)?,
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(CliError::usage(flag, format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    fn nonneg_f64(&self, flag: &str, default: f64) -> CliResult<f64> {
        let v = self.opt::<f64>(flag)?.unwrap_or(default);
        if !(v >= 0.0 && v.is_finite()) {
            return Err(CliError::usage(flag, format!("must be >= 0, got {v}")));
        }
        Ok(v)
    }

    fn positive_usize(&self, flag: &str) -> CliResult<usize> {
        let v = self.req::<usize>(flag)?;
        if v == 0 {
            return Err(CliError::usage(flag, "must be positive"));
        }
        Ok(v)
    }

    fn usize_list(&self, flag: &str) -> CliResult<Vec<usize>> {
        let raw = self
            .raw(flag)
            .ok_or_else(|| CliError::usage(flag, format!("missing required flag --{flag}")))?;
        parse_usize_list(raw).map_err(|m| CliError::usage(flag, m))
    }

    fn f64_list(&self, flag: &str) -> CliResult<Vec<f64>> {
        let raw = self
            .raw(flag)
            .ok_or_else(|| CliError::usage(flag, format!("missing required flag --{flag}")))?;
        parse_f64_list(raw).map_err(|m| CliError::usage(flag, m))
    }

    fn model(&self, seed: u64) -> CliResult<ModelParams> {
        let family: Family = self.req("family")?;
        if family == Family::Custom {
            return Err(CliError::usage("family", "custom models are library-only"));
        }
        let mut p = ModelParams::new(family, self.positive_usize("n")?, self.positive_usize("m")?, seed);
        if let Some(v) = self.opt("rows")? {
            p.rows = v;
        }
        if let Some(v) = self.opt("modulator")? {
            p.modulator = v;
        }
        if let Some(v) = self.opt("psi")? {
            p.psi = v;
        }
        p.bernoulli_m = self.flag("bernoulli-m")?;
        Ok(p)
    }

    fn l1_config(&self, epsilon: f64) -> CliResult<PenalizedL1Config> {
        let mut cfg = PenalizedL1Config::new(self.positive_f64("lambda", Some(1.0))?, epsilon);
        if let Some(v) = self.opt::<usize>("max-iter")? {
            cfg.max_iter = v;
        }
        if let Some(v) = self.opt::<f64>("tol")? {
            cfg.tol = v;
        }
        cfg.validate().map_err(|e| CliError::usage("tol", e.to_string()))?;
        Ok(cfg)
    }

    fn irls_config(&self) -> CliResult<IrlsConfig> {
        let mut cfg = IrlsConfig::default();
        if let Some(p) = self.opt::<f64>("p")? {
            if !(p > 0.0 && p < 1.0) {
                return Err(CliError::usage("p", format!("must lie in (0, 1), got {p}")));
            }
            cfg.p = p;
        }
        cfg.nu = self.positive_f64("nu", Some(cfg.nu))?;
        Ok(cfg)
    }
}

/// `a,b,c`, an inclusive range `a:b`, or `a:step:b`, combined with commas.
pub fn parse_usize_list(raw: &str) -> std::result::Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in raw.split(',').map(str::trim) {
        let nums: Vec<&str> = part.split(':').collect();
        let num = |s: &str| s.trim().parse::<usize>().map_err(|e| format!("'{s}': {e}"));
        match nums.as_slice() {
            [v] => out.push(num(v)?),
            [a, b] | [a, _, b] => {
                let (a, b) = (num(a)?, num(b)?);
                let step = if nums.len() == 3 { num(nums[1])? } else { 1 };
                if step == 0 || a > b {
                    return Err(format!("bad range '{part}'"));
                }
                out.extend((a..=b).step_by(step));
            }
            _ => return Err(format!("bad list element '{part}'")),
        }
    }
    Ok(out)
}

/// Comma list of reals, or `a:step:b` evaluated as `a + i*step` up to `b`.
pub fn parse_f64_list(raw: &str) -> std::result::Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for part in raw.split(',').map(str::trim) {
        let nums: Vec<&str> = part.split(':').collect();
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("'{s}': {e}"));
        match nums.as_slice() {
            [v] => out.push(num(v)?),
            [a, step, b] => {
                let (a, step, b) = (num(a)?, num(step)?, num(b)?);
                if !(step > 0.0) || a > b {
                    return Err(format!("bad range '{part}'"));
                }
                let count = ((b - a) / step + 1e-9).floor() as usize;
                out.extend((0..=count).map(|i| a + i as f64 * step));
            }
            _ => return Err(format!("bad list element '{part}'")),
        }
    }
    Ok(out)
}

struct Outcome {
    /// Files written under the output directory, in order.
    files: Vec<String>,
    /// Human-readable report printed on stdout.
    report: String,
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Compute(Error::io(path, e)))
}

fn kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{key} = {value}");
}

fn list_text<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn run_model(cfg: &CliConfig) -> CliResult<Outcome> {
    let p = Params(&cfg.params);
    let params = p.model(cfg.seed)?;
    let model = params.build()?;
    let mut report = String::new();
    for (k, v) in params.to_pairs() {
        kv(&mut report, k, v);
    }
    kv(&mut report, "rows_realized", model.m);
    kv(&mut report, "A", model.a.describe());
    kv(&mut report, "H", model.h.describe());
    for (name, op) in &model.factors {
        kv(&mut report, &format!("factor.{name}"), op.describe());
    }
    let est = model.theta().power_iteration(1e-9, 10_000, cfg.seed);
    kv(&mut report, "theta_norm", format!("{:?}", est.value));
    kv(&mut report, "theta_norm_converged", est.converged);
    match (crate::models::coherence(&model.a), crate::models::coherence(&model.h)) {
        (Ok(a), Ok(h)) => {
            kv(&mut report, "coherence_A", format!("{a:?}"));
            kv(&mut report, "coherence_H", format!("{h:?}"));
        }
        _ => kv(&mut report, "coherence", "skipped (model too large to materialize)"),
    }
    write_file(&cfg.output_dir, "model.txt", &report)?;
    Ok(Outcome {
        files: vec!["model.txt".into()],
        report,
    })
}

fn run_gen(cfg: &CliConfig) -> CliResult<Outcome> {
    let p = Params(&cfg.params);
    let params = p.model(cfg.seed)?;
    let s: usize = p.req("s")?;
    let k: usize = p.req("k")?;
    let setting: Setting = p.opt("setting")?.unwrap_or(Setting::Gaussian);
    let noise_model: NoiseModel = p.opt("noise-model")?.unwrap_or_default();
    let amp = p.nonneg_f64("eps", 0.0)?;
    if s > params.n {
        return Err(CliError::usage("s", format!("s = {s} exceeds n = {}", params.n)));
    }
    let model = params.build()?;
    if k > model.m {
        return Err(CliError::usage("k", format!("k = {k} exceeds m = {}", model.m)));
    }
    let inst = gen_instance_with(&model, s, k, setting, amp, noise_model, cfg.seed)?;
    write_file(&cfg.output_dir, "instance.txt", &io::instance_to_string(&inst)?)?;
    let mut report = String::new();
    kv(&mut report, "instance", cfg.output_dir.join("instance.txt").display());
    kv(&mut report, "n", model.n);
    kv(&mut report, "m", model.m);
    kv(&mut report, "noise_norm", format!("{:?}", crate::cvec::norm2(&inst.w)));
    Ok(Outcome {
        files: vec!["instance.txt".into()],
        report,
    })
}

fn run_solve(cfg: &CliConfig) -> CliResult<Outcome> {
    let p = Params(&cfg.params);
    let path: String = p.req("instance")?;
    let solver: SolverKind = p.opt("solver")?.unwrap_or(SolverKind::PenalizedL1);
    let eps = p.nonneg_f64("eps", 0.0)?;
    let l1 = p.l1_config(eps)?;
    let irls = p.irls_config()?;
    let inst = io::load_instance(Path::new(&path))?;
    let result: SolveResult = match solver {
        SolverKind::PenalizedL1 => solve_penalized_l1(&inst.model, &inst.y, &l1)?,
        SolverKind::IrlsLp => solve_irls_lp(&inst.model, &inst.y, &irls)?,
    };
    write_file(&cfg.output_dir, "result.txt", &io::result_to_string(&result))?;
    let mut report = String::new();
    kv(&mut report, "solver", solver.name());
    kv(&mut report, "status", result.status);
    kv(&mut report, "iterations", result.iterations);
    kv(&mut report, "residual", format!("{:?}", result.residual));
    kv(&mut report, "objective", format!("{:?}", result.objective));
    kv(&mut report, "recovery_error", format!("{:?}", recovery_error(&result, &inst)));
    kv(&mut report, "success", check_success(&result, &inst));
    Ok(Outcome {
        files: vec!["result.txt".into()],
        report,
    })
}

fn run_pt(cfg: &CliConfig) -> CliResult<Outcome> {
    let p = Params(&cfg.params);
    let model = p.model(0)?;
    let s_values = p.usize_list("s")?;
    let k_values = p.usize_list("k")?;
    let mut spec = PhaseTransitionSpec::new(model, s_values, k_values, p.positive_usize("trials")?);
    spec.setting = p.opt("setting")?.unwrap_or(Setting::Gaussian);
    spec.solver_cfg = p.l1_config(0.0)?;
    spec.lambda_reg = spec.solver_cfg.lambda_reg;
    spec.master_seed = cfg.seed;
    spec.validate().map_err(|e| match e {
        Error::Sparsity { .. } => CliError::usage("s", e.to_string()),
        other => CliError::Compute(other),
    })?;
    let table = run_phase_transition(&spec)?;
    emit_csv(&table, &cfg.output_dir.join("phase_transition.csv"))?;
    emit_plot(&table, PlotKind::SuccessVsS, &cfg.output_dir.join("phase_transition.svg"))?;
    let mut report = String::from("s,k,success_fraction\n");
    let (s, k, f) = (table.numbers("s")?, table.numbers("k")?, table.numbers("success_fraction")?);
    for i in 0..table.rows.len() {
        let _ = writeln!(report, "{},{},{}", s[i], k[i], f[i]);
    }
    Ok(Outcome {
        files: vec!["phase_transition.csv".into(), "phase_transition.svg".into()],
        report,
    })
}

fn run_stability_cmd(cfg: &CliConfig) -> CliResult<Outcome> {
    let p = Params(&cfg.params);
    let model = p.model(0)?;
    let eps = match p.raw("eps") {
        Some(_) => p.f64_list("eps")?,
        None => (0..=10).map(|i| i as f64 * 0.01).collect(),
    };
    let mut spec = StabilitySpec::new(model, p.req("s")?, p.req("k")?, eps, p.positive_usize("trials")?);
    if let Some(raw) = p.raw("solver") {
        spec.solvers = raw
            .split(',')
            .map(|s| s.trim().parse::<SolverKind>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| CliError::usage("solver", e.to_string()))?;
    }
    spec.setting = p.opt("setting")?.unwrap_or(Setting::Gaussian);
    spec.noise_model = p.opt("noise-model")?.unwrap_or_default();
    spec.l1_cfg = p.l1_config(0.0)?;
    spec.lambda_reg = spec.l1_cfg.lambda_reg;
    spec.irls_cfg = p.irls_config()?;
    spec.master_seed = cfg.seed;
    spec.validate().map_err(|e| CliError::usage("eps", e.to_string()))?;
    let table = run_stability(&spec)?;
    emit_csv(&table, &cfg.output_dir.join("stability.csv"))?;
    emit_plot(&table, PlotKind::ErrorVsEps, &cfg.output_dir.join("stability.svg"))?;
    let mut report = String::from("solver,eps_amp,mean_error\n");
    let sj = table.column("solver").expect("stability schema");
    let (e, m) = (table.numbers("eps_amp")?, table.numbers("mean_error")?);
    for (i, row) in table.rows.iter().enumerate() {
        let _ = writeln!(report, "{},{},{}", row[sj], e[i], m[i]);
    }
    Ok(Outcome {
        files: vec!["stability.csv".into(), "stability.svg".into()],
        report,
    })
}

fn run_rip(cfg: &CliConfig) -> CliResult<Outcome> {
    let p = Params(&cfg.params);
    let params = p.model(cfg.seed)?;
    let s = p.positive_usize("s")?;
    let k = p.positive_usize("k")?;
    let lambda = p.positive_f64("lambda", Some(1.0))?;
    let budget = p.opt::<u128>("budget")?.unwrap_or(DEFAULT_BUDGET);
    let want_csv = p.flag("csv")?;
    let model = params.build()?;
    let cert = certify_uniqueness(&model, s, k, lambda, budget)?;
    let rip = cert.rip.as_ref().expect("certificate carries the enumeration");
    let mut report = String::new();
    kv(&mut report, "family", params.family);
    kv(&mut report, "n", model.n);
    kv(&mut report, "m", model.m);
    kv(&mut report, "s", s);
    kv(&mut report, "k", k);
    kv(&mut report, "lambda", format!("{lambda:?}"));
    kv(&mut report, "signal_support_size", rip.signal_support.len());
    kv(&mut report, "corruption_support_size", rip.corruption_support.len());
    kv(&mut report, "delta", format!("{:?}", rip.delta));
    kv(&mut report, "eig_min", format!("{:?}", rip.eig_min));
    kv(&mut report, "eig_max", format!("{:?}", rip.eig_max));
    kv(&mut report, "witness_signal_support", list_text(&rip.signal_support));
    kv(&mut report, "witness_corruption_support", list_text(&rip.corruption_support));
    kv(&mut report, "supports_enumerated", rip.supports_enumerated);
    kv(&mut report, "eta", format!("{:?}", cert.eta));
    kv(&mut report, "threshold", format!("{:?}", cert.threshold));
    kv(&mut report, "satisfied", cert.satisfied);
    let mut files = vec!["rip_report.txt".to_string()];
    write_file(&cfg.output_dir, "rip_report.txt", &report)?;
    if want_csv {
        let a = model.a.materialize()?;
        let h = model.h.materialize()?;
        let (_, rows) = exact_skrip_detailed(
            &a,
            &h,
            rip.signal_support.len(),
            rip.corruption_support.len(),
            budget,
        )?;
        write_file(&cfg.output_dir, "rip_supports.csv", &support_extremes_csv(&rows))?;
        files.push("rip_supports.csv".into());
    }
    Ok(Outcome { files, report })
}

fn run_bounds(cfg: &CliConfig) -> CliResult<Outcome> {
    let p = Params(&cfg.params);
    let which: String = p.req("theorem")?;
    let s = p.positive_usize("s")?;
    let k = p.positive_usize("k")?;
    let delta: f64 = p.req("delta")?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CliError::usage("delta", format!("must lie in (0, 1), got {delta}")));
    }
    let c = |name: &str| p.positive_f64(name, Some(1.0));
    let mut report = String::from("# informational: the constants are unknown, defaults are 1\n");
    match which.as_str() {
        "udb" | "2" => {
            let b = sample_bound_udb(
                s,
                k,
                p.positive_usize("ntilde")?,
                p.positive_f64("mu-b", None)?,
                delta,
                c("c5")?,
                c("c6")?,
            )?;
            kv(&mut report, "bounds", "udb");
            kv(&mut report, "m_signal", format!("{:?}", b.m_signal));
            kv(&mut report, "m_corruption", format!("{:?}", b.m_corruption));
        }
        "subsampled" | "3" => {
            let n = p.positive_usize("n")?;
            let mu_g = p.positive_f64("mu-g", Some(1.0 / (n as f64).sqrt()))?;
            let consts = SubsampledConstants {
                c7: c("c7")?,
                c8: c("c8")?,
                c9: c("c9")?,
                c10: c("c10")?,
                c11: c("c11")?,
            };
            let b = sample_bound_subsampled(s, k, n, mu_g, delta, consts)?;
            kv(&mut report, "bounds", "subsampled");
            kv(&mut report, "m_signal_terms", list_text(&b.signal_terms.map(|v| format!("{v:?}"))));
            kv(&mut report, "m_signal", format!("{:?}", b.m_signal));
            kv(&mut report, "m_corruption", format!("{:?}", b.m_corruption));
            kv(&mut report, "m_max", format!("{:?}", b.m_max));
            kv(&mut report, "upper_binding", b.upper_binding);
        }
        other => {
            return Err(CliError::usage(
                "theorem",
                format!("unknown bounds '{other}', expected udb or subsampled"),
            ))
        }
    }
    write_file(&cfg.output_dir, "bounds.txt", &report)?;
    Ok(Outcome {
        files: vec!["bounds.txt".into()],
        report,
    })
}

fn manifest(cfg: &CliConfig, files: &[String]) -> String {
    let mut out = String::from("# corrsense run manifest\n");
    kv(&mut out, "version", VERSION);
    kv(&mut out, "subcommand", cfg.subcommand.name());
    kv(&mut out, "seed", cfg.seed);
    // The output directory is where the manifest lives, not part of the run.
    for (k, v) in cfg.params.iter().filter(|(k, _)| *k != "out") {
        kv(&mut out, &format!("param.{k}"), v);
    }
    kv(&mut out, "outputs", files.join(","));
    out
}

fn execute(cfg: &CliConfig) -> CliResult<Outcome> {
    match cfg.subcommand {
        Subcommand::Model => run_model(cfg),
        Subcommand::Gen => run_gen(cfg),
        Subcommand::Solve => run_solve(cfg),
        Subcommand::Pt => run_pt(cfg),
        Subcommand::Stability => run_stability_cmd(cfg),
        Subcommand::Rip => run_rip(cfg),
        Subcommand::Bounds => run_bounds(cfg),
    }
}

/// Runs the configured subcommand, writing its outputs and the manifest.
/// Returns the report printed on stdout.
pub fn dispatch(cfg: &CliConfig) -> CliResult<String> {
    let start = Instant::now();
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| CliError::Compute(Error::io(&cfg.output_dir, e)))?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = cfg.threads {
            b = b.num_threads(t);
        }
        b.build()
            .map_err(|e| CliError::Compute(Error::Argument(format!("thread pool: {e}"))))?
    };
    let outcome = pool.install(|| execute(cfg))?;
    let mut files = outcome.files;
    files.push(MANIFEST.into());
    write_file(&cfg.output_dir, MANIFEST, &manifest(cfg, &files))?;
    let timing = format!(
        "wall_time_seconds = {:.6}\nthreads = {}\n",
        start.elapsed().as_secs_f64(),
        pool.current_num_threads()
    );
    write_file(&cfg.output_dir, TIMING, &timing)?;
    Ok(outcome.report)
}

/// Full CLI entry point; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = match parse_args(argv) {
        Ok(cfg) => cfg,
        Err(CliError::Help(text)) => {
            print!("{text}");
            return 0;
        }
        Err(e) => return report_error(e),
    };
    match dispatch(&cfg) {
        Ok(report) => {
            print!("{report}");
            0
        }
        Err(e) => report_error(e),
    }
}

fn report_error(e: CliError) -> i32 {
    eprintln!("{}", e.line());
    e.exit_code()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        std::iter::once("corrsense".to_string())
            .chain(s.split_whitespace().map(str::to_string))
            .collect()
    }

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_usize_list("1:5").unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_usize_list("10,20,30").unwrap(), vec![10, 20, 30]);
        assert_eq!(parse_usize_list("1:3,10:10:30").unwrap(), vec![1, 2, 3, 10, 20, 30]);
        assert_eq!(parse_usize_list("1:100").unwrap().len(), 100);
        assert!(parse_usize_list("5:1").is_err());
        let e = parse_f64_list("0:0.01:0.1").unwrap();
        assert_eq!(e.len(), 11);
        assert!((e[10] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn full_size_sweep_config() {
        let cfg = parse_args(args(
            "pt --family mtx1 --n 512 --m 256 --k 10,20,30 --s 1:100 --trials 100 --lambda 1 --seed 7",
        ))
        .unwrap();
        assert_eq!(cfg.subcommand, Subcommand::Pt);
        assert_eq!(cfg.seed, 7);
        let p = Params(&cfg.params);
        assert_eq!(p.usize_list("s").unwrap(), (1..=100).collect::<Vec<_>>());
        assert_eq!(p.usize_list("k").unwrap(), vec![10, 20, 30]);
    }

    #[test]
    fn missing_n_names_the_flag() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let cfg = parse_args(args(&format!("model --family mtx1 --m 8 --out {out}"))).unwrap();
        let err = dispatch(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.line().contains("flag=--n"), "{}", err.line());
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let err = parse_args(args("model --bogus 3")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.line().contains("--bogus"), "{}", err.line());
        assert!(!err.line().contains('\n'));
    }

    #[test]
    fn config_file_is_overridden_by_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "family = mtx1\nn = 16\nm = 8 # rows\nseed = 3\n").unwrap();
        let cfg = parse_args(args(&format!("model --config {} --m 4", path.display()))).unwrap();
        assert_eq!(cfg.params["n"], "16");
        assert_eq!(cfg.params["m"], "4");
        assert_eq!(cfg.seed, 3);
        assert!(parse_config_text("bogus = 1").is_err());
    }
}
