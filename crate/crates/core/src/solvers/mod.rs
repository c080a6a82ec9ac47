//! Recovery programs for `y = A x + H z + w`.
//!
//! * [`solve_penalized_l1`]: `min |x|_1 + lambda |z|_1  s.t. |y - A x - H z|_2 <= eps`,
//!   solved by a primal-dual hybrid-gradient iteration that only touches the
//!   model through forward and adjoint applications.
//! * [`solve_irls_lp`]: `min |x|_p^p + nu |z|_p^p  s.t. A x + H z = y` for
//!   `0 < p < 1`, by iteratively reweighted least squares.

mod cg;
mod irls;
mod pdhg;
mod prox;

use std::fmt;
use std::str::FromStr;

pub use cg::{cg_solve, cg_solve_from, cg_solve_with, CgOutcome};
pub use irls::{solve_irls_lp, solve_irls_lp_traced};
pub use pdhg::solve_penalized_l1;
pub use prox::{project_ball, soft_threshold};

use crate::cvec::{self, C64};
use crate::error::{Error, Result};
use crate::models::{ProblemInstance, SensingModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenalizedL1Config {
    pub lambda_reg: f64,
    /// Radius of the residual ball, a bound on `|w|_2`.
    pub epsilon: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub norm_estimate_tol: f64,
}

impl Default for PenalizedL1Config {
    fn default() -> Self {
        PenalizedL1Config {
            lambda_reg: 1.0,
            epsilon: 0.0,
            max_iter: 20_000,
            tol: 1e-9,
            norm_estimate_tol: 1e-6,
        }
    }
}

impl PenalizedL1Config {
    pub fn new(lambda_reg: f64, epsilon: f64) -> Self {
        PenalizedL1Config {
            lambda_reg,
            epsilon,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_reg > 0.0 && self.lambda_reg.is_finite()) {
            return Err(Error::Argument(format!("lambda must be > 0, got {}", self.lambda_reg)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Argument(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if self.max_iter == 0 || !(self.tol > 0.0) || !(self.norm_estimate_tol > 0.0) {
            return Err(Error::Argument("max_iter and tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrlsConfig {
    pub p: f64,
    /// Weight on the corruption block.
    pub nu: f64,
    pub eps_init: f64,
    pub eps_floor: f64,
    pub eps_shrink: f64,
    pub outer_max: usize,
    pub cg_tol: f64,
    pub cg_max: usize,
}

impl Default for IrlsConfig {
    fn default() -> Self {
        IrlsConfig {
            p: 0.5,
            nu: 1.0,
            eps_init: 1.0,
            eps_floor: 1e-8,
            eps_shrink: 0.1,
            outer_max: 100,
            cg_tol: 1e-10,
            cg_max: 1000,
        }
    }
}

impl IrlsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::Argument(format!("p must lie in (0, 1), got {}", self.p)));
        }
        if !(self.nu > 0.0) || !(self.eps_init > 0.0) || !(self.eps_floor > 0.0) {
            return Err(Error::Argument("nu, eps_init and eps_floor must be positive".into()));
        }
        if !(self.eps_shrink > 0.0 && self.eps_shrink < 1.0) {
            return Err(Error::Argument(format!("eps_shrink must lie in (0, 1), got {}", self.eps_shrink)));
        }
        if self.outer_max == 0 || self.cg_max == 0 || !(self.cg_tol > 0.0) {
            return Err(Error::Argument("iteration limits and cg_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIter,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIter => "max_iter",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolveStatus {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "converged" => Ok(SolveStatus::Converged),
            "max_iter" => Ok(SolveStatus::MaxIter),
            other => Err(Error::Parse(format!("unknown status '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub x_hat: Vec<C64>,
    pub z_hat: Vec<C64>,
    pub iterations: usize,
    /// `|y - A x_hat - H z_hat|_2`.
    pub residual: f64,
    pub objective: f64,
    pub status: SolveStatus,
}

pub(crate) fn residual(model: &SensingModel, y: &[C64], x: &[C64], z: &[C64]) -> f64 {
    let fit = cvec::add(&model.a.forward(x), &model.h.forward(z));
    cvec::dist2(y, &fit)
}

pub(crate) fn check_rhs(model: &SensingModel, y: &[C64]) -> Result<()> {
    if y.len() != model.m {
        return Err(Error::Dimension {
            what: "measurement length vs m",
            expected: model.m,
            got: y.len(),
        });
    }
    Ok(())
}

/// Success criterion of the recovery experiments:
/// `|x_hat - x|/|x| + |z_hat - z|/|z| < 1e-3`.
///
/// A zero ground-truth block contributes its absolute error instead, and
/// instances without corruption (`k = 0`) drop the `z` term.
pub fn check_success(result: &SolveResult, inst: &ProblemInstance) -> bool {
    success_score(result, inst) < 1e-3
}

pub fn success_score(result: &SolveResult, inst: &ProblemInstance) -> f64 {
    let term = |est: &[C64], truth: &[C64]| {
        let err = cvec::dist2(est, truth);
        let nt = cvec::norm2(truth);
        if nt == 0.0 {
            err
        } else {
            err / nt.max(1e-12)
        }
    };
    let mut score = term(&result.x_hat, &inst.x_true);
    if inst.k > 0 {
        score += term(&result.z_hat, &inst.z_true);
    }
    score
}

/// `|x_hat - x|_2 + |z_hat - z|_2`.
pub fn recovery_error(result: &SolveResult, inst: &ProblemInstance) -> f64 {
    cvec::dist2(&result.x_hat, &inst.x_true) + cvec::dist2(&result.z_hat, &inst.z_true)
}
