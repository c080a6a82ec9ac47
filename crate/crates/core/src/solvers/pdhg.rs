use super::prox::shrink;
use super::{check_rhs, residual, PenalizedL1Config, SolveResult, SolveStatus};
use crate::cvec::{self, C64};
use crate::error::Result;
use crate::models::SensingModel;

/// Seed for the power-iteration start vector; fixed so solves are reproducible.
const NORM_SEED: u64 = 0x6e6f_726d;

/// Primal-dual hybrid gradient for
/// `min |x|_1 + lambda |z|_1  s.t.  |Theta (x; z) - y|_2 <= eps`.
///
/// Step sizes are `sigma = tau = 0.99 / |Theta|` with extrapolation 1. The
/// dual update is the prox of the conjugate of the ball indicator,
/// `p <- r max(0, 1 - sigma eps / |r|)` with `r = p + sigma (Theta u_bar - y)`;
/// the primal update is a weighted soft threshold. Iteration stops when both
/// the relative primal and dual changes fall to `tol` and, for `eps > 0`, the
/// iterate lies within `eps (1 + 10 tol)` of `y`; otherwise at `max_iter`.
pub fn solve_penalized_l1(model: &SensingModel, y: &[C64], cfg: &PenalizedL1Config) -> Result<SolveResult> {
    cfg.validate()?;
    check_rhs(model, y)?;
    let (n, m) = (model.n, model.m);
    let theta = model.theta();
    let norm = theta
        .power_iteration(cfg.norm_estimate_tol, 10_000, NORM_SEED)
        .value;
    let step = if norm > 0.0 { 0.99 / norm } else { 1.0 };
    let (sigma, tau) = (step, step);
    let thresholds: Vec<f64> = (0..n + m)
        .map(|i| if i < n { tau } else { tau * cfg.lambda_reg })
        .collect();
    let shrink_radius = sigma * cfg.epsilon;

    let mut u = cvec::zeros(n + m);
    let mut u_bar = u.clone();
    let mut p = cvec::zeros(m);
    let mut status = SolveStatus::MaxIter;
    let mut iterations = cfg.max_iter;

    for it in 1..=cfg.max_iter {
        // Dual step.
        let t = theta.forward(&u_bar);
        let mut r: Vec<C64> = p
            .iter()
            .zip(&t)
            .zip(y)
            .map(|((pi, ti), yi)| pi + (ti - yi) * sigma)
            .collect();
        if shrink_radius > 0.0 {
            let nr = cvec::norm2(&r);
            let f = if nr > 0.0 { (1.0 - shrink_radius / nr).max(0.0) } else { 0.0 };
            r.iter_mut().for_each(|v| *v *= f);
        }
        let p_new = r;

        // Primal step.
        let g = theta.adjoint(&p_new);
        let u_new: Vec<C64> = u
            .iter()
            .zip(&g)
            .zip(&thresholds)
            .map(|((ui, gi), &ti)| shrink(ui - gi * tau, ti))
            .collect();

        let du = cvec::dist2(&u_new, &u);
        let dp = cvec::dist2(&p_new, &p);
        let nu = cvec::norm2(&u_new);
        let np = cvec::norm2(&p_new);

        for ((b, new), old) in u_bar.iter_mut().zip(&u_new).zip(&u) {
            *b = new * 2.0 - old;
        }
        u = u_new;
        p = p_new;

        if du <= cfg.tol * nu && dp <= cfg.tol * np && feasible(model, y, &u, n, cfg) {
            status = SolveStatus::Converged;
            iterations = it;
            break;
        }
    }

    let z_hat = u.split_off(n);
    let x_hat = u;
    let objective = cvec::norm1(&x_hat) + cfg.lambda_reg * cvec::norm1(&z_hat);
    let residual = residual(model, y, &x_hat, &z_hat);
    Ok(SolveResult {
        x_hat,
        z_hat,
        iterations,
        residual,
        objective,
        status,
    })
}

/// Slow drift can satisfy the change test while the iterate is still outside
/// the ball, so convergence also requires feasibility.
fn feasible(model: &SensingModel, y: &[C64], u: &[C64], n: usize, cfg: &PenalizedL1Config) -> bool {
    cfg.epsilon == 0.0 || residual(model, y, &u[..n], &u[n..]) <= cfg.epsilon * (1.0 + 10.0 * cfg.tol)
}
