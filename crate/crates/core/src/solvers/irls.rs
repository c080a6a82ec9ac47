use super::cg::cg_solve_from;
use super::{check_rhs, residual, IrlsConfig, SolveResult, SolveStatus};
use crate::cvec::{self, C64};
use crate::error::Result;
use crate::models::SensingModel;

const STAGNATION: f64 = 1e-10;

/// IRLS for `min |x|_p^p + nu |z|_p^p  s.t.  A x + H z = y`.
///
/// Each outer step solves the weighted least-norm problem
/// `u = W^-1 Theta* q`, `(Theta W^-1 Theta*) q = y` by conjugate gradients, with
/// `w_i = (|u_i|^2 + eps^2)^(p/2 - 1)` (times `nu` on the corruption block).
/// The smoothing `eps` shrinks by `eps_shrink` whenever the relative iterate
/// change drops below `sqrt(eps) / 100`, and never goes below `eps_floor`.
pub fn solve_irls_lp(model: &SensingModel, y: &[C64], cfg: &IrlsConfig) -> Result<SolveResult> {
    solve_irls_lp_traced(model, y, cfg).map(|(r, _)| r)
}

/// Like [`solve_irls_lp`], also returning the smoothing value used at each
/// outer iteration.
pub fn solve_irls_lp_traced(
    model: &SensingModel,
    y: &[C64],
    cfg: &IrlsConfig,
) -> Result<(SolveResult, Vec<f64>)> {
    cfg.validate()?;
    check_rhs(model, y)?;
    let (n, m) = (model.n, model.m);
    let theta = model.theta();
    let exponent = 1.0 - cfg.p / 2.0;

    let mut u = cvec::zeros(n + m);
    let mut eps = cfg.eps_init.max(cfg.eps_floor);
    let mut trace = Vec::new();
    let mut status = SolveStatus::MaxIter;
    let mut iterations = cfg.outer_max;
    // Warm start: consecutive normal systems differ only through the weights.
    let mut q_prev: Option<Vec<C64>> = None;

    for it in 1..=cfg.outer_max {
        trace.push(eps);
        let eps2 = eps * eps;
        let inv_weights: Vec<f64> = u
            .iter()
            .enumerate()
            .map(|(i, ui)| {
                let w = (ui.norm_sqr() + eps2).powf(exponent);
                if i < n { w } else { w / cfg.nu }
            })
            .collect();
        let normal = |q: &[C64]| {
            let mut v = theta.adjoint(q);
            v.iter_mut().zip(&inv_weights).for_each(|(vi, wi)| *vi *= *wi);
            theta.forward(&v)
        };
        let q = cg_solve_from(normal, y, q_prev.as_deref(), cfg.cg_tol, cfg.cg_max)?.x;
        let mut u_new = theta.adjoint(&q);
        u_new.iter_mut().zip(&inv_weights).for_each(|(vi, wi)| *vi *= *wi);

        let diff = cvec::dist2(&u_new, &u);
        let scale = cvec::norm2(&u_new);
        let change = if scale > 0.0 { diff / scale } else { diff };
        u = u_new;
        q_prev = Some(q);

        if change <= STAGNATION && eps <= cfg.eps_floor {
            status = SolveStatus::Converged;
            iterations = it;
            break;
        }
        if change < eps.sqrt() / 100.0 {
            eps = (eps * cfg.eps_shrink).max(cfg.eps_floor);
        }
    }

    let z_hat = u.split_off(n);
    let x_hat = u;
    let pnorm = |v: &[C64]| v.iter().map(|c| c.norm().powf(cfg.p)).sum::<f64>();
    let objective = pnorm(&x_hat) + cfg.nu * pnorm(&z_hat);
    let residual = residual(model, y, &x_hat, &z_hat);
    Ok((
        SolveResult {
            x_hat,
            z_hat,
            iterations,
            residual,
            objective,
            status,
        },
        trace,
    ))
}
