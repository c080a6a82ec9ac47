use crate::cvec::{self, C64};
use crate::error::{Error, Result};
use crate::linop::LinearOperator;

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<C64>,
    pub iterations: usize,
    /// `|A x - b| / |b|` as tracked by the recurrence.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Solves `op x = b` for a Hermitian positive semidefinite `op`.
pub fn cg_solve(op: &LinearOperator, b: &[C64], tol: f64, max_iter: usize) -> Result<CgOutcome> {
    if op.rows() != op.cols() {
        return Err(Error::Shape(format!("cg_solve needs a square operator, got {:?}", op.shape())));
    }
    if b.len() != op.rows() {
        return Err(Error::Dimension {
            what: "cg_solve: rhs length vs rows",
            expected: op.rows(),
            got: b.len(),
        });
    }
    cg_solve_with(|v| op.forward(v), b, tol, max_iter)
}

/// Matrix-free variant: `apply` must act as a Hermitian PSD map on `C^len(b)`.
pub fn cg_solve_with<F>(apply: F, b: &[C64], tol: f64, max_iter: usize) -> Result<CgOutcome>
where
    F: Fn(&[C64]) -> Vec<C64>,
{
    cg_solve_from(apply, b, None, tol, max_iter)
}

/// CG started from `guess` (zero when `None`).
pub fn cg_solve_from<F>(
    apply: F,
    b: &[C64],
    guess: Option<&[C64]>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome>
where
    F: Fn(&[C64]) -> Vec<C64>,
{
    let n = b.len();
    let b_norm = cvec::norm2(b);
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x: cvec::zeros(n),
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        });
    }
    let (mut x, mut r) = match guess {
        Some(x0) if x0.len() == n => {
            let ax = apply(x0);
            (x0.to_vec(), cvec::sub(b, &ax))
        }
        _ => (cvec::zeros(n), b.to_vec()),
    };
    let mut p = r.clone();
    let mut rs = r.iter().map(|c| c.norm_sqr()).sum::<f64>();
    let target = tol * b_norm;
    if rs.sqrt() <= target {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            relative_residual: rs.sqrt() / b_norm,
            converged: true,
        });
    }
    for it in 1..=max_iter {
        let ap = apply(&p);
        let curvature = cvec::inner(&p, &ap).re;
        if curvature <= 0.0 {
            let scale = cvec::norm2(&p) * cvec::norm2(&ap);
            if curvature < -1e-10 * scale {
                return Err(Error::Numerical(format!(
                    "negative curvature {curvature:e} at CG iteration {it}"
                )));
            }
            // p lies in the null space: nothing more to gain along it.
            return Ok(CgOutcome {
                x,
                iterations: it,
                relative_residual: rs.sqrt() / b_norm,
                converged: false,
            });
        }
        let alpha = rs / curvature;
        debug_assert!(alpha.is_finite());
        for ((xi, ri), (pi, api)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&ap)) {
            *xi += pi * alpha;
            *ri -= api * alpha;
        }
        let rs_new = r.iter().map(|c| c.norm_sqr()).sum::<f64>();
        if rs_new.sqrt() <= target {
            return Ok(CgOutcome {
                x,
                iterations: it,
                relative_residual: rs_new.sqrt() / b_norm,
                converged: true,
            });
        }
        let beta = rs_new / rs;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + *pi * beta;
        }
        rs = rs_new;
    }
    Ok(CgOutcome {
        x,
        iterations: max_iter,
        relative_residual: rs.sqrt() / b_norm,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::DenseMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn real(v: &[f64]) -> Vec<C64> {
        cvec::from_real(v)
    }

    #[test]
    fn identity_converges_in_one_step() {
        let b = real(&[1.0, -2.0, 3.0]);
        let out = cg_solve(&LinearOperator::identity(3), &b, 1e-12, 10).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert!(cvec::dist2(&out.x, &b) < 1e-15);
    }

    #[test]
    fn diagonal_system() {
        let op = LinearOperator::diagonal(real(&[1.0, 2.0, 4.0]));
        let out = cg_solve(&op, &real(&[1.0, 2.0, 4.0]), 1e-12, 10).unwrap();
        assert!(out.converged);
        assert!(cvec::dist2(&out.x, &real(&[1.0, 1.0, 1.0])) < 1e-11);
    }

    #[test]
    fn random_spd_matches_direct_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut g = || C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
        let gm = DenseMatrix::from_fn(8, 8, |_, _| g());
        let m = gm.adjoint() * &gm + DenseMatrix::identity(8, 8);
        let b: Vec<C64> = (0..8).map(|_| g()).collect();
        let tol = 1e-12;
        let op = LinearOperator::dense(m.clone()).unwrap();
        let out = cg_solve(&op, &b, tol, 100).unwrap();
        assert!(out.converged);
        let res = cvec::dist2(&op.apply(&out.x).unwrap(), &b) / cvec::norm2(&b);
        assert!(res <= 10.0 * tol, "residual {res}");
        let direct = m.lu().solve(&nalgebra::DVector::from_column_slice(&b)).unwrap();
        assert!(cvec::dist2(direct.as_slice(), &out.x) < 1e-9);
    }

    #[test]
    fn negative_definite_is_rejected() {
        let op = LinearOperator::diagonal(real(&[-1.0, -2.0]));
        assert!(matches!(cg_solve(&op, &real(&[1.0, 1.0]), 1e-10, 10), Err(Error::Numerical(_))));
    }

    #[test]
    fn zero_rhs() {
        let out = cg_solve(&LinearOperator::identity(4), &cvec::zeros(4), 1e-10, 10).unwrap();
        assert!(out.converged && out.x.iter().all(|c| c.norm() == 0.0));
    }
}
