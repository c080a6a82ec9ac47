//! Exact restricted-isometry constants by exhaustive support enumeration,
//! the recovery threshold for the penalized program, and the (informational)
//! sample-complexity calculators for the structured models.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::cvec::{fmt_f64, C64};
use crate::error::{Error, Result};
use crate::linop::DenseMatrix;
use crate::models::SensingModel;

/// Default cap on the number of support pairs enumerated in one call.
pub const DEFAULT_BUDGET: u128 = 1_000_000;

/// Deltas closer than this to the maximum count as ties.
const TIE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct RipReport {
    pub delta: f64,
    pub signal_support: Vec<usize>,
    pub corruption_support: Vec<usize>,
    pub eig_min: f64,
    pub eig_max: f64,
    pub supports_enumerated: u128,
}

/// Extreme Gram eigenvalues for one support pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportExtremes {
    pub signal_support: Vec<usize>,
    pub corruption_support: Vec<usize>,
    pub eig_min: f64,
    pub eig_max: f64,
}

impl SupportExtremes {
    pub fn delta(&self) -> f64 {
        deviation(self.eig_min, self.eig_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RipSplit {
    /// RIP constant of `A` alone.
    pub delta1: f64,
    /// Largest singular value of any `H_K^* A_S` block.
    pub delta2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub eta: f64,
    pub threshold: f64,
    /// `delta_{2s,2k}`, present once a matrix has been examined.
    pub delta_2s2k: Option<f64>,
    /// `delta_2s2k < threshold`; always false when no matrix was examined.
    pub satisfied: bool,
    pub rip: Option<RipReport>,
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

fn deviation(eig_min: f64, eig_max: f64) -> f64 {
    (eig_max - 1.0).abs().max((1.0 - eig_min).abs())
}

/// All `k`-subsets of `0..n` in lexicographic order, flattened with stride `k`.
fn combinations(n: usize, k: usize) -> Vec<usize> {
    let count = binomial(n, k) as usize;
    let mut out = Vec::with_capacity(count * k);
    if k == 0 {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.extend_from_slice(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < n - k + i {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Gram matrix `M^* M`, entries accumulated column by column.
fn gram(cols: &[Vec<C64>]) -> DMatrix<C64> {
    let p = cols.len();
    let mut g = DMatrix::<C64>::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v: C64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a.conj() * b).sum();
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    g
}

fn columns(a: &DenseMatrix) -> Vec<Vec<C64>> {
    (0..a.ncols()).map(|j| a.column(j).iter().copied().collect()).collect()
}

fn extreme_eigs(sub: DMatrix<C64>) -> (f64, f64) {
    match sub.nrows() {
        0 => (1.0, 1.0),
        1 => {
            let v = sub[(0, 0)].re;
            (v, v)
        }
        _ => {
            let eigs = sub.symmetric_eigenvalues();
            let lo = eigs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = eigs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        }
    }
}

struct Enumeration {
    signal: Vec<usize>,
    corruption: Vec<usize>,
    s: usize,
    k: usize,
    n_corr: usize,
    extremes: Vec<(f64, f64)>,
}

impl Enumeration {
    fn supports(&self, idx: usize) -> (Vec<usize>, Vec<usize>) {
        let (i, j) = if self.n_corr == 0 {
            (idx, 0)
        } else {
            (idx / self.n_corr, idx % self.n_corr)
        };
        let sig = self.signal[i * self.s..(i + 1) * self.s].to_vec();
        let cor = self.corruption[j * self.k..(j + 1) * self.k].to_vec();
        (sig, cor)
    }

    fn report(&self) -> RipReport {
        let deltas: Vec<f64> = self.extremes.iter().map(|&(lo, hi)| deviation(lo, hi)).collect();
        let best = deltas.iter().copied().fold(0.0f64, f64::max);
        let idx = deltas.iter().position(|&d| d >= best - TIE_TOL).unwrap_or(0);
        let (signal_support, corruption_support) = self.supports(idx);
        let (eig_min, eig_max) = self.extremes[idx];
        RipReport {
            delta: deltas[idx],
            signal_support,
            corruption_support,
            eig_min,
            eig_max,
            supports_enumerated: self.extremes.len() as u128,
        }
    }
}

fn check_budget(what: &'static str, needed: u128, budget: u128) -> Result<()> {
    if needed > budget {
        return Err(Error::Budget {
            what,
            needed,
            budget,
        });
    }
    Ok(())
}

/// Gram of `[A, H]` (or of `A` alone when `h` is `None`).
fn stacked_gram(a: &DenseMatrix, h: Option<&DenseMatrix>) -> Result<DMatrix<C64>> {
    let mut cols = columns(a);
    if let Some(h) = h {
        if h.nrows() != a.nrows() {
            return Err(Error::Dimension {
                what: "rows of H",
                expected: a.nrows(),
                got: h.nrows(),
            });
        }
        cols.extend(columns(h));
    }
    Ok(gram(&cols))
}

fn enumerate(
    g: &DMatrix<C64>,
    n: usize,
    m: usize,
    s: usize,
    k: usize,
    budget: u128,
) -> Result<Enumeration> {
    if s > n {
        return Err(Error::Sparsity { s, len: n });
    }
    if k > m {
        return Err(Error::Sparsity { s: k, len: m });
    }
    let n_sig = binomial(n, s);
    let n_corr = binomial(m, k);
    check_budget("support pairs", n_sig.saturating_mul(n_corr), budget)?;
    let signal = combinations(n, s);
    let corruption = combinations(m, k);
    let (n_sig, n_corr) = (n_sig as usize, n_corr as usize);
    let extremes = (0..n_sig * n_corr)
        .into_par_iter()
        .map_init(
            || vec![0usize; s + k],
            |cols, idx| {
                let (i, j) = (idx / n_corr, idx % n_corr);
                cols[..s].copy_from_slice(&signal[i * s..(i + 1) * s]);
                for (c, &r) in cols[s..].iter_mut().zip(&corruption[j * k..(j + 1) * k]) {
                    *c = n + r;
                }
                let sub = DMatrix::from_fn(s + k, s + k, |r, c| g[(cols[r], cols[c])]);
                extreme_eigs(sub)
            },
        )
        .collect();
    Ok(Enumeration {
        signal,
        corruption,
        s,
        k,
        n_corr,
        extremes,
    })
}

/// `delta_s` of `a`: worst deviation from 1 of the Gram spectrum over all
/// column supports of size `s`.
pub fn exact_rip(a: &DenseMatrix, s: usize, budget: u128) -> Result<RipReport> {
    if s == 0 {
        return Err(Error::Argument("s must be positive".into()));
    }
    let g = stacked_gram(a, None)?;
    Ok(enumerate(&g, a.ncols(), 0, s, 0, budget)?.report())
}

/// `delta_{s,k}` of `[a, h]` over signal supports of size `s` and corruption
/// supports of size `k`.
pub fn exact_skrip(
    a: &DenseMatrix,
    h: &DenseMatrix,
    s: usize,
    k: usize,
    budget: u128,
) -> Result<RipReport> {
    skrip_enumeration(a, h, s, k, budget).map(|e| e.report())
}

fn skrip_enumeration(
    a: &DenseMatrix,
    h: &DenseMatrix,
    s: usize,
    k: usize,
    budget: u128,
) -> Result<Enumeration> {
    if h.nrows() != h.ncols() {
        return Err(Error::Shape(format!(
            "H must be square, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let g = stacked_gram(a, Some(h))?;
    enumerate(&g, a.ncols(), h.ncols(), s, k, budget)
}

/// Like [`exact_skrip`] but also returns the extremes of every support pair,
/// in enumeration order.
pub fn exact_skrip_detailed(
    a: &DenseMatrix,
    h: &DenseMatrix,
    s: usize,
    k: usize,
    budget: u128,
) -> Result<(RipReport, Vec<SupportExtremes>)> {
    let e = skrip_enumeration(a, h, s, k, budget)?;
    let rows = e
        .extremes
        .iter()
        .enumerate()
        .map(|(idx, &(eig_min, eig_max))| {
            let (signal_support, corruption_support) = e.supports(idx);
            SupportExtremes {
                signal_support,
                corruption_support,
                eig_min,
                eig_max,
            }
        })
        .collect();
    Ok((e.report(), rows))
}

/// CSV with one row per support pair; supports are `;`-separated indices.
pub fn support_extremes_csv(rows: &[SupportExtremes]) -> String {
    let join = |v: &[usize]| v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";");
    let mut out = String::from("signal_support,corruption_support,eig_min,eig_max,delta\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            join(&r.signal_support),
            join(&r.corruption_support),
            fmt_f64(r.eig_min),
            fmt_f64(r.eig_max),
            fmt_f64(r.delta())
        );
    }
    out
}

/// Splits `delta_{s,k}` into the RIP of `A` and the cross term between the
/// signal and corruption blocks; `delta1 + delta2` bounds `delta_{s,k}`.
pub fn rip_split(
    a: &DenseMatrix,
    h: &DenseMatrix,
    s: usize,
    k: usize,
    budget: u128,
) -> Result<RipSplit> {
    let (n, m) = (a.ncols(), h.ncols());
    if s > n {
        return Err(Error::Sparsity { s, len: n });
    }
    if k > m {
        return Err(Error::Sparsity { s: k, len: m });
    }
    check_budget("support pairs", binomial(n, s).saturating_mul(binomial(m, k)), budget)?;
    let delta1 = if s == 0 { 0.0 } else { exact_rip(a, s, budget)?.delta };
    if s == 0 || k == 0 {
        return Ok(RipSplit { delta1, delta2: 0.0 });
    }
    let g = stacked_gram(a, Some(h))?;
    let signal = combinations(n, s);
    let corruption = combinations(m, k);
    let n_corr = binomial(m, k) as usize;
    let total = binomial(n, s) as usize * n_corr;
    let delta2 = (0..total)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n_corr, idx % n_corr);
            let sig = &signal[i * s..(i + 1) * s];
            let cor = &corruption[j * k..(j + 1) * k];
            let block = DMatrix::from_fn(k, s, |r, c| g[(n + cor[r], sig[c])]);
            block.singular_values().max()
        })
        .reduce(|| 0.0, f64::max);
    Ok(RipSplit { delta1, delta2 })
}

/// Largest `delta_{2s,2k}` under which the penalized program recovers every
/// `s`-sparse signal and `k`-sparse corruption, together with `eta`.
pub fn recovery_threshold(s: usize, k: usize, lambda_reg: f64) -> Result<ThresholdReport> {
    if s == 0 || k == 0 {
        return Err(Error::Argument("s and k must be positive".into()));
    }
    if !(lambda_reg > 0.0 && lambda_reg.is_finite()) {
        return Err(Error::Argument(format!(
            "lambda must be positive and finite, got {lambda_reg}"
        )));
    }
    let weighted_k = lambda_reg * lambda_reg * k as f64;
    let s = s as f64;
    let eta = (s + weighted_k) / s.min(weighted_k);
    let t = 1.0 / (2.0 * std::f64::consts::SQRT_2) + eta.sqrt();
    Ok(ThresholdReport {
        eta,
        threshold: 1.0 / (1.0 + t * t).sqrt(),
        delta_2s2k: None,
        satisfied: false,
        rip: None,
    })
}

/// Computes `delta_{2s,2k}` of the materialized model and compares it with
/// [`recovery_threshold`]. Support sizes are capped at the block widths, where
/// the constant no longer changes.
pub fn certify_uniqueness(
    model: &SensingModel,
    s: usize,
    k: usize,
    lambda_reg: f64,
    budget: u128,
) -> Result<ThresholdReport> {
    let mut report = recovery_threshold(s, k, lambda_reg)?;
    let a = model.a.materialize()?;
    let h = model.h.materialize()?;
    let rip = exact_skrip(&a, &h, (2 * s).min(a.ncols()), (2 * k).min(h.ncols()), budget)?;
    report.delta_2s2k = Some(rip.delta);
    report.satisfied = rip.delta < report.threshold;
    report.rip = Some(rip);
    Ok(report)
}

fn clamped_log(x: f64) -> f64 {
    x.ln().max(1.0)
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("delta must lie in (0, 1), got {delta}")))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("{name} must be positive, got {v}")))
    }
}

/// Measurement counts sufficient for the `(s,k)`-RIP of `[U D B, I]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UdbBounds {
    pub m_signal: f64,
    pub m_corruption: f64,
}

/// Evaluates the two measurement-count conditions for UDB models. The
/// constants are not known, so the numbers only show scaling. Logs are
/// natural and clamped below at 1.
#[allow(clippy::too_many_arguments)]
pub fn sample_bound_udb(
    s: usize,
    k: usize,
    n_tilde: usize,
    mu_b: f64,
    delta: f64,
    c5: f64,
    c6: f64,
) -> Result<UdbBounds> {
    if s == 0 || k == 0 || n_tilde == 0 {
        return Err(Error::Argument("s, k and n_tilde must be positive".into()));
    }
    check_delta(delta)?;
    check_positive("mu_b", mu_b)?;
    check_positive("c5", c5)?;
    check_positive("c6", c6)?;
    let (s, k, nt) = (s as f64, k as f64, n_tilde as f64);
    let l_nt = clamped_log(nt).powi(2);
    Ok(UdbBounds {
        m_signal: c5 / (delta * delta) * s * nt * mu_b * mu_b * clamped_log(s).powi(2) * l_nt,
        m_corruption: c6 / (delta * delta) * k * clamped_log(k).powi(2) * l_nt,
    })
}

/// Constants `c7..c11` of the subsampled-orthonormal conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsampledConstants {
    pub c7: f64,
    pub c8: f64,
    pub c9: f64,
    pub c10: f64,
    pub c11: f64,
}

impl Default for SubsampledConstants {
    fn default() -> Self {
        SubsampledConstants {
            c7: 1.0,
            c8: 1.0,
            c9: 1.0,
            c10: 1.0,
            c11: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsampledBounds {
    /// The three terms of the signal lower bound; `m` must exceed their max.
    pub signal_terms: [f64; 3],
    pub m_signal: f64,
    pub m_corruption: f64,
    /// Upper limit on `m`.
    pub m_max: f64,
    /// True when the upper limit is below the larger lower bound, i.e. no `m`
    /// satisfies all conditions with these constants.
    pub upper_binding: bool,
}

/// Evaluates the measurement-count conditions for `sqrt(n/M) R G` with a
/// bounded unitary `H`. Logs are natural and clamped below at 1.
pub fn sample_bound_subsampled(
    s: usize,
    k: usize,
    n: usize,
    mu_g: f64,
    delta: f64,
    c: SubsampledConstants,
) -> Result<SubsampledBounds> {
    if s == 0 || k == 0 || n == 0 {
        return Err(Error::Argument("s, k and n must be positive".into()));
    }
    check_delta(delta)?;
    check_positive("mu_g", mu_g)?;
    for (name, v) in [
        ("c7", c.c7),
        ("c8", c.c8),
        ("c9", c.c9),
        ("c10", c.c10),
        ("c11", c.c11),
    ] {
        check_positive(name, v)?;
    }
    let (sf, kf, nf) = (s as f64, k as f64, n as f64);
    let d2 = delta * delta;
    let ln_n = clamped_log(nf);
    let coh = nf * mu_g * mu_g;
    let signal_terms = [
        c.c7 / d2 * sf * coh * clamped_log(sf).powi(2) * ln_n.powi(2),
        c.c8 * d2 * sf * ln_n.powi(4),
        2.0 * c.c9 * ln_n,
    ];
    let m_signal = signal_terms.iter().copied().fold(0.0, f64::max);
    let m_corruption = c.c10 / d2 * kf * coh * clamped_log(kf).powi(2) * ln_n.powi(2);
    let m_max = c.c11 * d2 * nf;
    Ok(SubsampledBounds {
        signal_terms,
        m_signal,
        m_corruption,
        m_max,
        upper_binding: m_max < m_signal.max(m_corruption),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(rows: usize, cols: usize, v: &[f64]) -> DenseMatrix {
        DenseMatrix::from_row_iterator(rows, cols, v.iter().map(|&x| C64::new(x, 0.0)))
    }

    #[test]
    fn combinations_are_lexicographic() {
        assert_eq!(combinations(4, 2), vec![0, 1, 0, 2, 0, 3, 1, 2, 1, 3, 2, 3]);
        assert_eq!(combinations(3, 3), vec![0, 1, 2]);
        assert!(combinations(3, 0).is_empty());
        assert_eq!(binomial(512, 2), 130816);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn orthonormal_columns_have_zero_constant() {
        let a = DenseMatrix::identity(4, 4);
        for s in 1..=4 {
            assert!(exact_rip(&a, s, DEFAULT_BUDGET).unwrap().delta < 1e-15);
        }
    }

    #[test]
    fn diagonal_witness() {
        let a = real(2, 2, &[2f64.sqrt(), 0.0, 0.0, 1.0]);
        let r = exact_rip(&a, 1, DEFAULT_BUDGET).unwrap();
        assert!((r.delta - 1.0).abs() < 1e-12);
        assert_eq!(r.signal_support, vec![0]);
        assert!((r.eig_max - 2.0).abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let a = DenseMatrix::identity(20, 20);
        let err = exact_rip(&a, 10, 1000).unwrap_err();
        assert!(matches!(err, Error::Budget { .. }));
    }

    #[test]
    fn zero_signal_support_with_unitary_h() {
        let a = real(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let h = DenseMatrix::identity(2, 2);
        for k in 0..=2 {
            assert!(exact_skrip(&a, &h, 0, k, DEFAULT_BUDGET).unwrap().delta < 1e-15);
        }
    }

    #[test]
    fn threshold_at_balanced_sparsity() {
        let r = recovery_threshold(5, 5, 1.0).unwrap();
        assert!((r.eta - 2.0).abs() < 1e-15);
        assert!((r.threshold - 0.49237).abs() < 1e-5);
        let balanced = recovery_threshold(3, 12, 0.5).unwrap();
        assert!((balanced.eta - 2.0).abs() < 1e-12);
        assert!(recovery_threshold(1, 100, 1.0).unwrap().threshold < r.threshold);
    }

    #[test]
    fn udb_bound_at_unit_sparsity() {
        let b = sample_bound_udb(1, 1, 512, 1.0 / 512f64.sqrt(), 0.5, 1.0, 1.0).unwrap();
        let expect = 4.0 * 512f64.ln().powi(2);
        assert!((b.m_signal - expect).abs() < 1e-9);
        assert!((b.m_signal - 155.6).abs() < 0.1);
    }

    #[test]
    fn subsampled_upper_clause() {
        let b = sample_bound_subsampled(
            2,
            2,
            512,
            1.0 / 512f64.sqrt(),
            0.1,
            SubsampledConstants::default(),
        )
        .unwrap();
        assert!((b.m_max - 5.12).abs() < 1e-12);
        assert!(b.upper_binding);
    }
}
