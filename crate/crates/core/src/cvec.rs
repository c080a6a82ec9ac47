//! Helpers for complex vectors stored as plain `Vec<Complex64>` slices, plus
//! the two-column `re,im` CSV layout used by every persisted vector.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub fn zeros(n: usize) -> Vec<C64> {
    vec![C64::new(0.0, 0.0); n]
}

pub fn from_real(values: &[f64]) -> Vec<C64> {
    values.iter().map(|&v| C64::new(v, 0.0)).collect()
}

/// Standard basis vector `e_j` of length `n`.
pub fn basis(n: usize, j: usize) -> Vec<C64> {
    let mut e = zeros(n);
    e[j] = C64::new(1.0, 0.0);
    e
}

pub fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// `<u, v> = sum conj(u_i) v_i`.
pub fn inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[C64], c: f64) -> Vec<C64> {
    a.iter().map(|x| x * c).collect()
}

pub fn dist2(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn norm1(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr().sqrt()).sum()
}

pub fn count_nonzero(v: &[C64]) -> usize {
    v.iter().filter(|c| c.re != 0.0 || c.im != 0.0).count()
}

pub fn all_finite(v: &[C64]) -> bool {
    v.iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

/// Shortest representation that parses back to the same bits.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Writes `re,im` rows, one entry per line, with a `re,im` header.
pub fn to_csv(v: &[C64]) -> String {
    let mut out = String::with_capacity(24 * v.len() + 6);
    out.push_str("re,im\n");
    for c in v {
        let _ = writeln!(out, "{},{}", fmt_f64(c.re), fmt_f64(c.im));
    }
    out
}

/// Parses the output of [`to_csv`]. The header line is optional.
pub fn from_csv(text: &str) -> Result<Vec<C64>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line == "re,im" {
            continue;
        }
        let (re, im) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("line {}: expected 're,im'", lineno + 1)))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
        };
        out.push(C64::new(parse(re)?, parse(im)?));
    }
    if !all_finite(&out) {
        return Err(Error::Parse("vector contains non-finite entries".into()));
    }
    Ok(out)
}
