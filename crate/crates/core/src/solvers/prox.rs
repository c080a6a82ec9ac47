use crate::cvec::{self, C64};
use crate::error::{Error, Result};

/// Complex magnitude shrinkage `v_i * max(0, 1 - t_i / |v_i|)`, the proximal
/// map of `sum t_i |v_i|`.
pub fn soft_threshold(v: &[C64], t: &[f64]) -> Result<Vec<C64>> {
    if v.len() != t.len() {
        return Err(Error::Dimension {
            what: "soft_threshold: thresholds vs values",
            expected: v.len(),
            got: t.len(),
        });
    }
    if let Some(bad) = t.iter().find(|&&ti| !(ti >= 0.0)) {
        return Err(Error::Argument(format!("negative threshold {bad}")));
    }
    Ok(v.iter().zip(t).map(|(&vi, &ti)| shrink(vi, ti)).collect())
}

#[inline]
pub(crate) fn shrink(v: C64, t: f64) -> C64 {
    // sqrt(norm_sqr) rather than hypot: this sits in the solver's inner loop.
    let mag2 = v.norm_sqr();
    if mag2 <= t * t {
        C64::new(0.0, 0.0)
    } else {
        v * (1.0 - t / mag2.sqrt())
    }
}

/// Euclidean projection onto the ball `{u : |u - center| <= radius}`.
pub fn project_ball(v: &[C64], center: &[C64], radius: f64) -> Result<Vec<C64>> {
    if v.len() != center.len() {
        return Err(Error::Dimension {
            what: "project_ball: center vs point",
            expected: v.len(),
            got: center.len(),
        });
    }
    if !(radius >= 0.0) {
        return Err(Error::Argument(format!("negative radius {radius}")));
    }
    let d = cvec::dist2(v, center);
    if d <= radius {
        return Ok(v.to_vec());
    }
    let f = radius / d;
    Ok(v.iter()
        .zip(center)
        .map(|(vi, ci)| ci + (vi - ci) * f)
        .collect())
}
