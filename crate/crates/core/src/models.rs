//! Sensing-model constructors, problem-instance generation and scalar
//! diagnostics (coherence, best s-term error).
//!
//! A model is the pair `(A, H)` in `y = A x + H z + w`, where `A` is `m x n`
//! and `H` is `m x m`. All builders are pure functions of their arguments and
//! seed; every random factor draws from its own derived sub-stream.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cvec::{self, C64};
use crate::error::{Error, Result};
use crate::linop::{LinearOperator, MATERIALIZE_BUDGET};
use crate::seed::{derive_seed, rng_for};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Mtx1,
    Mtx2,
    PartialCirculant,
    CsOfdm,
    Drpe,
    Custom,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Mtx1 => "mtx1",
            Family::Mtx2 => "mtx2",
            Family::PartialCirculant => "partial_circulant",
            Family::CsOfdm => "csofdm",
            Family::Drpe => "drpe",
            Family::Custom => "custom",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mtx1" | "mtx-i" => Ok(Family::Mtx1),
            "mtx2" | "mtx-ii" => Ok(Family::Mtx2),
            "partial_circulant" | "circulant" => Ok(Family::PartialCirculant),
            "csofdm" | "cs-ofdm" => Ok(Family::CsOfdm),
            "drpe" => Ok(Family::Drpe),
            "custom" => Ok(Family::Custom),
            other => Err(Error::Argument(format!("unknown model family '{other}'"))),
        }
    }
}

/// How the `m` measurement rows are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSelection {
    /// Uniform without replacement, from the model seed.
    Random,
    /// The first `m` indices.
    First,
}

/// Distribution of the random diagonal modulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulator {
    Rademacher,
    Gaussian,
}

/// Sparsifying basis for the DRPE model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Psi {
    Identity,
    Hadamard,
}

macro_rules! named_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn name(self) -> &'static str {
                match self { $($ty::$variant => $name),+ }
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::Argument(format!(
                        concat!("unknown ", stringify!($ty), " '{}'"), other
                    ))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

named_enum!(RowSelection { Random => "random", First => "first" });
named_enum!(Modulator { Rademacher => "rademacher", Gaussian => "gaussian" });
named_enum!(Psi { Identity => "identity", Hadamard => "hadamard" });
named_enum!(Setting { Gaussian => "gaussian", Flat => "flat" });
named_enum!(NoiseModel { Symmetric => "symmetric", OneSided => "one_sided" });

/// Everything needed to rebuild a model deterministically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub family: Family,
    pub n: usize,
    /// Number of measurements; for Mtx-II with `bernoulli_m` this is the
    /// expected row count.
    pub m: usize,
    pub seed: u64,
    pub rows: RowSelection,
    pub modulator: Modulator,
    pub psi: Psi,
    pub bernoulli_m: bool,
}

impl ModelParams {
    /// Parameters with the family's default options.
    pub fn new(family: Family, n: usize, m: usize, seed: u64) -> Self {
        let rows = match family {
            Family::PartialCirculant | Family::Drpe => RowSelection::First,
            _ => RowSelection::Random,
        };
        ModelParams {
            family,
            n,
            m,
            seed,
            rows,
            modulator: Modulator::Rademacher,
            psi: Psi::Identity,
            bernoulli_m: false,
        }
    }

    pub fn build(&self) -> Result<SensingModel> {
        match self.family {
            Family::Mtx1 => mtx1(self),
            Family::Mtx2 => mtx2(self),
            Family::PartialCirculant => partial_circulant(self),
            Family::CsOfdm => csofdm(self),
            Family::Drpe => drpe(self),
            Family::Custom => Err(Error::Argument(
                "custom models cannot be rebuilt from parameters".into(),
            )),
        }
    }

    /// `key = value` lines, the inverse of [`ModelParams::from_pairs`].
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("family", self.family.to_string()),
            ("n", self.n.to_string()),
            ("m", self.m.to_string()),
            ("model_seed", self.seed.to_string()),
            ("rows", self.rows.to_string()),
            ("modulator", self.modulator.to_string()),
            ("psi", self.psi.to_string()),
            ("bernoulli_m", self.bernoulli_m.to_string()),
        ]
    }

    pub fn from_pairs(get: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let need = |k: &str| get(k).ok_or_else(|| Error::Parse(format!("missing key '{k}'")));
        let num = |k: &str| -> Result<u64> {
            need(k)?
                .parse::<u64>()
                .map_err(|e| Error::Parse(format!("key '{k}': {e}")))
        };
        let family: Family = need("family")?.parse()?;
        let mut p = ModelParams::new(family, num("n")? as usize, num("m")? as usize, num("model_seed")?);
        if let Some(v) = get("rows") {
            p.rows = v.parse()?;
        }
        if let Some(v) = get("modulator") {
            p.modulator = v.parse()?;
        }
        if let Some(v) = get("psi") {
            p.psi = v.parse()?;
        }
        if let Some(v) = get("bernoulli_m") {
            p.bernoulli_m = v
                .parse()
                .map_err(|e| Error::Parse(format!("key 'bernoulli_m': {e}")))?;
        }
        Ok(p)
    }
}

/// The pair `(A, H)` of a corrupted sensing problem.
#[derive(Clone, Debug)]
pub struct SensingModel {
    pub a: LinearOperator,
    pub h: LinearOperator,
    pub family: Family,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    /// `None` for custom models.
    pub params: Option<ModelParams>,
    /// Named structural factors (e.g. `U`, `D`, `B` for Mtx-I), kept for
    /// diagnostics.
    pub factors: Vec<(&'static str, LinearOperator)>,
}

impl SensingModel {
    pub fn custom(a: LinearOperator, h: LinearOperator) -> Result<Self> {
        if a.rows() != h.rows() || h.rows() != h.cols() {
            return Err(Error::Shape(format!(
                "custom model needs A m x n and H m x m, got A {:?} and H {:?}",
                a.shape(),
                h.shape()
            )));
        }
        Ok(SensingModel {
            m: a.rows(),
            n: a.cols(),
            a,
            h,
            family: Family::Custom,
            seed: 0,
            params: None,
            factors: Vec::new(),
        })
    }

    /// `Theta = [A, H]`.
    pub fn theta(&self) -> LinearOperator {
        LinearOperator::hstack(self.a.clone(), self.h.clone()).expect("model blocks share rows")
    }

    pub fn factor(&self, name: &str) -> Option<&LinearOperator> {
        self.factors.iter().find(|(k, _)| *k == name).map(|(_, op)| op)
    }

    /// `A x + H z`.
    pub fn measure(&self, x: &[C64], z: &[C64]) -> Result<Vec<C64>> {
        let ax = self.a.apply(x)?;
        let hz = self.h.apply(z)?;
        Ok(cvec::add(&ax, &hz))
    }
}

fn is_power_of_two(n: usize) -> bool {
    n > 0 && n & (n - 1) == 0
}

fn check_dims(p: &ModelParams, need_pow2_m: bool) -> Result<()> {
    if !is_power_of_two(p.n) {
        return Err(Error::Shape(format!("n = {} is not a power of two", p.n)));
    }
    if p.m == 0 || p.m > p.n {
        return Err(Error::Shape(format!("need 1 <= m <= n, got m = {}, n = {}", p.m, p.n)));
    }
    if need_pow2_m && !is_power_of_two(p.m) {
        return Err(Error::Shape(format!("M = {} is not a power of two", p.m)));
    }
    Ok(())
}

// Sub-stream tags within a model seed.
const ROWS: u64 = 1;
const MODULATOR: u64 = 2;
const PHASES: u64 = 3;

fn select_rows(p: &ModelParams) -> Vec<usize> {
    match p.rows {
        RowSelection::First => (0..p.m).collect(),
        RowSelection::Random => {
            let mut rng = rng_for(p.seed, &[ROWS]);
            let mut idx = index::sample(&mut rng, p.n, p.m).into_vec();
            idx.sort_unstable();
            idx
        }
    }
}

fn modulator(p: &ModelParams) -> Vec<C64> {
    let mut rng = rng_for(p.seed, &[MODULATOR]);
    (0..p.n)
        .map(|_| match p.modulator {
            Modulator::Rademacher => C64::new(if rng.random_bool(0.5) { 1.0 } else { -1.0 }, 0.0),
            Modulator::Gaussian => C64::new(StandardNormal.sample(&mut rng), 0.0),
        })
        .collect()
}

fn finish(
    p: &ModelParams,
    a: LinearOperator,
    h: LinearOperator,
    factors: Vec<(&'static str, LinearOperator)>,
) -> SensingModel {
    SensingModel {
        m: a.rows(),
        n: a.cols(),
        a: a.with_seed(p.seed),
        h,
        family: p.family,
        seed: p.seed,
        params: Some(*p),
        factors,
    }
}

/// Mtx-I: `A = U D B` with `U` a row-subsampled `+-1/sqrt(m)` Hadamard frame,
/// `D` a Rademacher diagonal and `B` the normalized Hadamard; `H = I`.
pub fn build_mtx1(n: usize, m: usize, seed: u64) -> Result<SensingModel> {
    ModelParams::new(Family::Mtx1, n, m, seed).build()
}

fn mtx1(p: &ModelParams) -> Result<SensingModel> {
    check_dims(p, false)?;
    let (n, m) = (p.n, p.m);
    let rows = LinearOperator::subsample(select_rows(p), n)?;
    let u = LinearOperator::scaled_real(
        (n as f64 / m as f64).sqrt(),
        LinearOperator::compose(rows, LinearOperator::walsh_hadamard(n)?)?,
    );
    let d = LinearOperator::diagonal(modulator(p));
    let b = LinearOperator::walsh_hadamard(n)?;
    let a = LinearOperator::chain(&[u.clone(), d.clone(), b.clone()])?;
    Ok(finish(p, a, LinearOperator::identity(m), vec![("U", u), ("D", d), ("B", b)]))
}

/// Mtx-II: `A = sqrt(n/M) R G` with `G` the normalized Hadamard and `H` the
/// normalized `M x M` Hadamard.
pub fn build_mtx2(n: usize, m: usize, seed: u64) -> Result<SensingModel> {
    ModelParams::new(Family::Mtx2, n, m, seed).build()
}

fn mtx2(p: &ModelParams) -> Result<SensingModel> {
    check_dims(p, !p.bernoulli_m)?;
    let n = p.n;
    let omega = if p.bernoulli_m {
        // Each row kept independently with probability m/n; M is random.
        let prob = p.m as f64 / n as f64;
        let mut attempt = 0u64;
        loop {
            let mut rng = rng_for(p.seed, &[ROWS, attempt]);
            let idx: Vec<usize> = (0..n).filter(|_| rng.random_bool(prob)).collect();
            if !idx.is_empty() {
                break idx;
            }
            attempt += 1;
        }
    } else {
        select_rows(p)
    };
    let big_m = omega.len();
    let g = LinearOperator::walsh_hadamard(n)?;
    let r = LinearOperator::subsample(omega, n)?;
    let a = LinearOperator::scaled_real(
        (n as f64 / big_m as f64).sqrt(),
        LinearOperator::compose(r.clone(), g.clone())?,
    );
    // A random M is generally not a power of two; fall back to the DFT.
    let h = if is_power_of_two(big_m) {
        LinearOperator::walsh_hadamard(big_m)?
    } else {
        LinearOperator::fourier(big_m)?
    };
    Ok(finish(p, a, h, vec![("R", r), ("G", g)]))
}

/// Partial random circulant: `A = sqrt(n/m) R F* diag(xi) F`, equivalently
/// `(1/sqrt(m)) R C_eps` with `eps = F* xi`; `H = I`.
pub fn build_partial_circulant(n: usize, m: usize, seed: u64) -> Result<SensingModel> {
    ModelParams::new(Family::PartialCirculant, n, m, seed).build()
}

fn partial_circulant(p: &ModelParams) -> Result<SensingModel> {
    check_dims(p, false)?;
    let (n, m) = (p.n, p.m);
    let r = LinearOperator::subsample(select_rows(p), n)?;
    let xi = modulator(p);
    let f = LinearOperator::fourier(n)?;
    let f_inv = LinearOperator::inverse_fourier(n)?;
    let d = LinearOperator::diagonal(xi.clone());
    let a = LinearOperator::scaled_real(
        (n as f64 / m as f64).sqrt(),
        LinearOperator::chain(&[r.clone(), f_inv.clone(), d.clone(), f])?,
    );
    let eps = f_inv.forward(&xi);
    let c = LinearOperator::circulant(eps)?;
    Ok(finish(
        p,
        a,
        LinearOperator::identity(m),
        vec![("R", r), ("D", d), ("C_eps", c)],
    ))
}

/// CS-OFDM pilot model: `A = sqrt(n/m) R F* diag(g) F` with a Golay pilot
/// `g`; the interference is sparse in the Fourier domain, `H = F_m`.
pub fn build_csofdm(n: usize, m: usize, seed: u64) -> Result<SensingModel> {
    ModelParams::new(Family::CsOfdm, n, m, seed).build()
}

fn golay_diagonal(n: usize) -> LinearOperator {
    let q = n.trailing_zeros();
    let g = if q == 0 { vec![1.0] } else { golay_pair(q).a };
    LinearOperator::diagonal(cvec::from_real(&g))
}

fn csofdm(p: &ModelParams) -> Result<SensingModel> {
    check_dims(p, false)?;
    let (n, m) = (p.n, p.m);
    let r = LinearOperator::subsample(select_rows(p), n)?;
    let g = golay_diagonal(n);
    let core = LinearOperator::chain(&[
        LinearOperator::inverse_fourier(n)?,
        g.clone(),
        LinearOperator::fourier(n)?,
    ])?;
    let a = LinearOperator::scaled_real(
        (n as f64 / m as f64).sqrt(),
        LinearOperator::compose(r.clone(), core.clone())?,
    );
    let h = LinearOperator::fourier(m)?;
    Ok(finish(p, a, h, vec![("R", r), ("G_pilot", g), ("Basis", core)]))
}

/// DRPE with a Golay input mask:
/// `A = sqrt(n/m) R F* L1 F diag(g) Psi`, `L1` random unimodular phases.
pub fn build_drpe(n: usize, m: usize, psi: Psi, seed: u64) -> Result<SensingModel> {
    let mut p = ModelParams::new(Family::Drpe, n, m, seed);
    p.psi = psi;
    p.build()
}

fn drpe(p: &ModelParams) -> Result<SensingModel> {
    check_dims(p, false)?;
    let (n, m) = (p.n, p.m);
    let r = LinearOperator::subsample(select_rows(p), n)?;
    let mut rng = rng_for(p.seed, &[PHASES]);
    let phases: Vec<C64> = (0..n)
        .map(|_| C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
        .collect();
    let lambda1 = LinearOperator::diagonal(phases);
    let f = LinearOperator::fourier(n)?;
    let psi = match p.psi {
        Psi::Identity => LinearOperator::identity(n),
        Psi::Hadamard => LinearOperator::walsh_hadamard(n)?,
    };
    let frame = LinearOperator::scaled_real(
        (n as f64 / m as f64).sqrt(),
        LinearOperator::compose(r, LinearOperator::inverse_fourier(n)?)?,
    );
    let basis = LinearOperator::chain(&[f.clone(), golay_diagonal(n), psi])?;
    let a = LinearOperator::chain(&[frame.clone(), lambda1.clone(), basis.clone()])?;
    Ok(finish(
        p,
        a,
        LinearOperator::identity(m),
        vec![("U", frame), ("D", lambda1), ("B", basis)],
    ))
}

/// Golay complementary pair of length `2^q`.
#[derive(Debug, Clone, PartialEq)]
pub struct GolayPair {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// Doubling construction `a' = a || b`, `b' = a || -b` from `a = b = (1)`.
pub fn golay_pair(q: u32) -> GolayPair {
    let mut a = vec![1.0];
    let mut b = vec![1.0];
    for _ in 0..q {
        let mut a2 = a.clone();
        a2.extend_from_slice(&b);
        let mut b2 = a;
        b2.extend(b.iter().map(|v| -v));
        a = a2;
        b = b2;
    }
    GolayPair { a, b }
}

/// Sparse vector with i.i.d. standard normal (`Gaussian`) or all-ones
/// (`Flat`) values on a uniformly random support.
pub fn gen_sparse(len: usize, s: usize, setting: Setting, seed: u64) -> Result<Vec<C64>> {
    if s > len {
        return Err(Error::Sparsity { s, len });
    }
    let mut out = cvec::zeros(len);
    if s == 0 {
        return Ok(out);
    }
    let mut support_rng = rng_for(seed, &[0]);
    let mut support = index::sample(&mut support_rng, len, s).into_vec();
    support.sort_unstable();
    let mut value_rng = rng_for(seed, &[1]);
    for i in support {
        let v = match setting {
            Setting::Flat => 1.0,
            Setting::Gaussian => loop {
                let g: f64 = StandardNormal.sample(&mut value_rng);
                if g != 0.0 {
                    break g;
                }
            },
        };
        out[i] = C64::new(v, 0.0);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    Gaussian,
    Flat,
}

/// Dense noise entries: `+-amp` with equal probability, or `{0, amp}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseModel {
    #[default]
    Symmetric,
    OneSided,
}

/// Ground truth and observation for one trial.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub model: SensingModel,
    pub x_true: Vec<C64>,
    pub z_true: Vec<C64>,
    pub w: Vec<C64>,
    pub y: Vec<C64>,
    pub s: usize,
    pub k: usize,
    pub setting: Setting,
    pub noise_amp: f64,
    pub noise_model: NoiseModel,
    pub seed: u64,
}

impl ProblemInstance {
    /// Sub-seeds used for `(x, z, w)`.
    pub fn sub_seeds(&self) -> [u64; 3] {
        instance_sub_seeds(self.seed)
    }
}

fn instance_sub_seeds(seed: u64) -> [u64; 3] {
    [derive_seed(seed, &[1]), derive_seed(seed, &[2]), derive_seed(seed, &[3])]
}

pub fn gen_instance(
    model: &SensingModel,
    s: usize,
    k: usize,
    setting: Setting,
    noise_amp: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    gen_instance_with(model, s, k, setting, noise_amp, NoiseModel::Symmetric, seed)
}

pub fn gen_instance_with(
    model: &SensingModel,
    s: usize,
    k: usize,
    setting: Setting,
    noise_amp: f64,
    noise_model: NoiseModel,
    seed: u64,
) -> Result<ProblemInstance> {
    if !(noise_amp >= 0.0 && noise_amp.is_finite()) {
        return Err(Error::Argument(format!("noise amplitude must be >= 0, got {noise_amp}")));
    }
    let [sx, sz, sw] = instance_sub_seeds(seed);
    let x_true = gen_sparse(model.n, s, setting, sx)?;
    let z_true = gen_sparse(model.m, k, setting, sz)?;
    let w = if noise_amp == 0.0 {
        cvec::zeros(model.m)
    } else {
        let mut rng = rng_for(sw, &[]);
        (0..model.m)
            .map(|_| {
                let bit = rng.random_bool(0.5);
                let v = match (noise_model, bit) {
                    (NoiseModel::Symmetric, true) => noise_amp,
                    (NoiseModel::Symmetric, false) => -noise_amp,
                    (NoiseModel::OneSided, true) => noise_amp,
                    (NoiseModel::OneSided, false) => 0.0,
                };
                C64::new(v, 0.0)
            })
            .collect()
    };
    let y = cvec::add(&model.measure(&x_true, &z_true)?, &w);
    Ok(ProblemInstance {
        model: model.clone(),
        x_true,
        z_true,
        w,
        y,
        s,
        k,
        setting,
        noise_amp,
        noise_model,
        seed,
    })
}

/// Largest entry magnitude of the materialized operator.
pub fn coherence(op: &LinearOperator) -> Result<f64> {
    let m = op.materialize_with_budget(MATERIALIZE_BUDGET)?;
    Ok(m.iter().map(|c| c.norm()).fold(0.0, f64::max))
}

/// l_p norm of `a` after zeroing its `s` largest-magnitude entries (ties keep
/// the lowest index). `p = f64::INFINITY` gives the max norm.
pub fn best_s_term_error(a: &[C64], s: usize, p: f64) -> Result<f64> {
    if p < 1.0 || p.is_nan() {
        return Err(Error::Argument(format!("p must be >= 1, got {p}")));
    }
    if s > a.len() {
        return Err(Error::Sparsity { s, len: a.len() });
    }
    let mut order: Vec<usize> = (0..a.len()).collect();
    // Stable sort: equal magnitudes keep ascending index order.
    order.sort_by(|&i, &j| a[j].norm().total_cmp(&a[i].norm()));
    let rest = order[s..].iter().map(|&i| a[i].norm());
    Ok(if p.is_infinite() {
        rest.fold(0.0, f64::max)
    } else {
        rest.map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p)
    })
}
