//! Structured linear operators over complex vectors.
//!
//! Every operator exposes the same contract: `apply` (forward action) and
//! `apply_adjoint` (conjugate-transpose action), both checked against the
//! operator's dimensions. Sensing models are built exclusively by composing
//! the primitives defined here, so solvers never need to know whether they
//! are looking at a dense matrix or a chain of fast transforms.
//!
//! Conventions:
//! * `WalshHadamard(n)` is the Sylvester-ordered Hadamard matrix scaled by
//!   `1/sqrt(n)`, applied with an in-place butterfly.
//! * `Fourier(n)` is the unitary DFT, `F_jk = exp(-2 pi i jk / n) / sqrt(n)`.
//! * `Circulant(eps)` has `eps` as its first column, so `C x` is the cyclic
//!   convolution `eps * x`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};

use crate::cvec::{self, C64};
use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<C64>;

/// Default cap on `rows * cols` for [`LinearOperator::materialize`].
pub const MATERIALIZE_BUDGET: usize = 1 << 22;

/// Public tag for the operator variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Dense,
    Diagonal,
    Subsample,
    WalshHadamard,
    Fourier,
    Circulant,
    Scaled,
    Composed,
    HStacked,
}

impl OpKind {
    pub fn name(self) -> &'static str {
        match self {
            OpKind::Dense => "dense",
            OpKind::Diagonal => "diagonal",
            OpKind::Subsample => "subsample",
            OpKind::WalshHadamard => "walsh_hadamard",
            OpKind::Fourier => "fourier",
            OpKind::Circulant => "circulant",
            OpKind::Scaled => "scaled",
            OpKind::Composed => "composed",
            OpKind::HStacked => "hstacked",
        }
    }
}

struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftPair {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftPair {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }
}

enum Kind {
    Dense(DenseMatrix),
    Diagonal(Vec<C64>),
    Subsample(Vec<usize>),
    WalshHadamard,
    Fourier {
        fft: FftPair,
        inverse: bool,
    },
    Circulant {
        generator: Vec<C64>,
        /// Unnormalized DFT of the generator.
        spectrum: Vec<C64>,
        fft: FftPair,
    },
    Scaled(C64, LinearOperator),
    Composed(LinearOperator, LinearOperator),
    HStacked(LinearOperator, LinearOperator),
}

struct Node {
    rows: usize,
    cols: usize,
    seed: Option<u64>,
    kind: Kind,
}

/// Immutable, cheaply clonable handle to a linear map `C^cols -> C^rows`.
#[derive(Clone)]
pub struct LinearOperator(Arc<Node>);

/// Result of [`LinearOperator::power_iteration`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn is_power_of_two(n: usize) -> bool {
    n > 0 && n & (n - 1) == 0
}

/// In-place unnormalized Sylvester Walsh-Hadamard butterfly.
pub fn fwht_in_place(data: &mut [C64]) {
    let n = data.len();
    debug_assert!(is_power_of_two(n));
    let mut h = 1;
    while h < n {
        for block in data.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

impl LinearOperator {
    fn from_node(rows: usize, cols: usize, kind: Kind) -> Self {
        LinearOperator(Arc::new(Node {
            rows,
            cols,
            seed: None,
            kind,
        }))
    }

    pub fn dense(matrix: DenseMatrix) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::Shape("dense operator must be non-empty".into()));
        }
        Ok(Self::from_node(
            matrix.nrows(),
            matrix.ncols(),
            Kind::Dense(matrix),
        ))
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(vec![C64::new(1.0, 0.0); n.max(1)])
    }

    pub fn diagonal(d: Vec<C64>) -> Self {
        let n = d.len();
        assert!(n > 0, "diagonal operator must be non-empty");
        Self::from_node(n, n, Kind::Diagonal(d))
    }

    /// Row selector `R_Omega : C^n -> C^|Omega|`.
    pub fn subsample(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Shape("subsample index set is empty".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Shape(
                "subsample indices must be strictly increasing".into(),
            ));
        }
        if *indices.last().unwrap() >= n {
            return Err(Error::Shape(format!(
                "subsample index {} out of range for length {n}",
                indices.last().unwrap()
            )));
        }
        Ok(Self::from_node(indices.len(), n, Kind::Subsample(indices)))
    }

    pub fn walsh_hadamard(n: usize) -> Result<Self> {
        if !is_power_of_two(n) {
            return Err(Error::Shape(format!(
                "Walsh-Hadamard size {n} is not a power of two"
            )));
        }
        Ok(Self::from_node(n, n, Kind::WalshHadamard))
    }

    pub fn fourier(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Shape("Fourier size must be positive".into()));
        }
        Ok(Self::from_node(
            n,
            n,
            Kind::Fourier {
                fft: FftPair::new(n),
                inverse: false,
            },
        ))
    }

    /// The adjoint (inverse) unitary DFT, `F*`.
    pub fn inverse_fourier(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Shape("Fourier size must be positive".into()));
        }
        Ok(Self::from_node(
            n,
            n,
            Kind::Fourier {
                fft: FftPair::new(n),
                inverse: true,
            },
        ))
    }

    /// Circulant matrix whose first column is `generator`.
    pub fn circulant(generator: Vec<C64>) -> Result<Self> {
        let n = generator.len();
        if n == 0 {
            return Err(Error::Shape("circulant generator is empty".into()));
        }
        let fft = FftPair::new(n);
        let mut spectrum = generator.clone();
        fft.forward.process(&mut spectrum);
        Ok(Self::from_node(
            n,
            n,
            Kind::Circulant {
                generator,
                spectrum,
                fft,
            },
        ))
    }

    pub fn scaled(factor: C64, op: LinearOperator) -> Self {
        let (rows, cols) = op.shape();
        Self::from_node(rows, cols, Kind::Scaled(factor, op))
    }

    pub fn scaled_real(factor: f64, op: LinearOperator) -> Self {
        Self::scaled(C64::new(factor, 0.0), op)
    }

    /// `outer . inner`.
    pub fn compose(outer: LinearOperator, inner: LinearOperator) -> Result<Self> {
        if outer.cols() != inner.rows() {
            return Err(Error::Dimension {
                what: "compose: cols(outer) vs rows(inner)",
                expected: outer.cols(),
                got: inner.rows(),
            });
        }
        let (rows, cols) = (outer.rows(), inner.cols());
        Ok(Self::from_node(rows, cols, Kind::Composed(outer, inner)))
    }

    /// Right-to-left product of a chain, `ops[0] . ops[1] . ... . ops[last]`.
    pub fn chain(ops: &[LinearOperator]) -> Result<Self> {
        let mut iter = ops.iter().rev();
        let mut acc = iter
            .next()
            .cloned()
            .ok_or_else(|| Error::Argument("empty operator chain".into()))?;
        for op in iter {
            acc = Self::compose(op.clone(), acc)?;
        }
        Ok(acc)
    }

    /// `[A, H]`, acting on the stacked vector `(u; w)`.
    pub fn hstack(a: LinearOperator, h: LinearOperator) -> Result<Self> {
        if a.rows() != h.rows() {
            return Err(Error::Dimension {
                what: "hstack: rows(A) vs rows(H)",
                expected: a.rows(),
                got: h.rows(),
            });
        }
        let (rows, cols) = (a.rows(), a.cols() + h.cols());
        Ok(Self::from_node(rows, cols, Kind::HStacked(a, h)))
    }

    /// Attaches the seed that generated this operator, for log headers.
    pub fn with_seed(self, seed: u64) -> Self {
        match Arc::try_unwrap(self.0) {
            Ok(mut node) => {
                node.seed = Some(seed);
                LinearOperator(Arc::new(node))
            }
            Err(shared) => {
                // Shared node: wrap in a unit scaling so the original stays untouched.
                let inner = LinearOperator(shared);
                let (rows, cols) = inner.shape();
                LinearOperator(Arc::new(Node {
                    rows,
                    cols,
                    seed: Some(seed),
                    kind: Kind::Scaled(C64::new(1.0, 0.0), inner),
                }))
            }
        }
    }

    pub fn rows(&self) -> usize {
        self.0.rows
    }

    pub fn cols(&self) -> usize {
        self.0.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.0.rows, self.0.cols)
    }

    pub fn seed(&self) -> Option<u64> {
        self.0.seed
    }

    pub fn kind(&self) -> OpKind {
        match &self.0.kind {
            Kind::Dense(_) => OpKind::Dense,
            Kind::Diagonal(_) => OpKind::Diagonal,
            Kind::Subsample(_) => OpKind::Subsample,
            Kind::WalshHadamard => OpKind::WalshHadamard,
            Kind::Fourier { .. } => OpKind::Fourier,
            Kind::Circulant { .. } => OpKind::Circulant,
            Kind::Scaled(..) => OpKind::Scaled,
            Kind::Composed(..) => OpKind::Composed,
            Kind::HStacked(..) => OpKind::HStacked,
        }
    }

    /// Diagonal entries for `Diagonal`, generator for `Circulant`.
    pub fn diagonal_entries(&self) -> Option<&[C64]> {
        match &self.0.kind {
            Kind::Diagonal(d) => Some(d),
            Kind::Circulant { generator, .. } => Some(generator),
            _ => None,
        }
    }

    pub fn subsample_indices(&self) -> Option<&[usize]> {
        match &self.0.kind {
            Kind::Subsample(idx) => Some(idx),
            _ => None,
        }
    }

    /// Children of a `HStacked` operator, `(A, H)`.
    pub fn blocks(&self) -> Option<(&LinearOperator, &LinearOperator)> {
        match &self.0.kind {
            Kind::HStacked(a, h) => Some((a, h)),
            _ => None,
        }
    }

    fn structure(&self) -> String {
        match &self.0.kind {
            Kind::Scaled(_, op) => format!("scaled({})", op.structure()),
            Kind::Composed(a, b) => format!("composed({},{})", a.structure(), b.structure()),
            Kind::HStacked(a, b) => format!("hstacked({},{})", a.structure(), b.structure()),
            Kind::Fourier { inverse: true, .. } => "fourier_adjoint".to_string(),
            _ => self.kind().name().to_string(),
        }
    }

    /// One-line `key=value` header used in logs and manifests.
    pub fn describe(&self) -> String {
        let seed = self
            .0
            .seed
            .map(|s| s.to_string())
            .unwrap_or_else(|| "-".to_string());
        format!(
            "kind={} rows={} cols={} seed={}",
            self.structure(),
            self.rows(),
            self.cols(),
            seed
        )
    }

    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.cols() {
            return Err(Error::Dimension {
                what: "apply: input length vs cols",
                expected: self.cols(),
                got: x.len(),
            });
        }
        Ok(self.forward(x))
    }

    pub fn apply_adjoint(&self, u: &[C64]) -> Result<Vec<C64>> {
        if u.len() != self.rows() {
            return Err(Error::Dimension {
                what: "apply_adjoint: input length vs rows",
                expected: self.rows(),
                got: u.len(),
            });
        }
        Ok(self.adjoint(u))
    }

    /// Forward action without the length check; callers guarantee `x.len() == cols`.
    pub(crate) fn forward(&self, x: &[C64]) -> Vec<C64> {
        match &self.0.kind {
            Kind::Dense(m) => {
                let v = nalgebra::DVector::from_column_slice(x);
                (m * v).as_slice().to_vec()
            }
            Kind::Diagonal(d) => d.iter().zip(x).map(|(a, b)| a * b).collect(),
            Kind::Subsample(idx) => idx.iter().map(|&i| x[i]).collect(),
            Kind::WalshHadamard => {
                let mut out = x.to_vec();
                fwht_in_place(&mut out);
                let s = 1.0 / (out.len() as f64).sqrt();
                out.iter_mut().for_each(|c| *c *= s);
                out
            }
            Kind::Fourier { fft, inverse } => {
                let mut out = x.to_vec();
                if *inverse {
                    fft.inverse.process(&mut out);
                } else {
                    fft.forward.process(&mut out);
                }
                let s = 1.0 / (out.len() as f64).sqrt();
                out.iter_mut().for_each(|c| *c *= s);
                out
            }
            Kind::Circulant { spectrum, fft, .. } => circular_filter(fft, spectrum, x, false),
            Kind::Scaled(c, op) => {
                let mut out = op.forward(x);
                out.iter_mut().for_each(|v| *v *= c);
                out
            }
            Kind::Composed(outer, inner) => outer.forward(&inner.forward(x)),
            Kind::HStacked(a, h) => {
                let (xa, xh) = x.split_at(a.cols());
                let mut out = a.forward(xa);
                for (o, v) in out.iter_mut().zip(h.forward(xh)) {
                    *o += v;
                }
                out
            }
        }
    }

    pub(crate) fn adjoint(&self, u: &[C64]) -> Vec<C64> {
        match &self.0.kind {
            Kind::Dense(m) => {
                let v = nalgebra::DVector::from_column_slice(u);
                (m.adjoint() * v).as_slice().to_vec()
            }
            Kind::Diagonal(d) => d.iter().zip(u).map(|(a, b)| a.conj() * b).collect(),
            Kind::Subsample(idx) => {
                let mut out = cvec::zeros(self.cols());
                for (&i, &v) in idx.iter().zip(u) {
                    out[i] = v;
                }
                out
            }
            // Real symmetric.
            Kind::WalshHadamard => self.forward(u),
            Kind::Fourier { fft, inverse } => {
                let mut out = u.to_vec();
                if *inverse {
                    fft.forward.process(&mut out);
                } else {
                    fft.inverse.process(&mut out);
                }
                let s = 1.0 / (out.len() as f64).sqrt();
                out.iter_mut().for_each(|c| *c *= s);
                out
            }
            Kind::Circulant { spectrum, fft, .. } => circular_filter(fft, spectrum, u, true),
            Kind::Scaled(c, op) => {
                let mut out = op.adjoint(u);
                let cc = c.conj();
                out.iter_mut().for_each(|v| *v *= cc);
                out
            }
            Kind::Composed(outer, inner) => inner.adjoint(&outer.adjoint(u)),
            Kind::HStacked(a, h) => {
                let mut out = a.adjoint(u);
                out.extend(h.adjoint(u));
                out
            }
        }
    }

    /// Dense matrix `M` with `M e_j = apply(e_j)`.
    pub fn materialize(&self) -> Result<DenseMatrix> {
        self.materialize_with_budget(MATERIALIZE_BUDGET)
    }

    pub fn materialize_with_budget(&self, budget: usize) -> Result<DenseMatrix> {
        let needed = self.rows() as u128 * self.cols() as u128;
        if needed > budget as u128 {
            return Err(Error::Budget {
                what: "materialize: rows*cols",
                needed,
                budget: budget as u128,
            });
        }
        if let Kind::Dense(m) = &self.0.kind {
            return Ok(m.clone());
        }
        let mut out = DenseMatrix::zeros(self.rows(), self.cols());
        let mut e = cvec::zeros(self.cols());
        for j in 0..self.cols() {
            e[j] = C64::new(1.0, 0.0);
            let col = self.forward(&e);
            out.column_mut(j).copy_from_slice(&col);
            e[j] = C64::new(0.0, 0.0);
        }
        Ok(out)
    }

    /// Estimates the largest singular value by power iteration on `L* L`.
    ///
    /// Stops once the relative change between consecutive estimates is at most
    /// `tol`; otherwise returns the last estimate with `converged == false`.
    pub fn power_iteration(&self, tol: f64, max_iter: usize, seed: u64) -> NormEstimate {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<C64> = (0..self.cols())
            .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        let nv = cvec::norm2(&v);
        v.iter_mut().for_each(|c| *c /= nv);

        let mut prev = f64::NAN;
        let mut estimate = 0.0;
        for it in 1..=max_iter.max(1) {
            let w = self.adjoint(&self.forward(&v));
            let nw = cvec::norm2(&w);
            if nw == 0.0 {
                // v fell into the null space; the operator is zero on this trajectory.
                return NormEstimate {
                    value: 0.0,
                    iterations: it,
                    converged: false,
                };
            }
            estimate = nw.sqrt();
            if prev.is_finite() && (estimate - prev).abs() <= tol * estimate {
                return NormEstimate {
                    value: estimate,
                    iterations: it,
                    converged: true,
                };
            }
            prev = estimate;
            v = w.into_iter().map(|c| c / nw).collect();
        }
        NormEstimate {
            value: estimate,
            iterations: max_iter,
            converged: false,
        }
    }
}

fn circular_filter(fft: &FftPair, spectrum: &[C64], x: &[C64], conjugate: bool) -> Vec<C64> {
    let n = x.len();
    let mut buf = x.to_vec();
    fft.forward.process(&mut buf);
    for (b, s) in buf.iter_mut().zip(spectrum) {
        *b *= if conjugate { s.conj() } else { *s };
    }
    fft.inverse.process(&mut buf);
    let s = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= s);
    buf
}

impl fmt::Debug for LinearOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}
