use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use corrsense_core::models::{self, ModelParams, NoiseModel};
use corrsense_core::{rip, solvers, DenseMatrix, Error};

create_exception!(pycorrsense, CorrsenseError, PyException);

fn py_err(e: Error) -> PyErr {
    CorrsenseError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

fn dense(rows: Vec<Vec<Complex64>>) -> PyResult<DenseMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(CorrsenseError::new_err("matrix rows must be non-empty and equal length"));
    }
    Ok(DenseMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn to_rows(m: &DenseMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// A sensing model `(A, H)` built from one of the structured families.
#[pyclass(name = "SensingModel", module = "pycorrsense", frozen)]
struct PySensingModel(models::SensingModel);

#[pymethods]
impl PySensingModel {
    #[new]
    #[pyo3(signature = (family, n, m, seed=0, rows=None, modulator=None, psi=None, bernoulli_m=false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        family: &str,
        n: usize,
        m: usize,
        seed: u64,
        rows: Option<&str>,
        modulator: Option<&str>,
        psi: Option<&str>,
        bernoulli_m: bool,
    ) -> PyResult<Self> {
        let mut p = ModelParams::new(parse(family)?, n, m, seed);
        if let Some(v) = rows {
            p.rows = parse(v)?;
        }
        if let Some(v) = modulator {
            p.modulator = parse(v)?;
        }
        if let Some(v) = psi {
            p.psi = parse(v)?;
        }
        p.bernoulli_m = bernoulli_m;
        p.build().map(PySensingModel).map_err(py_err)
    }

    /// Model with explicit dense `A` (m x n) and `H` (m x m).
    #[staticmethod]
    fn from_dense(a: Vec<Vec<Complex64>>, h: Vec<Vec<Complex64>>) -> PyResult<Self> {
        let a = corrsense_core::LinearOperator::dense(dense(a)?).map_err(py_err)?;
        let h = corrsense_core::LinearOperator::dense(dense(h)?).map_err(py_err)?;
        models::SensingModel::custom(a, h).map(PySensingModel).map_err(py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.m
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.0.family.name()
    }

    fn apply_a(&self, x: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        self.0.a.apply(&x).map_err(py_err)
    }

    fn apply_a_adjoint(&self, u: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        self.0.a.apply_adjoint(&u).map_err(py_err)
    }

    fn apply_h(&self, z: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        self.0.h.apply(&z).map_err(py_err)
    }

    fn measure(&self, x: Vec<Complex64>, z: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        self.0.measure(&x, &z).map_err(py_err)
    }

    fn materialize_a(&self) -> PyResult<Vec<Vec<Complex64>>> {
        self.0.a.materialize().map(|m| to_rows(&m)).map_err(py_err)
    }

    fn materialize_h(&self) -> PyResult<Vec<Vec<Complex64>>> {
        self.0.h.materialize().map(|m| to_rows(&m)).map_err(py_err)
    }

    /// Largest singular value of `[A, H]` by power iteration.
    #[pyo3(signature = (tol=1e-9, max_iter=10000, seed=0))]
    fn theta_norm(&self, tol: f64, max_iter: usize, seed: u64) -> f64 {
        self.0.theta().power_iteration(tol, max_iter, seed).value
    }

    fn __repr__(&self) -> String {
        format!(
            "SensingModel(family={}, n={}, m={}, seed={})",
            self.0.family, self.0.n, self.0.m, self.0.seed
        )
    }
}

#[pyclass(name = "ProblemInstance", module = "pycorrsense", frozen)]
struct PyProblemInstance(models::ProblemInstance);

#[pymethods]
impl PyProblemInstance {
    #[getter]
    fn x_true(&self) -> Vec<Complex64> {
        self.0.x_true.clone()
    }

    #[getter]
    fn z_true(&self) -> Vec<Complex64> {
        self.0.z_true.clone()
    }

    #[getter]
    fn w(&self) -> Vec<Complex64> {
        self.0.w.clone()
    }

    #[getter]
    fn y(&self) -> Vec<Complex64> {
        self.0.y.clone()
    }

    #[getter]
    fn s(&self) -> usize {
        self.0.s
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.k
    }

    #[getter]
    fn model(&self) -> PySensingModel {
        PySensingModel(self.0.model.clone())
    }
}

#[pyclass(name = "SolveResult", module = "pycorrsense", frozen)]
struct PySolveResult(solvers::SolveResult);

#[pymethods]
impl PySolveResult {
    #[getter]
    fn x_hat(&self) -> Vec<Complex64> {
        self.0.x_hat.clone()
    }

    #[getter]
    fn z_hat(&self) -> Vec<Complex64> {
        self.0.z_hat.clone()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.0.iterations
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.0.residual
    }

    #[getter]
    fn objective(&self) -> f64 {
        self.0.objective
    }

    #[getter]
    fn status(&self) -> &'static str {
        self.0.status.name()
    }

    fn __repr__(&self) -> String {
        format!(
            "SolveResult(status={}, iterations={}, residual={:e})",
            self.0.status, self.0.iterations, self.0.residual
        )
    }
}

#[pyfunction]
#[pyo3(signature = (model, s, k, setting="gaussian", noise_amp=0.0, seed=0, noise_model="symmetric"))]
fn gen_instance(
    model: &PySensingModel,
    s: usize,
    k: usize,
    setting: &str,
    noise_amp: f64,
    seed: u64,
    noise_model: &str,
) -> PyResult<PyProblemInstance> {
    let noise_model: NoiseModel = parse(noise_model)?;
    models::gen_instance_with(&model.0, s, k, parse(setting)?, noise_amp, noise_model, seed)
        .map(PyProblemInstance)
        .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (model, y, lambda_reg=1.0, epsilon=0.0, max_iter=20000, tol=1e-9))]
fn solve_penalized_l1(
    py: Python<'_>,
    model: &PySensingModel,
    y: Vec<Complex64>,
    lambda_reg: f64,
    epsilon: f64,
    max_iter: usize,
    tol: f64,
) -> PyResult<PySolveResult> {
    let mut cfg = solvers::PenalizedL1Config::new(lambda_reg, epsilon);
    cfg.max_iter = max_iter;
    cfg.tol = tol;
    py.detach(|| solvers::solve_penalized_l1(&model.0, &y, &cfg))
        .map(PySolveResult)
        .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (model, y, p=0.5, nu=1.0, outer_max=100))]
fn solve_irls_lp(
    py: Python<'_>,
    model: &PySensingModel,
    y: Vec<Complex64>,
    p: f64,
    nu: f64,
    outer_max: usize,
) -> PyResult<PySolveResult> {
    let cfg = solvers::IrlsConfig {
        p,
        nu,
        outer_max,
        ..Default::default()
    };
    py.detach(|| solvers::solve_irls_lp(&model.0, &y, &cfg))
        .map(PySolveResult)
        .map_err(py_err)
}

#[pyfunction]
fn check_success(result: &PySolveResult, instance: &PyProblemInstance) -> bool {
    solvers::check_success(&result.0, &instance.0)
}

#[pyfunction]
fn recovery_error(result: &PySolveResult, instance: &PyProblemInstance) -> f64 {
    solvers::recovery_error(&result.0, &instance.0)
}

fn rip_dict<'py>(py: Python<'py>, r: &rip::RipReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("delta", r.delta)?;
    d.set_item("signal_support", r.signal_support.clone())?;
    d.set_item("corruption_support", r.corruption_support.clone())?;
    d.set_item("eig_min", r.eig_min)?;
    d.set_item("eig_max", r.eig_max)?;
    d.set_item("supports_enumerated", r.supports_enumerated)?;
    Ok(d)
}

fn threshold_dict<'py>(py: Python<'py>, r: &rip::ThresholdReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("eta", r.eta)?;
    d.set_item("threshold", r.threshold)?;
    d.set_item("delta_2s2k", r.delta_2s2k)?;
    d.set_item("satisfied", r.satisfied)?;
    if let Some(rip) = &r.rip {
        d.set_item("rip", rip_dict(py, rip)?)?;
    }
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (a, s, budget=rip::DEFAULT_BUDGET))]
fn exact_rip<'py>(
    py: Python<'py>,
    a: Vec<Vec<Complex64>>,
    s: usize,
    budget: u128,
) -> PyResult<Bound<'py, PyDict>> {
    let a = dense(a)?;
    let r = py.detach(|| rip::exact_rip(&a, s, budget)).map_err(py_err)?;
    rip_dict(py, &r)
}

#[pyfunction]
#[pyo3(signature = (a, h, s, k, budget=rip::DEFAULT_BUDGET))]
fn exact_skrip<'py>(
    py: Python<'py>,
    a: Vec<Vec<Complex64>>,
    h: Vec<Vec<Complex64>>,
    s: usize,
    k: usize,
    budget: u128,
) -> PyResult<Bound<'py, PyDict>> {
    let (a, h) = (dense(a)?, dense(h)?);
    let r = py.detach(|| rip::exact_skrip(&a, &h, s, k, budget)).map_err(py_err)?;
    rip_dict(py, &r)
}

#[pyfunction]
#[pyo3(signature = (s, k, lambda_reg=1.0))]
fn recovery_threshold<'py>(py: Python<'py>, s: usize, k: usize, lambda_reg: f64) -> PyResult<Bound<'py, PyDict>> {
    let r = rip::recovery_threshold(s, k, lambda_reg).map_err(py_err)?;
    threshold_dict(py, &r)
}

#[pyfunction]
#[pyo3(signature = (model, s, k, lambda_reg=1.0, budget=rip::DEFAULT_BUDGET))]
fn certify_uniqueness<'py>(
    py: Python<'py>,
    model: &PySensingModel,
    s: usize,
    k: usize,
    lambda_reg: f64,
    budget: u128,
) -> PyResult<Bound<'py, PyDict>> {
    let r = py
        .detach(|| rip::certify_uniqueness(&model.0, s, k, lambda_reg, budget))
        .map_err(py_err)?;
    threshold_dict(py, &r)
}

#[pyfunction]
fn derive_seed(master_seed: u64, path: Vec<u64>) -> u64 {
    corrsense_core::seed::derive_seed(master_seed, &path)
}

#[pymodule]
fn pycorrsense(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CorrsenseError", m.py().get_type::<CorrsenseError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PySensingModel>()?;
    m.add_class::<PyProblemInstance>()?;
    m.add_class::<PySolveResult>()?;
    m.add_function(wrap_pyfunction!(gen_instance, m)?)?;
    m.add_function(wrap_pyfunction!(solve_penalized_l1, m)?)?;
    m.add_function(wrap_pyfunction!(solve_irls_lp, m)?)?;
    m.add_function(wrap_pyfunction!(check_success, m)?)?;
    m.add_function(wrap_pyfunction!(recovery_error, m)?)?;
    m.add_function(wrap_pyfunction!(exact_rip, m)?)?;
    m.add_function(wrap_pyfunction!(exact_skrip, m)?)?;
    m.add_function(wrap_pyfunction!(recovery_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(certify_uniqueness, m)?)?;
    m.add_function(wrap_pyfunction!(derive_seed, m)?)?;
    Ok(())
}
