//! Python bindings for the cgl-dg solver: mesh inspection, single runs,
//! convergence/stability studies, the coercivity probe, and the
//! manufactured-solution helpers.
//!
//! Build with `cargo build -p cgl-dg-py`, then rename the produced
//! `libcgl_dg_py.so` to `cgl_dg_py.so` somewhere on `sys.path` (see
//! `python/smoke_test.py` at the repository root for a worked example).

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use cgl_dg::analysis::{
    classify_stability, coercivity_probe, convergence_study, exact_spacetime_norms, run_level,
};
use cgl_dg::assembly::IPVariant;
use cgl_dg::evolve;
use cgl_dg::mesh;
use cgl_dg::mms::{strong_form_residuals, ExactSolution};
use cgl_dg::space::DGSpace;

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn parse_variant(method: &str) -> PyResult<IPVariant> {
    IPVariant::parse(method).ok_or_else(|| {
        PyValueError::new_err(format!(
            "unknown method {method:?}; expected sipg, nipg, or iipg"
        ))
    })
}

/// Triangulated unit square: n x n cells, each split along one diagonal.
#[pyclass(name = "Mesh")]
struct PyMesh {
    inner: mesh::Mesh,
}

#[pymethods]
impl PyMesh {
    #[new]
    fn new(n: usize) -> PyResult<Self> {
        Ok(PyMesh { inner: mesh::Mesh::unit_square(n).map_err(runtime_err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.subdivisions()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.inner.num_vertices()
    }

    #[getter]
    fn num_elements(&self) -> usize {
        self.inner.num_elements()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    fn vertices(&self) -> Vec<(f64, f64)> {
        self.inner.vertices().iter().map(|v| (v[0], v[1])).collect()
    }

    fn elements(&self) -> Vec<(usize, usize, usize)> {
        self.inner.elements().iter().map(|e| (e[0], e[1], e[2])).collect()
    }

    /// Uniform refinement: doubles the subdivision count.
    fn refined(&self) -> PyMesh {
        PyMesh { inner: self.inner.refined() }
    }

    fn __repr__(&self) -> String {
        format!(
            "Mesh(n={}, vertices={}, elements={})",
            self.inner.subdivisions(),
            self.inner.num_vertices(),
            self.inner.num_elements()
        )
    }
}

/// Parameters of one time-evolution run.
#[pyclass(name = "RunConfig", skip_from_py_object)]
#[derive(Clone)]
struct PyRunConfig {
    inner: evolve::RunConfig,
}

#[pymethods]
impl PyRunConfig {
    #[new]
    #[pyo3(signature = (method="nipg", a=1e-4, b=1e-4, sigma=1e8, n=6,
                        dt_factor=2.0, t_final=1.0))]
    fn new(
        method: &str,
        a: f64,
        b: f64,
        sigma: f64,
        n: usize,
        dt_factor: f64,
        t_final: f64,
    ) -> PyResult<Self> {
        let mut inner = evolve::RunConfig::new(parse_variant(method)?, a, b, sigma, n);
        inner.dt_factor = dt_factor;
        inner.t_final = t_final;
        inner.validate().map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyRunConfig { inner })
    }

    #[getter]
    fn method(&self) -> &'static str {
        self.inner.variant.name()
    }

    #[getter]
    fn a(&self) -> f64 {
        self.inner.a
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.b
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt()
    }

    #[getter]
    fn t_final(&self) -> f64 {
        self.inner.t_final
    }

    fn __repr__(&self) -> String {
        format!(
            "RunConfig(method='{}', a={}, b={}, sigma={}, n={}, dt_factor={}, t_final={})",
            self.inner.variant.name(),
            self.inner.a,
            self.inner.b,
            self.inner.sigma,
            self.inner.n,
            self.inner.dt_factor,
            self.inner.t_final
        )
    }
}

/// Outcome of a single run: space-time norms, final-time error, status,
/// and the per-step trajectory as (step, t, norm_u1, norm_u2, energy).
#[pyclass(name = "RunResult")]
struct PyRunResult {
    #[pyo3(get)]
    norm_u1: f64,
    #[pyo3(get)]
    norm_u2: f64,
    #[pyo3(get)]
    err_l2_final: f64,
    #[pyo3(get)]
    status: String,
    #[pyo3(get)]
    blown_up: bool,
    #[pyo3(get)]
    records: Vec<(usize, f64, f64, f64, f64)>,
}

#[pymethods]
impl PyRunResult {
    fn __repr__(&self) -> String {
        format!(
            "RunResult(norm_u1={:.6}, norm_u2={:.6}, status='{}')",
            self.norm_u1, self.norm_u2, self.status
        )
    }
}

/// One mesh level of a convergence/stability study.
#[pyclass(name = "StudyLevel", skip_from_py_object)]
#[derive(Clone)]
struct PyStudyLevel {
    #[pyo3(get)]
    n: usize,
    #[pyo3(get)]
    h: f64,
    #[pyo3(get)]
    dt: f64,
    #[pyo3(get)]
    norm_u1: f64,
    #[pyo3(get)]
    norm_u2: f64,
    #[pyo3(get)]
    err_l2_final: f64,
    #[pyo3(get)]
    rate: Option<f64>,
    #[pyo3(get)]
    status: String,
}

#[pymethods]
impl PyStudyLevel {
    fn __repr__(&self) -> String {
        format!(
            "StudyLevel(n={}, norm_u1={:.6}, norm_u2={:.6}, rate={:?})",
            self.n, self.norm_u1, self.norm_u2, self.rate
        )
    }
}

/// Multi-level study: per-level records plus the stability classification
/// (stable / transitional / unstable).
#[pyclass(name = "StudyResult")]
struct PyStudyResult {
    #[pyo3(get)]
    levels: Vec<PyStudyLevel>,
    #[pyo3(get)]
    classification: String,
}

#[pymethods]
impl PyStudyResult {
    fn __repr__(&self) -> String {
        format!(
            "StudyResult(levels={}, classification='{}')",
            self.levels.len(),
            self.classification
        )
    }
}

/// Runs one time evolution and returns norms, error, and trajectory.
#[pyfunction]
fn run(config: &PyRunConfig) -> PyResult<PyRunResult> {
    let (trajectory, record) = run_level(&config.inner).map_err(runtime_err)?;
    Ok(PyRunResult {
        norm_u1: record.norm_u1,
        norm_u2: record.norm_u2,
        err_l2_final: record.err_l2_final,
        status: record.status.to_string(),
        blown_up: trajectory.blown_up,
        records: trajectory
            .records
            .iter()
            .map(|r| (r.step, r.t, r.norm_u1, r.norm_u2, r.energy))
            .collect(),
    })
}

/// Runs the study over the given mesh levels (strictly increasing, at
/// least two) and classifies stability from the resulting norms.
#[pyfunction]
fn study(config: &PyRunConfig, ns: Vec<usize>) -> PyResult<PyStudyResult> {
    let report = convergence_study(&config.inner, &ns).map_err(runtime_err)?;
    let classification = classify_stability(&report).to_string();
    let levels = report
        .levels
        .iter()
        .map(|l| PyStudyLevel {
            n: l.n,
            h: l.h,
            dt: l.dt,
            norm_u1: l.norm_u1,
            norm_u2: l.norm_u2,
            err_l2_final: l.err_l2_final,
            rate: l.rate,
            status: l.status.to_string(),
        })
        .collect();
    Ok(PyStudyResult { levels, classification })
}

/// Randomized probe of the bilinear form on one mesh: returns
/// (min_rayleigh, max_continuity, symmetry_defect).
#[pyfunction]
#[pyo3(signature = (method, sigma, n=6, trials=64))]
fn probe(method: &str, sigma: f64, n: usize, trials: usize) -> PyResult<(f64, f64, f64)> {
    let variant = parse_variant(method)?;
    let space = DGSpace::new(mesh::Mesh::unit_square(n).map_err(runtime_err)?, 1)
        .map_err(runtime_err)?;
    let result = coercivity_probe(&space, variant, sigma, trials).map_err(runtime_err)?;
    Ok((result.min_rayleigh, result.max_continuity, result.symmetry_defect))
}

/// Closed-form space-time L2 norms of the two exact fields over [0, t_final].
#[pyfunction]
#[pyo3(signature = (t_final=1.0))]
fn exact_norms(t_final: f64) -> (f64, f64) {
    exact_spacetime_norms(&ExactSolution::default(), t_final)
}

/// Exact manufactured fields (u1, u2) at a point in space-time.
#[pyfunction]
fn eval_exact(x: f64, y: f64, t: f64) -> (f64, f64) {
    let exact = ExactSolution::default();
    (exact.real(x, y, t), exact.imag(x, y, t))
}

/// Manufactured forcing (f1, f2) for dispersion parameters (a, b).
#[pyfunction]
fn eval_forcing(a: f64, b: f64, x: f64, y: f64, t: f64) -> (f64, f64) {
    let exact = ExactSolution::default();
    (exact.forcing_real(a, b, x, y, t), exact.forcing_imag(a, b, x, y, t))
}

/// Relative strong-form residuals (r1, r2) of the governing equations at a
/// point, using central finite differences with the given step.
#[pyfunction]
#[pyo3(signature = (a, b, x, y, t, step=1e-4))]
fn residuals(a: f64, b: f64, x: f64, y: f64, t: f64, step: f64) -> (f64, f64) {
    strong_form_residuals(&ExactSolution::default(), a, b, x, y, t, step)
}

#[pymodule]
fn cgl_dg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyRunConfig>()?;
    m.add_class::<PyRunResult>()?;
    m.add_class::<PyStudyLevel>()?;
    m.add_class::<PyStudyResult>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(study, m)?)?;
    m.add_function(wrap_pyfunction!(probe, m)?)?;
    m.add_function(wrap_pyfunction!(exact_norms, m)?)?;
    m.add_function(wrap_pyfunction!(eval_exact, m)?)?;
    m.add_function(wrap_pyfunction!(eval_forcing, m)?)?;
    m.add_function(wrap_pyfunction!(residuals, m)?)?;
    Ok(())
}
