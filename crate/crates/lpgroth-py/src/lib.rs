//! Python bindings: disorder sampling, sphere and Lagrangian solvers, the
//! Parisi functionals and their minimizer, limit constants and the
//! verification suites. Parameter triples cross the boundary as the same
//! JSON documents the command-line tool writes.

use lpgroth::asymptotics::{limit_constant as limit, Constant, Scaling};
use lpgroth::linalg::GramMatrix as CoreGram;
use lpgroth::model::{sample_disorder_replica, Disorder as CoreDisorder};
use lpgroth::parisi::{self, DiscreteMeasure, Flavor, MinimizeOptions, Mode, ParisiDocument, QuadratureSpec};
use lpgroth::solvers::{self, GroundStateResult, SolverConfig};
use lpgroth::verify::{run_suite, Suite};
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: lpgroth::Error) -> PyErr {
    match e {
        lpgroth::Error::Numeric(_) => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Gaussian coupling matrix `g_ij`.
#[pyclass(name = "Disorder", frozen)]
struct Disorder(CoreDisorder);

#[pymethods]
impl Disorder {
    /// Draws replica `replica` of an `n×n` disorder from `seed`.
    #[staticmethod]
    #[pyo3(signature = (seed, n, replica = 0))]
    fn sample(seed: u64, n: usize, replica: u64) -> PyResult<Self> {
        sample_disorder_replica(seed, replica, n).map(Disorder).map_err(to_py)
    }

    /// Wraps a row-major list of `n²` couplings.
    #[staticmethod]
    fn from_matrix(n: usize, couplings: Vec<f64>) -> PyResult<Self> {
        CoreDisorder::from_matrix(n, couplings).map(Disorder).map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    fn couplings(&self) -> Vec<f64> {
        self.0.couplings().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("Disorder(n={})", self.0.n())
    }
}

/// Symmetric positive semidefinite `κ×κ` matrix.
#[pyclass(name = "GramMatrix", frozen)]
struct GramMatrix(CoreGram);

#[pymethods]
impl GramMatrix {
    #[new]
    fn new(n: usize, rows: Vec<f64>) -> PyResult<Self> {
        CoreGram::from_rows(n, rows).map(GramMatrix).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (n, scale = 1.0))]
    fn identity(n: usize, scale: f64) -> PyResult<Self> {
        CoreGram::scaled_identity(n, scale).map(GramMatrix).map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn trace(&self) -> f64 {
        self.0.trace()
    }

    fn to_list(&self) -> Vec<f64> {
        self.0.sym().data().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("GramMatrix({}, {:?})", self.0.dim(), self.0.sym().data())
    }
}

fn solver_config(restarts: usize, max_iter: usize, seed: u64) -> SolverConfig {
    SolverConfig { restarts, max_iter, seed, ..Default::default() }
}

fn ground_state_dict<'py>(py: Python<'py>, r: GroundStateResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("value", r.value)?;
    d.set_item("n", r.config.n())?;
    d.set_item("kappa", r.config.kappa())?;
    d.set_item("config", r.config.into_data())?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("converged", r.converged)?;
    Ok(d)
}

/// Maximum of the Hamiltonian over the `ℓ^{p,2}` unit sphere.
#[pyfunction]
#[pyo3(signature = (g, p, kappa = 1, restarts = 16, max_iter = 5000, seed = 0))]
fn maximize_sphere<'py>(
    py: Python<'py>,
    g: &Disorder,
    p: f64,
    kappa: usize,
    restarts: usize,
    max_iter: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = solver_config(restarts, max_iter, seed);
    let r = py.detach(|| solvers::maximize_sphere(&g.0, p, kappa, &cfg)).map_err(to_py)?;
    ground_state_dict(py, r)
}

/// Sphere maximum scaled to its large-`N` normalization.
#[pyfunction]
#[pyo3(signature = (g, p, kappa = 1, restarts = 16, max_iter = 5000, seed = 0))]
fn gse_normalized(py: Python<'_>, g: &Disorder, p: f64, kappa: usize, restarts: usize, max_iter: usize, seed: u64) -> PyResult<f64> {
    let cfg = solver_config(restarts, max_iter, seed);
    py.detach(|| solvers::gse_normalized(&g.0, p, kappa, &cfg)).map(|r| r.value).map_err(to_py)
}

/// Unconstrained Lagrangian maximum at penalty `t`.
#[pyfunction]
#[pyo3(signature = (g, p, t, kappa = 1, restarts = 16, max_iter = 5000, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn lagrangian_max<'py>(
    py: Python<'py>,
    g: &Disorder,
    p: f64,
    t: f64,
    kappa: usize,
    restarts: usize,
    max_iter: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = solver_config(restarts, max_iter, seed);
    let r = py.detach(|| solvers::lagrangian_max(&g.0, p, t, kappa, &cfg)).map_err(to_py)?;
    ground_state_dict(py, r)
}

/// Lagrangian maximum with the self-overlap pinned to `d`.
#[pyfunction]
#[pyo3(signature = (g, p, t, d, restarts = 16, max_iter = 5000, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn constrained_lagrangian<'py>(
    py: Python<'py>,
    g: &Disorder,
    p: f64,
    t: f64,
    d: &GramMatrix,
    restarts: usize,
    max_iter: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = solver_config(restarts, max_iter, seed);
    let r = py.detach(|| solvers::constrained_lagrangian(&g.0, p, t, &d.0, &cfg)).map_err(to_py)?;
    ground_state_dict(py, r)
}

/// `(scalar, vector)` sphere maxima for the same couplings.
#[pyfunction]
#[pyo3(signature = (g, p, kappa, restarts = 16, seed = 0))]
fn scalar_vector_maxima(py: Python<'_>, g: &Disorder, p: f64, kappa: usize, restarts: usize, seed: u64) -> PyResult<(f64, f64)> {
    let cfg = solver_config(restarts, 5000, seed);
    let r = py.detach(|| solvers::scalar_vector_equality_check(&g.0, p, kappa, &cfg)).map_err(to_py)?;
    Ok((r.scalar, r.vector))
}

fn parse_document(doc: &str) -> PyResult<ParisiDocument> {
    serde_json::from_str(doc).map_err(|e| PyValueError::new_err(format!("document: {e}")))
}

/// Evaluates the functional at a JSON parameter document. Finite-weight
/// documents use the zero-temperature functional; probability documents
/// need `beta`. Returns `(value, stderr)`.
#[pyfunction]
#[pyo3(signature = (document, p, t, beta = None))]
fn parisi_eval(py: Python<'_>, document: &str, p: f64, t: f64, beta: Option<f64>) -> PyResult<(f64, f64)> {
    let doc = parse_document(document)?;
    let (lambda, weights, path) = doc.into_parts().map_err(to_py)?;
    let quad = QuadratureSpec::default_for(doc.kappa);
    let v = py
        .detach(|| match (weights.flavor(), beta) {
            (Flavor::Finite, _) => parisi::parisi_inf(&lambda, p, t, &weights, &path, &quad),
            (Flavor::Probability, Some(b)) => parisi::parisi_beta(&lambda, b, p, t, &weights, &path, &quad),
            (Flavor::Probability, None) => Err(lpgroth::Error::Input("probability documents need beta".into())),
        })
        .map_err(to_py)?;
    Ok((v.value, v.stderr))
}

/// Converts a finite-weight document to the probability weights at `beta`.
#[pyfunction]
fn to_probability(document: &str, beta: f64) -> PyResult<String> {
    let (lambda, weights, path) = parse_document(document)?.into_parts().map_err(to_py)?;
    let alpha = DiscreteMeasure::probability_from_finite(&weights, beta).map_err(to_py)?;
    let doc = ParisiDocument::from_parts(&lambda, &alpha, &path).map_err(to_py)?;
    serde_json::to_string(&doc).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Minimizes the functional over `r`-level triples for overlap endpoint `d`.
/// `beta = None` selects zero temperature. The result holds the value, its
/// standard error and the minimizing triple as a JSON document.
#[pyfunction]
#[pyo3(signature = (d, p, t, r, beta = None, seed = 0, reseeds = 8))]
#[allow(clippy::too_many_arguments)]
fn minimize_parisi<'py>(
    py: Python<'py>,
    d: &GramMatrix,
    p: f64,
    t: f64,
    r: usize,
    beta: Option<f64>,
    seed: u64,
    reseeds: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = MinimizeOptions { seed, reseeds, ..MinimizeOptions::new(d.0.dim()) };
    let mode = beta.map_or(Mode::Inf, Mode::Beta);
    let res = py.detach(|| parisi::minimize_parisi(&d.0, p, t, r, mode, &opts)).map_err(to_py)?;
    let doc = ParisiDocument::from_parts(&res.lambda, &res.weights, &res.path).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("value", res.value)?;
    out.set_item("stderr", res.stderr)?;
    out.set_item("converged", res.converged)?;
    out.set_item("document", serde_json::to_string(&doc).map_err(|e| PyValueError::new_err(e.to_string()))?)?;
    Ok(out)
}

/// Large-`N` constant for exponent `p`: `(value or None, regime, scaling)`.
#[pyfunction]
fn limit_constant(p: f64) -> PyResult<(Option<f64>, String, String)> {
    let lim = limit(p).map_err(to_py)?;
    let scaling = match lim.scaling {
        Scaling::PowerConjugate(e) | Scaling::Power(e) => format!("N^{e}"),
        Scaling::SqrtN => "N^0.5".into(),
        Scaling::SqrtLogN => "sqrt(log N)".into(),
    };
    let value = match lim.constant {
        Constant::Value(v) => Some(v),
        Constant::Variational => None,
    };
    Ok((value, format!("{:?}", lim.regime).to_lowercase(), scaling))
}

/// Runs one verification suite; each check is `(name, passed, worst, tolerance)`.
#[pyfunction]
#[pyo3(signature = (suite, seed = 0))]
fn verify(py: Python<'_>, suite: &str, seed: u64) -> PyResult<Vec<(String, bool, f64, f64)>> {
    let suite: Suite = suite.parse().map_err(to_py)?;
    let checks = py.detach(|| run_suite(suite, seed));
    Ok(checks.into_iter().map(|c| (c.name, c.passed, c.worst, c.tolerance)).collect())
}

#[pymodule]
#[pyo3(name = "lpgroth")]
fn lpgroth_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Disorder>()?;
    m.add_class::<GramMatrix>()?;
    m.add_function(wrap_pyfunction!(maximize_sphere, m)?)?;
    m.add_function(wrap_pyfunction!(gse_normalized, m)?)?;
    m.add_function(wrap_pyfunction!(lagrangian_max, m)?)?;
    m.add_function(wrap_pyfunction!(constrained_lagrangian, m)?)?;
    m.add_function(wrap_pyfunction!(scalar_vector_maxima, m)?)?;
    m.add_function(wrap_pyfunction!(parisi_eval, m)?)?;
    m.add_function(wrap_pyfunction!(to_probability, m)?)?;
    m.add_function(wrap_pyfunction!(minimize_parisi, m)?)?;
    m.add_function(wrap_pyfunction!(limit_constant, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
