//! Python bindings: graphs, simulation, spectral-error evaluation, the
//! sparsification pipeline, and the sparse neural-ODE trainer.

use nalgebra::DVector;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dynsparse_core::dynamics::{
    brusselator_field, integrate, uniform_fixed_point_state, BrusselatorParams, IntegratorConfig,
    Scheme,
};
use dynsparse_core::graphcore::{
    self, laplacian, spectral_reference, Multipliers, WeightedGraph,
};
use dynsparse_core::odenet::{train_sparse_odenet, LinearSystemSpec, OdeNetConfig};
use dynsparse_core::pipeline::{self, SparsifyConfig};
use dynsparse_core::spectral::{zeta_exact, PerturbationContext};
use dynsparse_core::Error;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_)
        | Error::Parse(_)
        | Error::InvalidArgument(_)
        | Error::InvalidGraph(_)
        | Error::Dimension(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn multipliers(gamma: Vec<f64>) -> PyResult<Multipliers> {
    Multipliers::new(gamma).map_err(to_py_err)
}

/// A weighted undirected graph.
#[pyclass(name = "Graph", skip_from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: WeightedGraph,
}

#[pymethods]
impl PyGraph {
    /// Build from an edge list; weights default to 1.
    #[new]
    #[pyo3(signature = (n, edges, weights=None))]
    fn new(n: usize, edges: Vec<(usize, usize)>, weights: Option<Vec<f64>>) -> PyResult<Self> {
        let w = weights.unwrap_or_else(|| vec![1.0; edges.len()]);
        Ok(Self { inner: WeightedGraph::new(n, edges, w).map_err(to_py_err)? })
    }

    /// Load an edge-list or Matrix Market file.
    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Self { inner: graphcore::load_graph(&path).map_err(to_py_err)? })
    }

    #[staticmethod]
    fn erdos_renyi(n: usize, p: f64, seed: u64) -> PyResult<Self> {
        Ok(Self { inner: graphcore::erdos_renyi(n, p, seed).map_err(to_py_err)? })
    }

    /// The worked triangle example.
    #[staticmethod]
    fn k3() -> Self {
        Self { inner: graphcore::k3() }
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    fn is_connected(&self) -> bool {
        self.inner.is_connected()
    }

    /// Dense Laplacian `L(γ̄)` as nested lists; γ̄ defaults to all ones.
    #[pyo3(signature = (gamma=None))]
    fn laplacian(&self, gamma: Option<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let g = multipliers(gamma.unwrap_or_else(|| vec![1.0; self.inner.m()]))?;
        let l = laplacian(&self.inner, &g).map_err(to_py_err)?;
        Ok((0..l.nrows()).map(|i| l.row(i).iter().copied().collect()).collect())
    }

    /// The `n_p` largest Laplacian eigenvalues, descending.
    fn top_eigenvalues(&self, n_p: usize) -> PyResult<Vec<f64>> {
        Ok(spectral_reference(&self.inner, n_p).map_err(to_py_err)?.eigenvalues)
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, m={})", self.inner.n(), self.inner.m())
    }
}

/// Integrate the Brusselator from a seeded perturbation of the uniform fixed
/// point; returns `(times, states)` with states as `(2n)`-vectors per step.
#[pyfunction]
#[pyo3(signature = (graph, dt=1e-3, steps=1000, seed=0, scheme="rk4"))]
fn simulate(
    graph: &PyGraph,
    dt: f64,
    steps: usize,
    seed: u64,
    scheme: &str,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    use rand::{Rng, SeedableRng};
    let scheme = match scheme {
        "rk4" => Scheme::Rk4,
        "euler-forward" => Scheme::EulerForward,
        other => return Err(PyValueError::new_err(format!("unknown scheme: {other}"))),
    };
    let p = BrusselatorParams::default();
    let g = &graph.inner;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut x0 = uniform_fixed_point_state(g.n(), &p).map_err(to_py_err)?;
    for v in x0.iter_mut() {
        *v += rng.random_range(-0.1..0.1);
    }
    let cfg = IntegratorConfig::new(scheme, dt, steps).map_err(to_py_err)?;
    let gamma = Multipliers::ones(g.m());
    let traj =
        integrate(|x| brusselator_field(x, g, &gamma, &p), &x0, &cfg).map_err(to_py_err)?;
    let states = traj.states.iter().map(|s| s.iter().copied().collect()).collect();
    Ok((traj.times, states))
}

/// Exact and estimated spectral error of the multipliers over the `n_p`
/// largest modes.
#[pyfunction]
fn zeta(py: Python<'_>, graph: &PyGraph, gamma: Vec<f64>, n_p: usize) -> PyResult<Py<PyDict>> {
    let g = &graph.inner;
    let gamma = multipliers(gamma)?;
    let reference = spectral_reference(g, n_p).map_err(to_py_err)?;
    let exact = zeta_exact(g, &gamma, &reference).map_err(to_py_err)?;
    let ctx = PerturbationContext::new(g, reference).map_err(to_py_err)?;
    let approx = ctx.zeta_approx(&gamma).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("exact", exact)?;
    out.set_item("estimate", approx.value)?;
    out.set_item("zeta_l", approx.zeta_l)?;
    out.set_item("zeta_q", approx.zeta_q)?;
    out.set_item("degenerate_modes", approx.degenerate_modes)?;
    Ok(out.into())
}

/// One-step eigenpair estimate for mode `i` (0 = largest).
#[pyfunction]
fn eigenpair_estimate(
    py: Python<'_>,
    graph: &PyGraph,
    gamma: Vec<f64>,
    n_p: usize,
    i: usize,
) -> PyResult<Py<PyDict>> {
    let g = &graph.inner;
    let gamma = multipliers(gamma)?;
    let reference = spectral_reference(g, n_p).map_err(to_py_err)?;
    let ctx = PerturbationContext::new(g, reference).map_err(to_py_err)?;
    let est = ctx.eigenpair_estimate(&gamma, i).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("eigenvalue", est.lambda)?;
    out.set_item("eigenvector", est.phi.iter().copied().collect::<Vec<f64>>())?;
    out.set_item("overlap", est.overlap)?;
    out.set_item("branch", format!("{:?}", est.branch))?;
    Ok(out.into())
}

/// Keep edges with `w_i·γ̄_i ≥ eps` and reweight the survivors.
#[pyfunction]
fn prune(graph: &PyGraph, gamma: Vec<f64>, eps: f64) -> PyResult<PyGraph> {
    let gamma = multipliers(gamma)?;
    Ok(PyGraph { inner: pipeline::prune(&graph.inner, &gamma, eps).map_err(to_py_err)? })
}

/// Run the full sparsification pipeline. `config_toml` may override any
/// pipeline setting; `seed` overrides the config's seed.
#[pyfunction]
#[pyo3(signature = (graph, config_toml=None, seed=None))]
fn sparsify(
    py: Python<'_>,
    graph: &PyGraph,
    config_toml: Option<&str>,
    seed: Option<u64>,
) -> PyResult<Py<PyDict>> {
    let mut cfg: SparsifyConfig = match config_toml {
        Some(text) => toml::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => SparsifyConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let result = pipeline::sparsify(&graph.inner, &cfg).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("gamma", result.gamma.clone())?;
    out.set_item(
        "pruned",
        PyGraph { inner: result.pruned.clone() }.into_pyobject(py)?,
    )?;
    out.set_item("m_original", result.m_original)?;
    out.set_item("m_pruned", result.m_pruned)?;
    out.set_item("correlation", result.correlation)?;
    out.set_item("zeta_exit", result.zeta_exit)?;
    out.set_item("solver_converged", result.solver_converged)?;
    out.set_item("max_violation", result.max_violation)?;
    out.set_item("reweighted_only", result.reweighted_only)?;
    out.set_item("disconnected", result.disconnected)?;
    out.set_item("lambda_2", result.lambda_2)?;
    out.set_item("eigenvalue_comparison", result.eigenvalue_comparison.clone())?;
    out.set_item("objective_history", result.objective_history.clone())?;
    Ok(out.into())
}

/// Train the sparse neural ODE on the default linear benchmark system.
#[pyfunction]
#[pyo3(signature = (alpha=40.0, steps=500, n_obs=10, seed=0, max_outer=5, max_inner=400))]
fn train_odenet(
    py: Python<'_>,
    alpha: f64,
    steps: usize,
    n_obs: usize,
    seed: u64,
    max_outer: usize,
    max_inner: usize,
) -> PyResult<Py<PyDict>> {
    let cfg = OdeNetConfig { alpha, steps, n_obs, seed, max_outer, max_inner, ..Default::default() };
    let result = train_sparse_odenet(&LinearSystemSpec::default(), &cfg).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("params", result.params.iter().copied().collect::<Vec<f64>>())?;
    out.set_item("nonzero", result.sparsity.nonzero)?;
    out.set_item("total", result.sparsity.total)?;
    out.set_item("error_curve", result.error_curve)?;
    out.set_item("baseline_curve", result.baseline_curve)?;
    out.set_item("t1", result.t1)?;
    out.set_item("t1_zero", result.t1_zero)?;
    Ok(out.into())
}

/// Laplacian heat kernel applied to a vector: `exp(−tL(γ̄))·f`.
#[pyfunction]
fn heat_kernel(graph: &PyGraph, gamma: Vec<f64>, f: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
    let gamma = multipliers(gamma)?;
    let f = DVector::from_column_slice(&f);
    let out = dynsparse_core::dynamics::heat_kernel_apply(&graph.inner, &gamma, &f, t)
        .map_err(to_py_err)?;
    Ok(out.iter().copied().collect())
}

#[pymodule]
fn dynsparse(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(zeta, m)?)?;
    m.add_function(wrap_pyfunction!(eigenpair_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(prune, m)?)?;
    m.add_function(wrap_pyfunction!(sparsify, m)?)?;
    m.add_function(wrap_pyfunction!(train_odenet, m)?)?;
    m.add_function(wrap_pyfunction!(heat_kernel, m)?)?;
    Ok(())
}
