//! Python bindings: grids, coefficient checks, forward solves, the measurement
//! oracle, extrapolation and config-driven runs.

use num_complex::Complex64 as C64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use plap_recon::coefficients::{validate_bounds, ProblemCoefficients};
use plap_recon::config::ExperimentConfig;
use plap_recon::dn_map::{extract_linear_dn, DnOracle, EpsSchedule};
use plap_recon::experiment;
use plap_recon::expr::CoeffExpr;
use plap_recon::forward::{solve_perturbed_plaplace, ConductivitySolver, SolverOptions};
use plap_recon::grid::{DirichletData, Grid};
use plap_recon::limit;
use plap_recon::probes::ProbeFrame;
use plap_recon::Error;

create_exception!(plap_recon_py, ConfigError, PyException);
create_exception!(plap_recon_py, SolverError, PyException);
create_exception!(plap_recon_py, ExtrapolationError, PyException);

fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        2 => SolverError::new_err(e.to_string()),
        3 => ExtrapolationError::new_err(e.to_string()),
        _ => ConfigError::new_err(e.to_string()),
    }
}

fn data(expr: &str, g: &Grid) -> PyResult<DirichletData> {
    let e = CoeffExpr::parse(expr).map_err(to_py)?;
    Ok(DirichletData::from_fn(*g, |x, y| C64::new(e.eval(x, y), 0.0)))
}

#[pyclass(name = "Grid", frozen)]
struct PyGrid {
    inner: Grid,
}

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (nx, ny, x_min = -1.0, x_max = 1.0, height = 1.0))]
    fn new(nx: usize, ny: usize, x_min: f64, x_max: f64, height: f64) -> PyResult<Self> {
        Ok(Self {
            inner: Grid::new(x_min, x_max, height, nx, ny).map_err(to_py)?,
        })
    }

    #[getter]
    fn nx(&self) -> usize {
        self.inner.nx()
    }
    #[getter]
    fn ny(&self) -> usize {
        self.inner.ny()
    }
    #[getter]
    fn hx(&self) -> f64 {
        self.inner.hx()
    }
    #[getter]
    fn hy(&self) -> f64 {
        self.inner.hy()
    }
    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    /// Coordinates of node `k` (row-major, `x1` fastest).
    fn coords(&self, k: usize) -> PyResult<(f64, f64)> {
        if k >= self.inner.node_count() {
            return Err(ConfigError::new_err(format!("node {k} out of range")));
        }
        let [x, y] = self.inner.coords(k);
        Ok((x, y))
    }

    fn __repr__(&self) -> String {
        let g = &self.inner;
        format!(
            "Grid(nx={}, ny={}, x_min={}, x_max={}, height={})",
            g.nx(),
            g.ny(),
            g.x_min(),
            g.x_max(),
            g.height()
        )
    }
}

#[pyclass(name = "Coefficients", frozen)]
struct PyCoefficients {
    inner: ProblemCoefficients,
}

#[pymethods]
impl PyCoefficients {
    #[new]
    #[pyo3(signature = (sigma, gamma, p, lambda_ = 0.4, m1 = 0.4))]
    fn new(sigma: &str, gamma: &str, p: f64, lambda_: f64, m1: f64) -> PyResult<Self> {
        Ok(Self {
            inner: ProblemCoefficients::new(sigma, gamma, p, lambda_, m1).map_err(to_py)?,
        })
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p
    }

    /// `((sigma_min, sigma_max), (gamma_min, gamma_max))` over the nodes;
    /// raises when a bound is violated.
    fn validate(&self, grid: &PyGrid) -> PyResult<((f64, f64), (f64, f64))> {
        let r = validate_bounds(&self.inner, &grid.inner).map_err(to_py)?;
        Ok(((r.sigma.min, r.sigma.max), (r.gamma.min, r.gamma.max)))
    }
}

/// Solution of `div(σ grad u) = 0` with boundary data `data`.
#[pyfunction]
fn solve_conductivity(py: Python<'_>, grid: &PyGrid, sigma: &str, data_expr: &str) -> PyResult<Vec<C64>> {
    let g = grid.inner;
    let s = CoeffExpr::parse(sigma).map_err(to_py)?;
    let f = data(data_expr, &g)?;
    py.detach(|| {
        let field = g.sample_real(|x, y| s.eval(x, y));
        let solver = ConductivitySolver::new(&field)?;
        Ok::<_, Error>(solver.solve(&f)?.into_values())
    })
    .map_err(to_py)
}

/// Nonlinear solve; returns `(values, iterations, residual, converged)`.
#[pyfunction]
#[pyo3(signature = (grid, coefficients, data_expr, tolerance = 1e-10))]
fn solve_plaplace(
    py: Python<'_>,
    grid: &PyGrid,
    coefficients: &PyCoefficients,
    data_expr: &str,
    tolerance: f64,
) -> PyResult<(Vec<C64>, usize, f64, bool)> {
    let g = grid.inner;
    let f = data(data_expr, &g)?;
    let c = coefficients.inner.clone();
    let opts = SolverOptions::default().with_tolerance(tolerance);
    let (u, r) = py
        .detach(|| solve_perturbed_plaplace(&g, &c, &f, &opts))
        .map_err(to_py)?;
    Ok((u.into_values(), r.iterations, r.residual, r.converged))
}

/// Measurement oracle; only DN pairings are exposed.
#[pyclass(name = "DnOracle", frozen)]
struct PyDnOracle {
    inner: DnOracle,
}

#[pymethods]
impl PyDnOracle {
    #[new]
    #[pyo3(signature = (grid, coefficients, tolerance = 1e-10))]
    fn new(grid: &PyGrid, coefficients: &PyCoefficients, tolerance: f64) -> PyResult<Self> {
        let opts = SolverOptions::default().with_tolerance(tolerance);
        Ok(Self {
            inner: DnOracle::new(grid.inner, coefficients.inner.clone(), opts).map_err(to_py)?,
        })
    }

    /// `<Λ(f), w>` with `w` the grid lift of `test`.
    fn pair(&self, py: Python<'_>, data_expr: &str, test: &str) -> PyResult<C64> {
        let g = *self.inner.grid();
        let f = data(data_expr, &g)?;
        let w = data(test, &g)?.lift().clone();
        py.detach(|| self.inner.pair_nonlinear(&f, &w)).map_err(to_py)
    }

    /// Limit of the ε-expansion of `<Λ(εf), w>/ε`: the linear DN pairing.
    #[pyo3(signature = (data_expr, test, eps0 = 0.1, ratio = 0.5, count = 6))]
    fn linear_pairing(
        &self,
        py: Python<'_>,
        data_expr: &str,
        test: &str,
        eps0: f64,
        ratio: f64,
        count: usize,
    ) -> PyResult<C64> {
        let g = *self.inner.grid();
        let f = data(data_expr, &g)?;
        let w = data(test, &g)?.lift().clone();
        let s = EpsSchedule { eps0, ratio, count };
        py.detach(|| extract_linear_dn(&self.inner, &f, &w, &s).map(|l| l.limit()))
            .map_err(to_py)
    }

    /// `(solves, cache hits)`.
    fn statistics(&self) -> (usize, usize) {
        self.inner.statistics()
    }
}

/// Limit of `a + b t^q` fitted to the points; returns `(limit, q, confident)`.
#[pyfunction]
#[pyo3(signature = (parameters, values, q_hint = None))]
fn extrapolate(parameters: Vec<f64>, values: Vec<C64>, q_hint: Option<f64>) -> PyResult<(C64, f64, bool)> {
    if parameters.len() != values.len() {
        return Err(ConfigError::new_err("parameters and values differ in length"));
    }
    let pts: Vec<(f64, C64)> = parameters.into_iter().zip(values).collect();
    let s = limit::extrapolate(&pts, q_hint).map_err(to_py)?;
    Ok((s.limit(), s.fit.q, s.confident))
}

/// Canonical fully parenthesized form of an expression.
#[pyfunction]
fn canonical_expression(src: &str) -> PyResult<String> {
    Ok(CoeffExpr::parse(src).map_err(to_py)?.canonical())
}

#[pyfunction]
fn eval_expression(src: &str, x1: f64, x2: f64) -> PyResult<f64> {
    Ok(CoeffExpr::parse(src).map_err(to_py)?.eval(x1, x2))
}

/// `(int η^2 of the u_M cutoff trace, int |η'|^2 of the pair cutoff)`.
#[pyfunction]
fn cutoff_integrals() -> (f64, f64) {
    let f = ProbeFrame::default();
    (f.c_eta(), f.pair_gradient_energy())
}

/// Runs a TOML experiment config and returns the JSON summary.
#[pyfunction]
fn run_config(py: Python<'_>, toml_text: &str) -> PyResult<String> {
    let c = ExperimentConfig::from_toml(toml_text).map_err(to_py)?;
    let out = py.detach(|| experiment::run(&c)).map_err(to_py)?;
    serde_json::to_string(&out.summary).map_err(|e| ConfigError::new_err(e.to_string()))
}

#[pyfunction]
fn describe_config(toml_text: &str) -> PyResult<String> {
    let c = ExperimentConfig::from_toml(toml_text).map_err(to_py)?;
    experiment::describe(&c).map_err(to_py)
}

#[pymodule]
fn plap_recon_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("SolverError", py.get_type::<SolverError>())?;
    m.add("ExtrapolationError", py.get_type::<ExtrapolationError>())?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyCoefficients>()?;
    m.add_class::<PyDnOracle>()?;
    m.add_function(wrap_pyfunction!(solve_conductivity, m)?)?;
    m.add_function(wrap_pyfunction!(solve_plaplace, m)?)?;
    m.add_function(wrap_pyfunction!(extrapolate, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_expression, m)?)?;
    m.add_function(wrap_pyfunction!(eval_expression, m)?)?;
    m.add_function(wrap_pyfunction!(cutoff_integrals, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(describe_config, m)?)?;
    Ok(())
}
