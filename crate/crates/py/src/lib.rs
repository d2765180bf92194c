//! Python bindings for the Heston-Hull-White solvers.

use hhw::analytic;
use hhw::discretize::SemidiscreteSystem;
use hhw::harness::{self, node_value, Problem};
use hhw::{CaseId, HhwParams, OptionKind, OptionSpec, SchemeId};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

create_exception!(hhw_py, HhwError, PyValueError);

fn py_err(e: hhw::Error) -> PyErr {
    HhwError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = hhw::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

fn option_kind(name: &str) -> PyResult<OptionKind> {
    match name {
        "call" => Ok(OptionKind::Call),
        "uoc" | "up-and-out" => Ok(OptionKind::UpAndOutCall),
        other => Err(HhwError::new_err(format!("unknown option kind '{other}'"))),
    }
}

/// Model constants.
#[pyclass(name = "Params", frozen, from_py_object)]
#[derive(Clone)]
struct PyParams(HhwParams);

#[pymethods]
impl PyParams {
    #[new]
    #[allow(clippy::too_many_arguments)]
    fn new(
        kappa: f64,
        eta: f64,
        sigma1: f64,
        a: f64,
        c1: f64,
        c2: f64,
        c3: f64,
        sigma2: f64,
        rho12: f64,
        rho13: f64,
        rho23: f64,
    ) -> PyResult<Self> {
        let p = HhwParams { kappa, eta, sigma1, a, c1, c2, c3, sigma2, rho12, rho13, rho23 };
        p.validate().map_err(py_err)?;
        Ok(Self(p))
    }

    fn without_cross_correlations(&self) -> Self {
        Self(self.0.without_cross_correlations())
    }

    fn constant_rate_limit(&self, r0: f64) -> Self {
        Self(self.0.constant_rate_limit(r0))
    }

    fn mean_reversion(&self, tau: f64) -> f64 {
        self.0.mean_reversion(tau)
    }

    fn feller_satisfied(&self) -> bool {
        self.0.feller_satisfied()
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.0.kappa
    }
    #[getter]
    fn eta(&self) -> f64 {
        self.0.eta
    }
    #[getter]
    fn sigma1(&self) -> f64 {
        self.0.sigma1
    }
    #[getter]
    fn a(&self) -> f64 {
        self.0.a
    }
    #[getter]
    fn sigma2(&self) -> f64 {
        self.0.sigma2
    }
    #[getter]
    fn rho(&self) -> (f64, f64, f64) {
        (self.0.rho12, self.0.rho13, self.0.rho23)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

/// Vanilla or up-and-out call.
#[pyclass(name = "Contract", frozen, from_py_object)]
#[derive(Clone)]
struct PyContract(OptionSpec);

#[pymethods]
impl PyContract {
    #[staticmethod]
    fn call(strike: f64, maturity: f64) -> PyResult<Self> {
        OptionSpec::call(strike, maturity).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn up_and_out_call(strike: f64, maturity: f64, barrier: f64) -> PyResult<Self> {
        OptionSpec::up_and_out_call(strike, maturity, barrier).map(Self).map_err(py_err)
    }

    fn payoff(&self, s: f64) -> f64 {
        self.0.payoff(s)
    }

    #[getter]
    fn strike(&self) -> f64 {
        self.0.strike
    }
    #[getter]
    fn maturity(&self) -> f64 {
        self.0.maturity
    }
    #[getter]
    fn barrier(&self) -> Option<f64> {
        self.0.barrier
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

/// Semidiscrete system for a benchmark case on the default grid.
#[pyclass(name = "Solver", frozen)]
struct PySolver {
    problem: Problem,
    sys: SemidiscreteSystem,
}

#[pymethods]
impl PySolver {
    #[new]
    #[pyo3(signature = (case, m, option = "call", barrier = 120.0, zero_cross_corr = false, uniform = false))]
    fn new(case: &str, m: usize, option: &str, barrier: f64, zero_cross_corr: bool, uniform: bool) -> PyResult<Self> {
        let problem = Problem::new(parse::<CaseId>(case)?, option_kind(option)?, barrier, zero_cross_corr).map_err(py_err)?;
        let sys = problem.system(m, uniform).map_err(py_err)?;
        Ok(Self { problem, sys })
    }

    #[getter]
    fn params(&self) -> PyParams {
        PyParams(self.problem.params)
    }

    #[getter]
    fn contract(&self) -> PyContract {
        PyContract(self.problem.option)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.sys.dim()
    }

    #[getter]
    fn s_points(&self) -> Vec<f64> {
        self.sys.grid.s.points.clone()
    }
    #[getter]
    fn v_points(&self) -> Vec<f64> {
        self.sys.grid.v.points.clone()
    }
    #[getter]
    fn r_points(&self) -> Vec<f64> {
        self.sys.grid.r.points.clone()
    }

    fn default_theta(&self, scheme: &str) -> PyResult<f64> {
        Ok(self.problem.theta(parse(scheme)?))
    }

    /// Solution vector at maturity over the active grid points.
    #[pyo3(signature = (scheme = "mcs", steps = 100, theta = None, damping = None))]
    fn solve(&self, py: Python<'_>, scheme: &str, steps: usize, theta: Option<f64>, damping: Option<bool>) -> PyResult<Vec<f64>> {
        let scheme: SchemeId = parse(scheme)?;
        let theta = theta.unwrap_or_else(|| self.problem.theta(scheme));
        let damping = damping.unwrap_or(self.problem.option.is_barrier());
        py.detach(|| harness::solve(&self.sys, scheme, theta, steps, damping)).map_err(py_err)
    }

    /// Value at the grid node nearest to `(s, v, r)`, with that node.
    fn value_at(&self, u: Vec<f64>, s: f64, v: f64, r: f64) -> PyResult<(f64, (f64, f64, f64))> {
        if u.len() != self.sys.dim() {
            return Err(HhwError::new_err(format!("expected {} values, got {}", self.sys.dim(), u.len())));
        }
        let g = &self.sys.grid;
        let (i, j, k) = (g.s.nearest(s), g.v.nearest(v), g.r.nearest(r));
        let node = (g.s.points[i], g.v.points[j], g.r.points[k]);
        Ok((node_value(g, &self.problem.option, &u, i, j, k), node))
    }
}

/// Model constants and vanilla call of a benchmark case.
#[pyfunction]
fn case(name: &str) -> PyResult<(PyParams, PyContract)> {
    let (p, o) = hhw::case_params(parse(name)?);
    Ok((PyParams(p), PyContract(o)))
}

#[pyfunction]
#[pyo3(signature = (s, v, r, params, contract, tau = 0.0))]
fn call_price(s: f64, v: f64, r: f64, params: PyParams, contract: PyContract, tau: f64) -> PyResult<f64> {
    analytic::call_price(s, v, r, tau, &params.0, &contract.0).map_err(py_err)
}

#[pyfunction]
fn bond_price(r: f64, tau: f64, params: PyParams, maturity: f64) -> PyResult<f64> {
    analytic::bond_price(r, tau, &params.0, maturity).map_err(py_err)
}

/// Monte Carlo estimate and standard error.
#[pyfunction]
#[pyo3(signature = (params, contract, s, v, r, paths = 100_000, steps = 200, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn mc_price(
    py: Python<'_>,
    params: PyParams,
    contract: PyContract,
    s: f64,
    v: f64,
    r: f64,
    paths: usize,
    steps: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    py.detach(|| harness::mc_oracle(&params.0, &contract.0, s, v, r, paths, steps, seed)).map_err(py_err)
}

#[pyfunction]
fn fit_order(rows: Vec<(f64, f64)>) -> PyResult<(f64, f64)> {
    harness::fit_order(&rows).map_err(py_err)
}

/// Runs a benchmark experiment from command-line style flags and returns
/// `(csv, summary)`.
#[pyfunction]
fn run_experiment(py: Python<'_>, flags: Vec<String>) -> PyResult<(String, String)> {
    use clap::Parser;
    let args = harness::Args::try_parse_from(std::iter::once("hhw-bench".to_string()).chain(flags))
        .map_err(|e| HhwError::new_err(e.to_string()))?;
    let out = py.detach(|| harness::run_experiment(&args)).map_err(py_err)?;
    Ok((out.csv, out.summary))
}

#[pymodule]
fn hhw_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HhwError", m.py().get_type::<HhwError>())?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyContract>()?;
    m.add_class::<PySolver>()?;
    m.add_function(wrap_pyfunction!(case, m)?)?;
    m.add_function(wrap_pyfunction!(call_price, m)?)?;
    m.add_function(wrap_pyfunction!(bond_price, m)?)?;
    m.add_function(wrap_pyfunction!(mc_price, m)?)?;
    m.add_function(wrap_pyfunction!(fit_order, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
