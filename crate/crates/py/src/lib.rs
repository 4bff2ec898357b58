//! Python bindings. Reports come back as plain dicts and lists, decoded
//! from the same JSON the CLI writes.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::Serialize;

use vsn::harness;
use vsn::learning::run as run_trajectory;
use vsn::{AgentAction, Coord, Error, ExperimentConfig, GameSpec, MStarMode, Profile};

create_exception!(vsn_coverage, ValidationError, PyValueError);
create_exception!(vsn_coverage, CapacityError, PyException);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Validation(_) => ValidationError::new_err(e.to_string()),
        Error::Capacity { .. } => CapacityError::new_err(e.to_string()),
        Error::Domain(_) | Error::Config(_) | Error::Parse(_) => PyValueError::new_err(e.to_string()),
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        Error::Structural(_) => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_object<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| to_py(e.into()))?;
    let json = PyModule::import(py, "json")?;
    Ok(json.call_method1("loads", (text,))?.unbind())
}

/// An experiment configuration.
#[pyclass(name = "Config", module = "vsn_coverage", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    /// Parses and validates a JSON configuration.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyConfig {
            inner: ExperimentConfig::from_json(text).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyConfig {
            inner: vsn::load_config(&path).map_err(to_py)?,
        })
    }

    /// The built-in 4x4 two-agent benchmark.
    #[staticmethod]
    fn benchmark() -> Self {
        PyConfig {
            inner: ExperimentConfig::benchmark(),
        }
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(|e| to_py(e.into()))
    }

    /// A copy with the given fields replaced, validated again.
    #[pyo3(signature = (*, seed=None, replications=None, horizon=None, out=None, traces=None))]
    fn with_overrides(
        &self,
        seed: Option<u64>,
        replications: Option<u64>,
        horizon: Option<u64>,
        out: Option<PathBuf>,
        traces: Option<bool>,
    ) -> PyResult<Self> {
        let mut c = self.inner.clone();
        if let Some(s) = seed {
            c.seed = s;
        }
        if let Some(r) = replications {
            c.replications = r;
        }
        if let Some(h) = horizon {
            c.horizon = h;
        }
        if let Some(o) = out {
            c.output.dir = o;
        }
        if let Some(t) = traces {
            c.output.traces = t;
        }
        c.validate().map_err(to_py)?;
        Ok(PyConfig { inner: c })
    }

    #[getter]
    fn algorithm(&self) -> &'static str {
        self.inner.algorithm.name()
    }
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }
    #[getter]
    fn replications(&self) -> u64 {
        self.inner.replications
    }
    #[getter]
    fn horizon(&self) -> u64 {
        self.inner.horizon
    }

    fn game(&self) -> PyResult<PyGame> {
        Ok(PyGame {
            inner: self.inner.game_spec().map_err(to_py)?,
        })
    }
}

type PyAction = (i32, i32, usize);

fn profile_from(actions: Vec<PyAction>) -> Profile {
    Profile(
        actions
            .into_iter()
            .map(|(x, y, c)| AgentAction::new(Coord::new(x, y), c))
            .collect(),
    )
}

/// A coverage game. Profiles are lists of `(x, y, control_index)`.
#[pyclass(name = "Game", module = "vsn_coverage")]
struct PyGame {
    inner: GameSpec,
}

impl PyGame {
    fn checked(&self, actions: Vec<PyAction>) -> PyResult<Profile> {
        let p = profile_from(actions);
        self.inner.check_profile(&p).map_err(to_py)?;
        Ok(p)
    }

    fn agent(&self, p: &Profile, i: usize) -> PyResult<()> {
        if i >= p.len() {
            return Err(PyValueError::new_err(format!("agent {i} out of range for {} agents", p.len())));
        }
        Ok(())
    }
}

#[pymethods]
impl PyGame {
    #[getter]
    fn n_agents(&self) -> usize {
        self.inner.n_agents()
    }
    #[getter]
    fn n_controls(&self) -> usize {
        self.inner.n_controls()
    }

    /// Cell centers in index order.
    fn cells(&self) -> Vec<(i32, i32)> {
        self.inner.world().cells().iter().map(|q| (q.x, q.y)).collect()
    }

    fn weights(&self) -> Vec<f64> {
        self.inner.weights().values().to_vec()
    }

    /// Cost f(c) of the control with this index.
    fn cost(&self, ctrl: usize) -> PyResult<f64> {
        if ctrl >= self.inner.n_controls() {
            return Err(PyValueError::new_err(format!("control {ctrl} out of range")));
        }
        Ok(self.inner.cost(ctrl))
    }

    /// Cells (as indices) seen from this action.
    fn footprint(&self, x: i32, y: i32, ctrl: usize) -> PyResult<Vec<usize>> {
        let a = AgentAction::new(Coord::new(x, y), ctrl);
        self.inner.check_action(&a).map_err(to_py)?;
        Ok(self.inner.footprint_cells(&a).to_vec())
    }

    fn utility(&self, profile: Vec<PyAction>, i: usize) -> PyResult<f64> {
        let p = self.checked(profile)?;
        self.agent(&p, i)?;
        Ok(self.inner.utility(&p, i))
    }

    fn utilities(&self, profile: Vec<PyAction>) -> PyResult<Vec<f64>> {
        Ok(self.inner.utilities(&self.checked(profile)?))
    }

    fn potential(&self, profile: Vec<PyAction>) -> PyResult<f64> {
        Ok(self.inner.potential(&self.checked(profile)?))
    }

    fn global_objective(&self, profile: Vec<PyAction>) -> PyResult<f64> {
        Ok(self.inner.global_objective(&self.checked(profile)?))
    }

    /// Number of agents covering each cell.
    fn coverage_counts(&self, profile: Vec<PyAction>) -> PyResult<Vec<usize>> {
        Ok(self.inner.coverage_counts(&self.checked(profile)?))
    }

    fn sensing_neighbors(&self, profile: Vec<PyAction>, i: usize) -> PyResult<Vec<usize>> {
        let p = self.checked(profile)?;
        self.agent(&p, i)?;
        Ok(self.inner.sensing_neighbors(&p, i))
    }

    /// Actions reachable in one step from position `(x, y)`.
    fn feasible_actions(&self, x: i32, y: i32) -> PyResult<Vec<PyAction>> {
        let acts = self.inner.feasible_actions(Coord::new(x, y)).map_err(to_py)?;
        Ok(acts.into_iter().map(|a| (a.position.x, a.position.y, a.ctrl)).collect())
    }

    /// `m*` exactly (capped enumeration) or by the closed-form bound.
    #[pyo3(signature = (exact=true, cap=vsn::game::DEFAULT_M_STAR_CAP))]
    fn m_star(&self, exact: bool, cap: u128) -> PyResult<f64> {
        let mode = if exact { MStarMode::Exact } else { MStarMode::Bound };
        self.inner.m_star(mode, cap).map_err(to_py)
    }
}

/// Runs every replication; writes traces and summary.json when `out` is given.
#[pyfunction]
#[pyo3(signature = (config, out=None))]
fn run_experiment(py: Python<'_>, config: &PyConfig, out: Option<PathBuf>) -> PyResult<Py<PyAny>> {
    let c = config.inner.clone();
    let s = py
        .detach(|| harness::run_experiment(&c, out.as_deref()))
        .map_err(to_py)?;
    to_object(py, &s)
}

/// One recorded trajectory for `config.seed`, as a dict with a `steps` list.
#[pyfunction]
fn simulate(py: Python<'_>, config: &PyConfig) -> PyResult<Py<PyAny>> {
    let c = &config.inner;
    let spec = c.game_spec().map_err(to_py)?;
    let (schedule, params) = c.learner_setup(&spec).map_err(to_py)?;
    let rec = run_trajectory(&spec, c.algorithm, schedule, c.horizon, c.seed, params.as_ref())
        .map_err(to_py)?;
    to_object(py, &rec)
}

#[pyfunction]
#[pyo3(signature = (config, negative_control=false))]
fn verify(py: Python<'_>, config: &PyConfig, negative_control: bool) -> PyResult<Py<PyAny>> {
    to_object(py, &harness::verify(&config.inner, negative_control).map_err(to_py)?)
}

#[pyfunction]
fn oracle(py: Python<'_>, config: &PyConfig) -> PyResult<Py<PyAny>> {
    to_object(py, &harness::oracle(&config.inner).map_err(to_py)?)
}

#[pyfunction]
fn analyze_markov(py: Python<'_>, config: &PyConfig) -> PyResult<Py<PyAny>> {
    let c = config.inner.clone();
    let rep = py.detach(|| harness::analyze_markov(&c)).map_err(to_py)?;
    to_object(py, &rep)
}

#[pyfunction]
fn recheck(py: Python<'_>, out: PathBuf) -> PyResult<Py<PyAny>> {
    to_object(py, &harness::recheck(&out).map_err(to_py)?)
}

#[pymodule]
fn vsn_coverage(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyGame>()?;
    m.add("ValidationError", m.py().get_type::<ValidationError>())?;
    m.add("CapacityError", m.py().get_type::<CapacityError>())?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(analyze_markov, m)?)?;
    m.add_function(wrap_pyfunction!(recheck, m)?)?;
    Ok(())
}
