//! Python bindings. Structured values cross the boundary as plain dicts and
//! lists (via JSON); design changes are strings such as `"add:3"`.

use pyo3::create_exception;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use tripassist::session::{Session as CoreSession, SessionConfig};
use tripassist::{
    Arm, DesignDomain, Dynamics, Error, ExperimentConfig, ExperimentResult as CoreResult, TripChange, TripConfig,
    TripDesign, TripUtilityParams,
};

create_exception!(pytripassist, IllegalChangeError, PyValueError);

fn err(e: Error) -> PyErr {
    match e {
        Error::IllegalChange(_) | Error::UnknownPoi(_) => IllegalChangeError::new_err(e.to_string()),
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        Error::DegeneratePosterior(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Like [`from_py`], with `None` meaning the default value.
fn from_py_or_default<T: DeserializeOwned + Default>(obj: Option<&Bound<'_, PyAny>>) -> PyResult<T> {
    obj.map_or_else(|| Ok(T::default()), from_py)
}

fn parse_change(text: &str) -> PyResult<TripChange> {
    text.parse().map_err(err)
}

fn trip_of(tour: Vec<u32>) -> TripDesign {
    TripDesign { tour }
}

/// A set of points of interest.
#[pyclass(module = "pytripassist", frozen)]
struct City {
    inner: tripassist::City,
}

#[pymethods]
impl City {
    /// Random city with `n` POIs; identical seeds give identical cities.
    #[staticmethod]
    #[pyo3(signature = (n, seed=0, config=None))]
    fn generate(n: usize, seed: u64, config: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let config = from_py_or_default(config)?;
        Ok(Self { inner: tripassist::City::generate(n, seed, &config).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: tripassist::City::from_json(text).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: tripassist::City::load(path).map_err(err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(err)
    }

    #[getter]
    fn pois<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.pois)
    }

    fn __len__(&self) -> usize {
        self.inner.pois.len()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("City(n_pois={})", self.inner.pois.len())
    }
}

/// Trip planning as a design domain. Trips are lists of POI ids in visiting
/// order.
#[pyclass(module = "pytripassist", frozen)]
struct TripDomain {
    inner: tripassist::TripDomain,
}

#[pymethods]
impl TripDomain {
    #[new]
    #[pyo3(signature = (city, config=None))]
    fn new(city: &City, config: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let config: TripConfig = from_py_or_default(config)?;
        Ok(Self { inner: tripassist::TripDomain::new(&city.inner, config).map_err(err)? })
    }

    fn legal_changes(&self, tour: Vec<u32>) -> PyResult<Vec<String>> {
        let changes = self.inner.legal_changes(&trip_of(tour)).map_err(err)?;
        Ok(changes.iter().map(ToString::to_string).collect())
    }

    /// Applies `change`; `subjective=True` uses the designer's insertion
    /// heuristic instead of optimal routing.
    #[pyo3(signature = (tour, change, subjective=false))]
    fn apply(&self, tour: Vec<u32>, change: &str, subjective: bool) -> PyResult<Vec<u32>> {
        let dynamics = if subjective { Dynamics::Subjective } else { Dynamics::Objective };
        let next = self.inner.apply(&trip_of(tour), parse_change(change)?, dynamics).map_err(err)?;
        Ok(next.tour)
    }

    fn outcomes<'py>(&self, py: Python<'py>, tour: Vec<u32>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.outcomes(&trip_of(tour)).map_err(err)?)
    }

    fn utility(&self, tour: Vec<u32>, params: &Bound<'_, PyAny>) -> PyResult<f64> {
        let params: TripUtilityParams = from_py(params)?;
        params.validate(self.inner.n_categories()).map_err(err)?;
        let outcomes = self.inner.outcomes(&trip_of(tour)).map_err(err)?;
        Ok(self.inner.utility(&params, &outcomes))
    }

    fn route_optimal(&self, ids: Vec<u32>) -> PyResult<Vec<u32>> {
        self.inner.route_optimal(&ids).map_err(err)
    }

    fn tour_length(&self, tour: Vec<u32>) -> PyResult<f64> {
        self.inner.tour_length(&tour).map_err(err)
    }

    fn subjective_insert(&self, tour: Vec<u32>, poi: u32) -> PyResult<Vec<u32>> {
        self.inner.subjective_insert(&tour, poi).map_err(err)
    }
}

/// An interactive design session: the designer chooses changes, the
/// assistant recommends and updates its beliefs after every choice.
#[pyclass(module = "pytripassist")]
struct Session {
    inner: CoreSession,
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (city, config=None, session_id="session", event_log=None))]
    fn new(
        city: &City,
        config: Option<&Bound<'_, PyAny>>,
        session_id: &str,
        event_log: Option<&str>,
    ) -> PyResult<Self> {
        let config: SessionConfig = from_py_or_default(config)?;
        let mut inner = CoreSession::create(session_id, city.inner.clone(), config).map_err(err)?;
        if let Some(path) = event_log {
            inner.persist_to(path).map_err(err)?;
        }
        Ok(Self { inner })
    }

    /// Rebuilds a session from its event log and keeps appending to it.
    #[staticmethod]
    fn replay(path: &str) -> PyResult<Self> {
        let events = CoreSession::load_events(path).map_err(err)?;
        let mut inner = CoreSession::replay(&events).map_err(err)?;
        inner.resume_log(path).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn session_id(&self) -> &str {
        self.inner.id()
    }

    #[getter]
    fn tour(&self) -> Vec<u32> {
        self.inner.trip().tour.clone()
    }

    fn view<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.view().map_err(err)?)
    }

    fn legal_changes(&self) -> PyResult<Vec<String>> {
        Ok(self.inner.legal_changes().map_err(err)?.iter().map(ToString::to_string).collect())
    }

    /// The recommendation for this iteration (computed once, then cached):
    /// `{"change": ..., "whatif": ...}` or `{"no_recommendation": True}`.
    fn recommendation<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let rec = py.detach(|| self.inner.recommendation()).map_err(err)?;
        to_py(py, &rec)
    }

    #[pyo3(signature = (change, request_id=None))]
    fn choose<'py>(&mut self, py: Python<'py>, change: &str, request_id: Option<String>) -> PyResult<Bound<'py, PyAny>> {
        let change = parse_change(change)?;
        let view = py.detach(|| self.inner.choose(change, request_id)).map_err(err)?;
        to_py(py, &view)
    }

    fn whatif<'py>(&self, py: Python<'py>, change: &str) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.whatif(parse_change(change)?).map_err(err)?)
    }

    fn history<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.history())
    }

    fn events<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.events())
    }

    fn __repr__(&self) -> String {
        format!("Session(id={:?}, tour={:?})", self.inner.id(), self.inner.trip().tour)
    }
}

/// Results of a simulated assisted/unassisted experiment.
#[pyclass(module = "pytripassist", frozen)]
struct ExperimentResult {
    inner: CoreResult,
}

#[pymethods]
impl ExperimentResult {
    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        self.inner.write_csv(path).map_err(err)
    }

    fn write_trace(&self, path: &str) -> PyResult<()> {
        self.inner.write_trace(path).map_err(err)
    }

    fn summary(&self) -> String {
        self.inner.summary()
    }

    /// Rows of `{iteration, arm, mean_utility, stderr, n_runs}`.
    fn aggregate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.aggregate())
    }

    /// Per-run true utilities after `iteration` changes.
    fn utilities_at(&self, arm: &str, iteration: usize) -> PyResult<Vec<f64>> {
        Ok(self.inner.utilities_at(parse_arm(arm)?, iteration))
    }

    /// Mean and standard error of assisted minus unassisted utility.
    fn paired_difference(&self, iteration: usize) -> Option<(f64, f64)> {
        self.inner.paired_difference(iteration)
    }
}

fn parse_arm(name: &str) -> PyResult<Arm> {
    match name {
        "assisted" => Ok(Arm::Assisted),
        "unassisted" => Ok(Arm::Unassisted),
        _ => Err(PyValueError::new_err(format!("unknown arm {name:?}"))),
    }
}

/// Runs paired assisted/unassisted simulations. `config` is a dict of
/// experiment settings; missing keys take their defaults.
#[pyfunction]
#[pyo3(signature = (config=None, arms=None))]
fn run_experiment(
    py: Python<'_>,
    config: Option<&Bound<'_, PyAny>>,
    arms: Option<Vec<String>>,
) -> PyResult<ExperimentResult> {
    let config: ExperimentConfig = from_py_or_default(config)?;
    let arms = match arms {
        Some(names) => names.iter().map(|n| parse_arm(n)).collect::<PyResult<Vec<_>>>()?,
        None => vec![Arm::Assisted, Arm::Unassisted],
    };
    let inner = py.detach(|| tripassist::run_experiment(&config, &arms)).map_err(err)?;
    Ok(ExperimentResult { inner })
}

/// Default configuration dicts, handy as templates.
#[pyfunction]
fn default_config<'py>(py: Python<'py>, kind: &str) -> PyResult<Bound<'py, PyAny>> {
    match kind {
        "experiment" => to_py(py, &ExperimentConfig::default()),
        "session" => to_py(py, &SessionConfig::default()),
        "trip" => to_py(py, &TripConfig::default()),
        "city" => to_py(py, &tripassist::CityConfig::default()),
        _ => Err(PyValueError::new_err(format!("unknown config kind {kind:?}"))),
    }
}

#[pymodule]
fn pytripassist(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<City>()?;
    m.add_class::<TripDomain>()?;
    m.add_class::<Session>()?;
    m.add_class::<ExperimentResult>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add("IllegalChangeError", m.py().get_type::<IllegalChangeError>())?;
    Ok(())
}
