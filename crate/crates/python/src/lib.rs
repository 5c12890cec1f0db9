//! Python module `hubcap`: load an instance from CSV files, solve the
//! deployment model at a stress level and simulate plans. Results come back
//! as plain dicts.

pub mod api;

use std::path::PathBuf;
use std::time::Duration;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use api::{ApiError, LoadOptions, OptimizeOptions, Session};
use hubcap::network::NetworkConfig;
use hubcap::saa::SolveMode;

fn to_py(e: ApiError) -> PyErr {
    match e {
        ApiError::Io(e) => PyOSError::new_err(e.to_string()),
        ApiError::Invalid(m) => PyValueError::new_err(m),
    }
}

fn loads<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn dumps(py: Python<'_>, value: &Bound<'_, PyAny>) -> PyResult<String> {
    py.import("json")?
        .call_method1("dumps", (value,))?
        .extract()
}

/// Number of trucks for `total` units at truckload `m`.
#[pyfunction]
fn truck_count(total: u64, m: u32) -> PyResult<u64> {
    if m == 0 {
        return Err(PyValueError::new_err("truckload must be at least 1"));
    }
    Ok(hubcap::saa::truck_count(total, m))
}

/// A relay network with hub economics and a demand history.
#[pyclass(name = "Instance", module = "hubcap", frozen)]
struct PyInstance {
    session: Session,
}

#[pymethods]
impl PyInstance {
    #[new]
    #[pyo3(signature = (nodes, economics, history, arcs=None, truckload=1, capacity_cap=60, max_leg_hours=5.5, speed_kmh=70.0, fleet_cost_rate=1.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        nodes: PathBuf,
        economics: PathBuf,
        history: PathBuf,
        arcs: Option<PathBuf>,
        truckload: u32,
        capacity_cap: u32,
        max_leg_hours: f64,
        speed_kmh: f64,
        fleet_cost_rate: f64,
    ) -> PyResult<Self> {
        let opts = LoadOptions {
            arcs: arcs.as_deref(),
            truckload,
            capacity_cap,
            network: NetworkConfig {
                max_leg_hours,
                speed_kmh,
                ..NetworkConfig::default()
            },
            fleet_cost_rate,
        };
        let session = Session::load(&nodes, &economics, &history, &opts).map_err(to_py)?;
        Ok(PyInstance { session })
    }

    #[getter]
    fn hubs(&self) -> Vec<String> {
        self.session.hub_ids()
    }

    #[getter]
    fn horizon_days(&self) -> usize {
        self.session.days.len()
    }

    /// Scenario set of a stress level (1-4, or BDN/SDN/SDiN/ISN).
    #[pyo3(signature = (level, n=50, demand_quantile=0.7, seed=0))]
    fn scenarios<'py>(
        &self,
        py: Python<'py>,
        level: &str,
        n: usize,
        demand_quantile: f64,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let level = api::parse_level(level).map_err(to_py)?;
        let text = self
            .session
            .scenarios_json(level, n, demand_quantile, seed)
            .map_err(to_py)?;
        loads(py, &text)
    }

    /// Solve report of the level's model. `overflow_penalty=None` uses the
    /// automatic penalty; `allow_unserved=False` forbids unserved demand.
    #[pyo3(signature = (level, n=50, demand_quantile=0.7, seed=0, mode="exact", overflow_penalty=None, allow_unserved=true, delay_multiplier=3.0, gap_tol=1e-6, time_limit=None))]
    #[allow(clippy::too_many_arguments)]
    fn optimize<'py>(
        &self,
        py: Python<'py>,
        level: &str,
        n: usize,
        demand_quantile: f64,
        seed: u64,
        mode: &str,
        overflow_penalty: Option<f64>,
        allow_unserved: bool,
        delay_multiplier: f64,
        gap_tol: f64,
        time_limit: Option<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let level = api::parse_level(level).map_err(to_py)?;
        let mode = match mode {
            "exact" => SolveMode::Exact,
            "heuristic" => SolveMode::Heuristic,
            other => {
                return Err(PyValueError::new_err(format!(
                    "mode must be exact or heuristic, got {other}"
                )))
            }
        };
        let opts = OptimizeOptions {
            scenario_count: n,
            demand_quantile,
            seed,
            mode,
            overflow: api::parse_overflow(overflow_penalty, allow_unserved),
            delay_multiplier,
            gap_tol,
            time_limit: time_limit.map(Duration::from_secs_f64),
        };
        let text = py
            .detach(|| self.session.optimize_json(level, &opts))
            .map_err(to_py)?;
        loads(py, &text)
    }

    /// KPI report of `plan` (a dict as returned in a report's `plan`) at an
    /// evaluation level.
    #[pyo3(signature = (plan, level, demand_quantile=0.7, deadline_hours=24.0, seed=0))]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        plan: &Bound<'py, PyAny>,
        level: &str,
        demand_quantile: f64,
        deadline_hours: f64,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let level = api::parse_level(level).map_err(to_py)?;
        let plan_json = dumps(py, plan)?;
        let text = py
            .detach(|| {
                self.session
                    .simulate_json(&plan_json, level, demand_quantile, deadline_hours, seed)
            })
            .map_err(to_py)?;
        loads(py, &text)
    }

    #[pyo3(signature = (plan, degree_scope="all"))]
    fn metrics<'py>(
        &self,
        py: Python<'py>,
        plan: &Bound<'py, PyAny>,
        degree_scope: &str,
    ) -> PyResult<Bound<'py, PyAny>> {
        let plan_json = dumps(py, plan)?;
        let text = self
            .session
            .metrics_json(&plan_json, degree_scope)
            .map_err(to_py)?;
        loads(py, &text)
    }
}

#[pymodule]
#[pyo3(name = "hubcap")]
fn hubcap_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(truck_count, m)?)?;
    m.add_class::<PyInstance>()?;
    Ok(())
}
