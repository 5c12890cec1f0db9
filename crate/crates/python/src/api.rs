//! Binding-agnostic layer: loads an instance once and answers requests with
//! JSON text.

use std::path::Path;

use hubcap::io;
use hubcap::metrics::{compute_network_metrics, DegreeScope};
use hubcap::network::{build_network, CandidateArcs, Network, NetworkConfig};
use hubcap::saa::verify::check_report;
use hubcap::saa::{
    build_extensive_form, solve, Decomposition, DeploymentPlan, ModelOptions, Overflow, SolveError,
    SolveMode, SolveOptions,
};
use hubcap::scenario::{
    build_stress_scenarios, fit_demand_estimator, DemandEstimator, DemandMap, StressLevel,
};
use hubcap::simulator::{run_stress_test, SimulationConfig, StressDemand};
use hubcap::HubEconomics;

#[derive(Debug)]
pub enum ApiError {
    Io(io::IoError),
    Invalid(String),
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ApiError::Io(e) => e.fmt(f),
            ApiError::Invalid(m) => f.write_str(m),
        }
    }
}

impl From<io::IoError> for ApiError {
    fn from(e: io::IoError) -> Self {
        ApiError::Io(e)
    }
}

fn invalid(e: impl std::fmt::Display) -> ApiError {
    ApiError::Invalid(e.to_string())
}

pub fn parse_level(level: &str) -> Result<StressLevel, ApiError> {
    level.parse().map_err(invalid)
}

pub fn parse_overflow(penalty: Option<f64>, allow_unserved: bool) -> Overflow {
    match (allow_unserved, penalty) {
        (false, _) => Overflow::Disabled,
        (true, Some(p)) => Overflow::Penalty(p),
        (true, None) => Overflow::Auto,
    }
}

pub struct LoadOptions<'a> {
    pub arcs: Option<&'a Path>,
    pub truckload: u32,
    pub capacity_cap: u32,
    pub network: NetworkConfig,
    pub fleet_cost_rate: f64,
}

impl Default for LoadOptions<'_> {
    fn default() -> Self {
        LoadOptions {
            arcs: None,
            truckload: 1,
            capacity_cap: 60,
            network: NetworkConfig::default(),
            fleet_cost_rate: 1.0,
        }
    }
}

pub struct Session {
    pub network: Network,
    pub econ: HubEconomics,
    pub estimator: DemandEstimator,
    pub days: Vec<DemandMap>,
}

pub struct OptimizeOptions {
    pub scenario_count: usize,
    pub demand_quantile: f64,
    pub seed: u64,
    pub mode: SolveMode,
    pub overflow: Overflow,
    pub delay_multiplier: f64,
    pub gap_tol: f64,
    pub time_limit: Option<std::time::Duration>,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            scenario_count: 50,
            demand_quantile: 0.7,
            seed: 0,
            mode: SolveMode::Exact,
            overflow: Overflow::Auto,
            delay_multiplier: 3.0,
            gap_tol: 1e-6,
            time_limit: None,
        }
    }
}

impl Session {
    pub fn load(
        nodes: &Path,
        economics: &Path,
        history: &Path,
        opts: &LoadOptions<'_>,
    ) -> Result<Self, ApiError> {
        let node_list = io::read_nodes(nodes)?;
        let econ = io::read_economics(economics, opts.truckload, opts.capacity_cap)?;
        let hist = io::read_demand_history(history)?;
        let pairs: Vec<(String, String)> = hist
            .pairs()
            .into_iter()
            .map(|p| (p.origin, p.destination))
            .collect();
        let candidates = match opts.arcs {
            Some(path) => CandidateArcs::Directed(io::read_arcs(path)?),
            None => CandidateArcs::AutoConnect {
                fleet_cost_rate: opts.fleet_cost_rate,
            },
        };
        let network =
            build_network(node_list, candidates, opts.network, &pairs).map_err(invalid)?;
        let estimator = fit_demand_estimator(&hist).map_err(invalid)?;
        Ok(Session {
            network,
            econ,
            estimator,
            days: hist.daily_demands(),
        })
    }

    pub fn hub_ids(&self) -> Vec<String> {
        self.network
            .hubs()
            .iter()
            .map(|&h| self.network.node(h).id.clone())
            .collect()
    }

    pub fn scenarios_json(
        &self,
        level: StressLevel,
        n: usize,
        quantile: f64,
        seed: u64,
    ) -> Result<String, ApiError> {
        build_stress_scenarios(level, &self.estimator, &self.econ, n, quantile, seed)
            .map(|s| s.to_json())
            .map_err(invalid)
    }

    /// Solve report as JSON; a run stopped at its time limit still returns
    /// its incumbent with status `timed_out`.
    pub fn optimize_json(
        &self,
        level: StressLevel,
        opts: &OptimizeOptions,
    ) -> Result<String, ApiError> {
        let set = build_stress_scenarios(
            level,
            &self.estimator,
            &self.econ,
            opts.scenario_count,
            opts.demand_quantile,
            opts.seed,
        )
        .map_err(invalid)?;
        let model = build_extensive_form(
            &self.network,
            &self.econ,
            &set,
            &ModelOptions {
                overflow: opts.overflow,
                delay_multiplier: opts.delay_multiplier,
            },
        )
        .map_err(invalid)?;
        let report = match solve(
            &model,
            &SolveOptions {
                gap_tol: opts.gap_tol,
                time_limit: opts.time_limit,
                seed: opts.seed,
                mode: opts.mode,
                node_limit: None,
                decomposition: Decomposition::Auto,
            },
        ) {
            Ok(r) => r,
            Err(SolveError::TimedOut(Some(r))) => *r,
            Err(e) => return Err(invalid(e)),
        };
        let violations = check_report(&model, &report);
        if !violations.is_empty() {
            return Err(invalid(format!(
                "solution failed the constraint check: {}",
                violations.join("; ")
            )));
        }
        Ok(report.to_json())
    }

    /// KPIs of one plan at one evaluation level over the history's days.
    pub fn simulate_json(
        &self,
        plan_json: &str,
        level: StressLevel,
        demand_quantile: f64,
        deadline_hours: f64,
        seed: u64,
    ) -> Result<String, ApiError> {
        let plan = DeploymentPlan::from_json(plan_json).map_err(invalid)?;
        let quantile = self.estimator.quantile_demand(demand_quantile);
        let config = SimulationConfig {
            horizon_days: self.days.len(),
            deadline_hours,
            seed,
            ..SimulationConfig::default()
        };
        let matrix = run_stress_test(
            &[("plan".to_string(), plan)],
            &[level],
            &self.network,
            &self.econ,
            StressDemand {
                realized: &self.days,
                quantile: &quantile,
            },
            &config,
        )
        .map_err(invalid)?;
        let report = &matrix.cells[0].report;
        serde_json::to_string(report).map_err(invalid)
    }

    /// Network metrics of a plan, using the designed arcs for connectivity.
    pub fn metrics_json(&self, plan_json: &str, scope: &str) -> Result<String, ApiError> {
        let plan = DeploymentPlan::from_json(plan_json).map_err(invalid)?;
        let scope: DegreeScope = scope.parse().map_err(invalid)?;
        let m = compute_network_metrics(&plan, &self.network, &[], scope);
        serde_json::to_string(&m).map_err(invalid)
    }
}
