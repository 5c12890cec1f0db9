//! Run configuration: a flat `key = value` file with `#` comments.
//!
//! Relative paths in a file resolve against the file's directory; values
//! given on the command line resolve against the working directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use hubcap::metrics::DegreeScope;
use hubcap::network::{
    NetworkConfig, DEFAULT_DELAY_MULTIPLIER, DEFAULT_MAX_LEG_HOURS, DEFAULT_SPEED_KMH,
};
use hubcap::saa::{Overflow, SecondStageMethod, SolveMode};
use hubcap::scenario::{DEFAULT_DEMAND_QUANTILE, DEFAULT_SCENARIO_COUNT};
use hubcap::simulator::HubCostAmortization;

/// Bad config file contents or flag values.
#[derive(Debug)]
pub struct ConfigError {
    pub origin: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.origin, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub nodes: Option<PathBuf>,
    /// Directed arc list; absent means auto-connect under the leg limit.
    pub arcs: Option<PathBuf>,
    pub economics: Option<PathBuf>,
    pub history: Option<PathBuf>,
    pub truckload: u32,
    pub capacity_cap: u32,
    pub max_leg_hours: f64,
    pub speed_kmh: f64,
    /// Cost per truck-hour of auto-connected arcs.
    pub fleet_cost_rate: f64,
    pub delay_multiplier: f64,
    pub demand_quantile: f64,
    pub scenario_count: usize,
    pub gap_tol: f64,
    pub time_limit: Option<Duration>,
    /// Days of history replayed by the simulator; all of them when unset.
    pub horizon_days: Option<usize>,
    pub deadline_hours: f64,
    pub overflow: Overflow,
    pub seed: u64,
    pub mode: SolveMode,
    pub degree_scope: DegreeScope,
    pub amortization: HubCostAmortization,
    pub sim_routing: SecondStageMethod,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            nodes: None,
            arcs: None,
            economics: None,
            history: None,
            truckload: 1,
            capacity_cap: 60,
            max_leg_hours: DEFAULT_MAX_LEG_HOURS,
            speed_kmh: DEFAULT_SPEED_KMH,
            fleet_cost_rate: 1.0,
            delay_multiplier: DEFAULT_DELAY_MULTIPLIER,
            demand_quantile: DEFAULT_DEMAND_QUANTILE,
            scenario_count: DEFAULT_SCENARIO_COUNT,
            gap_tol: 1e-6,
            time_limit: None,
            horizon_days: None,
            deadline_hours: 24.0,
            overflow: Overflow::Auto,
            seed: 0,
            mode: SolveMode::Exact,
            degree_scope: DegreeScope::All,
            amortization: HubCostAmortization::AmortizeFixedOverHorizon,
            sim_routing: SecondStageMethod::Exact,
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("`{key}` expects a number, got `{value}`"))
}

fn positive(key: &str, value: &str) -> Result<f64, String> {
    let x: f64 = num(key, value)?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{key}` must be positive, got `{value}`"))
    }
}

impl RunConfig {
    /// Parses a config file. `out` is accepted and returned separately.
    pub fn from_file(path: &Path) -> Result<(RunConfig, Option<PathBuf>), anyhow::Error> {
        let text = hubcap::io::read_text(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut cfg = RunConfig::default();
        let mut out = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError {
                origin: format!("{}:{}", path.display(), i + 1),
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "out" {
                out = Some(base.join(value));
                continue;
            }
            cfg.set(key, value, base).map_err(err)?;
        }
        Ok((cfg, out))
    }

    /// Sets one key; relative paths are joined onto `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), String> {
        let path = || Some(base.join(value));
        match key {
            "nodes" => self.nodes = path(),
            "arcs" => {
                self.arcs = if value.is_empty() || value == "auto" {
                    None
                } else {
                    path()
                }
            }
            "economics" => self.economics = path(),
            "history" => self.history = path(),
            "truckload" => {
                self.truckload = num(key, value)?;
                if self.truckload == 0 {
                    return Err("`truckload` must be at least 1".into());
                }
            }
            "capacity_cap" => self.capacity_cap = num(key, value)?,
            "max_leg_hours" => self.max_leg_hours = positive(key, value)?,
            "speed_kmh" => self.speed_kmh = positive(key, value)?,
            "fleet_cost_rate" => self.fleet_cost_rate = positive(key, value)?,
            "delay_multiplier" => {
                self.delay_multiplier = num(key, value)?;
                if !(self.delay_multiplier >= 1.0) {
                    return Err(format!(
                        "`delay_multiplier` must be at least 1, got `{value}`"
                    ));
                }
            }
            "demand_quantile" => {
                self.demand_quantile = num(key, value)?;
                if !(self.demand_quantile > 0.0 && self.demand_quantile < 1.0) {
                    return Err(format!(
                        "`demand_quantile` must lie in (0, 1), got `{value}`"
                    ));
                }
            }
            "scenario_count" => {
                self.scenario_count = num(key, value)?;
                if self.scenario_count == 0 {
                    return Err("`scenario_count` must be at least 1".into());
                }
            }
            "gap_tol" => {
                self.gap_tol = num(key, value)?;
                if !(self.gap_tol >= 0.0) {
                    return Err(format!("`gap_tol` must be non-negative, got `{value}`"));
                }
            }
            "time_limit" => {
                self.time_limit = match value {
                    "" | "none" => None,
                    v => Some(Duration::from_secs_f64(positive(key, v)?)),
                }
            }
            "horizon_days" => {
                self.horizon_days = match value {
                    "" | "all" => None,
                    v => {
                        let d: usize = num(key, v)?;
                        if d == 0 {
                            return Err("`horizon_days` must be at least 1".into());
                        }
                        Some(d)
                    }
                }
            }
            "deadline_hours" => self.deadline_hours = positive(key, value)?,
            "overflow_penalty" => {
                self.overflow = match value {
                    "auto" => Overflow::Auto,
                    "none" | "disabled" => Overflow::Disabled,
                    v => Overflow::Penalty(positive(key, v)?),
                }
            }
            "seed" => self.seed = num(key, value)?,
            "mode" => {
                self.mode = match value {
                    "exact" => SolveMode::Exact,
                    "heuristic" => SolveMode::Heuristic,
                    v => return Err(format!("`mode` expects exact or heuristic, got `{v}`")),
                }
            }
            "degree_scope" => self.degree_scope = value.parse()?,
            "amortization" => {
                self.amortization = match value {
                    "amortize" => HubCostAmortization::AmortizeFixedOverHorizon,
                    "operational" => HubCostAmortization::DailyOperationalOnly,
                    v => {
                        return Err(format!(
                            "`amortization` expects amortize or operational, got `{v}`"
                        ))
                    }
                }
            }
            "sim_routing" => {
                self.sim_routing = match value {
                    "exact" => SecondStageMethod::Exact,
                    "rounded" => SecondStageMethod::Rounded,
                    v => return Err(format!("`sim_routing` expects exact or rounded, got `{v}`")),
                }
            }
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    pub fn network_config(&self) -> NetworkConfig {
        NetworkConfig {
            max_leg_hours: self.max_leg_hours,
            speed_kmh: self.speed_kmh,
            ..NetworkConfig::default()
        }
    }

    pub fn require<'a>(
        &self,
        key: &str,
        value: &'a Option<PathBuf>,
    ) -> Result<&'a Path, ConfigError> {
        value.as_deref().ok_or_else(|| ConfigError {
            origin: "config".into(),
            message: format!(
                "`{key}` is not set (use --config or --{})",
                key.replace('_', "-")
            ),
        })
    }
}
