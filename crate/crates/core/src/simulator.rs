//! Day-by-day rollout of a fixed deployment plan.
//!
//! Each day draws its disrupted hubs from the hub disruption rates, routes
//! that day's demand optimally through the plan's capacities and counts a
//! unit on time when its path, at scenario travel times, fits within the
//! deadline. Unserved units are late. Days are independent and are solved in
//! parallel; the per-day seed depends only on the run seed and the day index.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::economics::HubEconomics;
use crate::network::{Network, DEFAULT_DELAY_MULTIPLIER};
use crate::rng::{derive_seed, stream_rng, streams};
use crate::saa::verify::check_routing;
use crate::saa::{
    default_overflow_penalty, solve_second_stage, DeploymentPlan, Overflow, RoutingSolution,
    SecondStageMethod, SecondStageOptions, SolveError,
};
use crate::scenario::{draw_disruptions, total_units, DemandMap, OdPair, Scenario, StressLevel};

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("expected {expected} days of demand, got {got}")]
    HorizonMismatch { expected: usize, got: usize },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("day {day}: {source}")]
    Routing { day: usize, source: SolveError },
    #[error("day {day}: routing violates constraints: {violations:?}")]
    ConstraintViolation { day: usize, violations: Vec<String> },
    #[error(transparent)]
    Plan(#[from] SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HubCostAmortization {
    /// Daily hub cost is `s_h * C_h` only.
    DailyOperationalOnly,
    /// Adds `f_h * X_h / horizon_days`.
    AmortizeFixedOverHorizon,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub horizon_days: usize,
    pub deadline_hours: f64,
    pub delay_multiplier: f64,
    pub overflow: Overflow,
    pub amortization: HubCostAmortization,
    /// Draw daily disruptions from the hub rates; off means no hub is ever down.
    pub disruptions: bool,
    pub routing: SecondStageMethod,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            horizon_days: 90,
            deadline_hours: 24.0,
            delay_multiplier: DEFAULT_DELAY_MULTIPLIER,
            overflow: Overflow::Auto,
            amortization: HubCostAmortization::AmortizeFixedOverHorizon,
            disruptions: true,
            routing: SecondStageMethod::Exact,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayKpi {
    pub day: usize,
    pub demand_units: u64,
    pub on_time_units: u64,
    /// Routed but slower than the deadline.
    pub late_units: u64,
    pub unserved_units: u64,
    pub on_time_rate: f64,
    pub hub_cost: f64,
    pub fleet_cost: f64,
    pub penalty_cost: f64,
    pub total_cost: f64,
    pub disrupted_hubs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    /// Units delivered within the deadline over all units demanded; 1.0 when
    /// nothing was demanded.
    pub on_time_rate: f64,
    pub avg_daily_total_cost: f64,
    pub avg_daily_hub_cost: f64,
    pub avg_daily_fleet_cost: f64,
    pub avg_daily_penalty_cost: f64,
    pub demand_units: u64,
    pub on_time_units: u64,
    pub late_units: u64,
    pub unserved_units: u64,
    pub days: Vec<DayKpi>,
}

fn daily_hub_cost(plan: &DeploymentPlan, econ: &HubEconomics, config: &SimulationConfig) -> f64 {
    plan.hubs
        .iter()
        .filter_map(|d| {
            let c = econ.get(&d.hub)?;
            let mut cost = c.unit_capacity_cost * d.capacity as f64;
            if d.open && config.amortization == HubCostAmortization::AmortizeFixedOverHorizon {
                cost += c.fixed_cost / config.horizon_days as f64;
            }
            Some(cost)
        })
        .sum()
}

type DayKey = (Vec<(OdPair, u64)>, BTreeSet<String>);

pub fn simulate(
    plan: &DeploymentPlan,
    network: &Network,
    econ: &HubEconomics,
    daily_demands: &[DemandMap],
    config: &SimulationConfig,
) -> Result<KpiReport, SimulationError> {
    if config.horizon_days == 0 {
        return Err(SimulationError::InvalidConfig(
            "horizon_days must be at least 1".into(),
        ));
    }
    if !(config.deadline_hours > 0.0) {
        return Err(SimulationError::InvalidConfig(
            "deadline_hours must be positive".into(),
        ));
    }
    if daily_demands.len() != config.horizon_days {
        return Err(SimulationError::HorizonMismatch {
            expected: config.horizon_days,
            got: daily_demands.len(),
        });
    }
    plan.validate(econ)?;
    plan.aligned_capacities(network)?;

    let hubs: Vec<String> = econ.iter().map(|(h, _)| h.to_string()).collect();
    let rates: Vec<f64> = econ.iter().map(|(_, c)| c.disruption_rate).collect();
    let base = derive_seed(config.seed, streams::SIMULATION);
    let disruptions: Vec<BTreeSet<String>> = (0..config.horizon_days)
        .map(|day| {
            if config.disruptions {
                draw_disruptions(&hubs, &rates, &mut stream_rng(base, day as u64))
            } else {
                BTreeSet::new()
            }
        })
        .collect();

    // one penalty for the whole run, so equal days cost the same
    let pairs: BTreeSet<OdPair> = daily_demands
        .iter()
        .flat_map(|d| d.keys().cloned())
        .collect();
    let overflow = match config.overflow {
        Overflow::Auto => Overflow::Penalty(default_overflow_penalty(network, &pairs)),
        other => other,
    };
    let penalty = match overflow {
        Overflow::Penalty(p) => Some(p),
        _ => None,
    };
    let options = SecondStageOptions {
        overflow,
        delay_multiplier: config.delay_multiplier,
        method: config.routing,
        ..Default::default()
    };

    // days with the same demand and disruptions share one routing
    let keys: Vec<DayKey> = daily_demands
        .iter()
        .zip(&disruptions)
        .map(|(d, h)| {
            (
                d.iter()
                    .filter(|(_, &q)| q > 0)
                    .map(|(p, &q)| (p.clone(), q))
                    .collect(),
                h.clone(),
            )
        })
        .collect();
    let mut unique: BTreeMap<&DayKey, usize> = BTreeMap::new();
    for (day, key) in keys.iter().enumerate() {
        unique.entry(key).or_insert(day);
    }
    let solved: BTreeMap<&DayKey, RoutingSolution> = unique
        .into_par_iter()
        .map(|(key, day)| {
            let scenario = Scenario {
                demand: key.0.iter().cloned().collect(),
                disrupted_hubs: key.1.clone(),
                weight: 1.0,
            };
            let routing = solve_second_stage(plan, network, econ, &scenario, &options)
                .map_err(|source| SimulationError::Routing { day, source })?;
            let violations = check_routing(
                network,
                econ,
                plan,
                &scenario,
                &routing,
                config.delay_multiplier,
                penalty,
            );
            if !violations.is_empty() {
                return Err(SimulationError::ConstraintViolation { day, violations });
            }
            Ok((key, routing))
        })
        .collect::<Result<_, _>>()?;

    let hub_cost = daily_hub_cost(plan, econ, config);
    let days: Vec<DayKpi> = keys
        .iter()
        .enumerate()
        .map(|(day, key)| {
            let routing = &solved[key];
            let demand_units = total_units(&daily_demands[day]);
            let on_time_units: u64 = routing
                .paths
                .iter()
                .filter(|p| p.travel_time_hours <= config.deadline_hours + 1e-9)
                .map(|p| p.units)
                .sum();
            let unserved_units = routing.unserved_units();
            let late_units = demand_units - on_time_units - unserved_units;
            DayKpi {
                day,
                demand_units,
                on_time_units,
                late_units,
                unserved_units,
                on_time_rate: if demand_units == 0 {
                    1.0
                } else {
                    on_time_units as f64 / demand_units as f64
                },
                hub_cost,
                fleet_cost: routing.fleet_cost,
                penalty_cost: routing.penalty_cost,
                total_cost: hub_cost + routing.fleet_cost + routing.penalty_cost,
                disrupted_hubs: key.1.iter().cloned().collect(),
            }
        })
        .collect();
    Ok(aggregate(days))
}

fn aggregate(days: Vec<DayKpi>) -> KpiReport {
    let n = days.len() as f64;
    let mean = |f: fn(&DayKpi) -> f64| days.iter().map(f).sum::<f64>() / n;
    let demand_units: u64 = days.iter().map(|d| d.demand_units).sum();
    let on_time_units: u64 = days.iter().map(|d| d.on_time_units).sum();
    KpiReport {
        on_time_rate: if demand_units == 0 {
            1.0
        } else {
            on_time_units as f64 / demand_units as f64
        },
        avg_daily_total_cost: mean(|d| d.total_cost),
        avg_daily_hub_cost: mean(|d| d.hub_cost),
        avg_daily_fleet_cost: mean(|d| d.fleet_cost),
        avg_daily_penalty_cost: mean(|d| d.penalty_cost),
        demand_units,
        on_time_units,
        late_units: days.iter().map(|d| d.late_units).sum(),
        unserved_units: days.iter().map(|d| d.unserved_units).sum(),
        days,
    }
}

/// Demand replayed at each evaluation level: the quantile demand for L1/L3
/// and the realized days for L2/L4.
#[derive(Debug, Clone, Copy)]
pub struct StressDemand<'a> {
    pub realized: &'a [DemandMap],
    pub quantile: &'a DemandMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressCell {
    pub level: StressLevel,
    pub plan: String,
    pub report: KpiReport,
}

/// KPIs of every plan under every evaluated level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressMatrix {
    pub cells: Vec<StressCell>,
}

impl StressMatrix {
    pub fn get(&self, level: StressLevel, plan: &str) -> Option<&KpiReport> {
        self.cells
            .iter()
            .find(|c| c.level == level && c.plan == plan)
            .map(|c| &c.report)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrices always serialize")
    }

    /// Flat per-day rows: `level,plan,day,on_time_rate,hub_cost,fleet_cost,penalty_cost,total_cost`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "level",
            "plan",
            "day",
            "on_time_rate",
            "hub_cost",
            "fleet_cost",
            "penalty_cost",
            "total_cost",
        ])
        .expect("in-memory write");
        for c in &self.cells {
            for d in &c.report.days {
                w.write_record([
                    c.level.to_string(),
                    c.plan.clone(),
                    d.day.to_string(),
                    format!("{:.6}", d.on_time_rate),
                    format!("{:.6}", d.hub_cost),
                    format!("{:.6}", d.fleet_cost),
                    format!("{:.6}", d.penalty_cost),
                    format!("{:.6}", d.total_cost),
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

/// Evaluates each named plan under each level's regime: disruptions only at
/// L3/L4, quantile demand at L1/L3 and realized demand at L2/L4. The
/// quantile demand is repeated for as many days as were realized.
pub fn run_stress_test(
    plans: &[(String, DeploymentPlan)],
    levels: &[StressLevel],
    network: &Network,
    econ: &HubEconomics,
    demand: StressDemand<'_>,
    config: &SimulationConfig,
) -> Result<StressMatrix, SimulationError> {
    let replay = vec![demand.quantile.clone(); demand.realized.len()];
    let mut cells = Vec::with_capacity(levels.len() * plans.len());
    for &level in levels {
        let days = if level.stochastic_demand() {
            demand.realized
        } else {
            &replay
        };
        let cfg = SimulationConfig {
            disruptions: level.disruptions(),
            ..*config
        };
        for (name, plan) in plans {
            let report = simulate(plan, network, econ, days, &cfg)?;
            cells.push(StressCell {
                level,
                plan: name.clone(),
                report,
            });
        }
    }
    Ok(StressMatrix { cells })
}
