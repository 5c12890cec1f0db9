//! Sample-average two-stage model: hub opening and capacity in the first
//! stage, truck routing per scenario in the second.
//!
//! [`build_extensive_form`] resolves a scenario set against the network and
//! [`solve`] runs branch-and-bound on the extensive form (or, in heuristic
//! mode, rounds its LP relaxation). Internally, commodities that share an
//! origin are carried by one aggregated flow per arc; per-pair flows are
//! recovered by path decomposition, which keeps the model small without
//! changing its optimum. Scenarios with identical demand and disruptions are
//! merged into one weighted block.

mod model;
mod plan;
mod routing;
mod second_stage;
pub mod verify;

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::economics::EconomicsError;
use crate::milp::{relative_gap, BranchAndBound, MilpError, MilpStatus};
use crate::scenario::OdPair;

pub use model::{
    build_extensive_form, default_overflow_penalty, ModelInstance, ModelOptions, ModelStats,
};
pub use plan::{DeploymentPlan, HubDeployment};
pub use routing::{RoutedPath, RoutingSolution};
pub use second_stage::{solve_second_stage, SecondStageMethod, SecondStageOptions};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("no relay path for {}", list_pairs(.0))]
    UnreachableDemand(Vec<OdPair>),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error(transparent)]
    Economics(#[from] EconomicsError),
    #[error("invalid scenarios: {0}")]
    InvalidScenarios(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("model is infeasible (overflow disabled)")]
    Infeasible,
    #[error("model is unbounded")]
    Unbounded,
    #[error("time limit reached{}", timed_out_detail(.0))]
    TimedOut(Option<Box<SolveReport>>),
}

fn list_pairs(pairs: &[OdPair]) -> String {
    pairs
        .iter()
        .map(|p| p.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn timed_out_detail(report: &Option<Box<SolveReport>>) -> String {
    match report {
        Some(r) => format!(
            " with incumbent {:.4} (gap {:.3e})",
            r.objective, r.optimality_gap
        ),
        None => " before any incumbent was found".to_string(),
    }
}

impl From<MilpError> for SolveError {
    fn from(e: MilpError) -> Self {
        match e {
            MilpError::Infeasible => SolveError::Infeasible,
            MilpError::Unbounded => SolveError::Unbounded,
        }
    }
}

/// What to do with demand that cannot be routed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overflow {
    /// Penalize unserved units at [`default_overflow_penalty`].
    Auto,
    /// Penalize unserved units at the given cost per unit.
    Penalty(f64),
    /// No slack: all demand must be routed, so the model can be infeasible.
    Disabled,
}

/// `ceil(total_flow / m)`: trucks needed to carry `total_flow` units.
pub fn truck_count(total_flow: u64, m: u32) -> u64 {
    assert!(m >= 1, "truckload must be at least 1");
    total_flow.div_ceil(m as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// Branch-and-bound to the gap tolerance.
    Exact,
    /// LP relaxation with capacities rounded up and rounded routing; the gap
    /// to the LP bound is reported.
    Heuristic,
}

/// How heuristic mode obtains its bound and capacities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Decomposition {
    /// Joint LP relaxation for small models, per-scenario LPs for large ones.
    #[default]
    Auto,
    Joint,
    PerScenario,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub gap_tol: f64,
    pub time_limit: Option<Duration>,
    /// Recorded in the report. The search itself is deterministic.
    pub seed: u64,
    pub mode: SolveMode,
    pub node_limit: Option<usize>,
    /// Heuristic mode only.
    pub decomposition: Decomposition,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            gap_tol: 1e-6,
            time_limit: None,
            seed: 0,
            mode: SolveMode::Exact,
            node_limit: None,
            decomposition: Decomposition::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    TimedOut,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioCost {
    pub scenario: usize,
    pub weight: f64,
    pub fleet_cost: f64,
    pub penalty_cost: f64,
    pub unserved_units: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub mode: SolveMode,
    pub seed: u64,
    pub plan: DeploymentPlan,
    pub objective: f64,
    pub first_stage_cost: f64,
    pub expected_second_stage_cost: f64,
    pub lower_bound: f64,
    pub optimality_gap: f64,
    pub node_count: usize,
    pub bound_history: Vec<f64>,
    pub scenario_costs: Vec<ScenarioCost>,
    pub routings: Vec<RoutingSolution>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl SolveReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

pub fn solve(model: &ModelInstance, options: &SolveOptions) -> Result<SolveReport, SolveError> {
    match options.mode {
        SolveMode::Exact => solve_exact(model, options),
        SolveMode::Heuristic => solve_heuristic(model, options),
    }
}

fn capacities_from(values: &[f64], vars: &[usize], cap: u32) -> Vec<u32> {
    vars.iter()
        .map(|&c| ((values[c] - 1e-6).ceil().max(0.0) as u32).min(cap))
        .collect()
}

fn solve_exact(model: &ModelInstance, options: &SolveOptions) -> Result<SolveReport, SolveError> {
    let start = Instant::now();
    let lowered = model.lower(true);
    let network = &model.network;
    let truckload = model.econ.truckload;
    let b = model.econ.capacity_cap;

    let mut by_id: Vec<usize> = (0..lowered.capacity.len()).collect();
    by_id.sort_by_key(|&k| &network.node(network.hubs()[k]).id);
    let tie_key = |x: &[f64]| {
        let caps: Vec<i64> = by_id
            .iter()
            .map(|&k| x[lowered.capacity[k]].round() as i64)
            .collect();
        let open = lowered.open.iter().filter(|&&v| x[v] > 0.5).count() as i64;
        let mut key = vec![caps.iter().sum(), open];
        key.extend(caps);
        key
    };
    let heuristic = |lp: &[f64]| -> Option<Vec<f64>> {
        let caps = capacities_from(lp, &lowered.capacity, b);
        let mut x = vec![0.0; lowered.problem.num_vars()];
        for (k, &c) in caps.iter().enumerate() {
            x[lowered.capacity[k]] = c as f64;
            x[lowered.open[k]] = if c > 0 { 1.0 } else { 0.0 };
        }
        let subs: Vec<_> = lowered
            .blocks
            .par_iter()
            .map(|blk| {
                let block = &model.blocks[blk.members[0]];
                second_stage::exact(network, block, &caps, truckload, model.penalty, Some(2_000))
            })
            .collect();
        for (blk, sub) in lowered.blocks.iter().zip(subs) {
            let (_, sub_vars, sub_values) = sub.ok()?;
            if sub_values.is_empty() && sub_vars.flows.iter().any(|f| !f.is_empty()) {
                return None;
            }
            transplant(&blk.vars, &sub_vars, &sub_values, &mut x);
        }
        Some(x)
    };
    let mut bb = BranchAndBound::new(options.gap_tol, options.time_limit)
        .with_root_heuristic(heuristic)
        .with_tie_key(tie_key);
    bb.node_limit = options.node_limit;
    let out = bb.solve(&lowered.problem)?;
    let status = match out.status {
        MilpStatus::Optimal => SolveStatus::Optimal,
        MilpStatus::TimedOut | MilpStatus::NodeLimit => SolveStatus::TimedOut,
    };
    let Some(values) = out.values else {
        return Err(SolveError::TimedOut(None));
    };

    let caps: Vec<u32> = lowered
        .capacity
        .iter()
        .map(|&c| values[c].round() as u32)
        .collect();
    let mut plan = DeploymentPlan::from_capacities(network, &caps);
    for (d, &x) in plan.hubs.iter_mut().zip(&lowered.open) {
        d.open = values[x] > 0.5;
    }
    let block_routings: Vec<RoutingSolution> = lowered
        .blocks
        .par_iter()
        .map(|blk| {
            model::extract_routing(
                network,
                &model.blocks[blk.members[0]],
                &blk.vars,
                &values,
                truckload,
                model.penalty,
            )
        })
        .collect();
    let mut report = assemble(
        model,
        &lowered,
        plan,
        block_routings,
        status,
        options,
        start,
    );
    if report.objective > out.objective + 1e-6 * out.objective.abs().max(1.0) {
        log::warn!(
            "recomputed objective {} exceeds solver objective {}",
            report.objective,
            out.objective
        );
    }
    report.lower_bound = out.bound.min(report.objective);
    report.optimality_gap = relative_gap(report.objective, report.lower_bound);
    report.node_count = out.nodes;
    report.bound_history = out.bound_history;
    if status == SolveStatus::TimedOut {
        return Err(SolveError::TimedOut(Some(Box::new(report))));
    }
    Ok(report)
}

/// Above this many variables in the merged extensive form, heuristic mode
/// decomposes by scenario instead of solving the joint LP relaxation.
const JOINT_LP_VARS: usize = 12_000;

fn solve_heuristic(
    model: &ModelInstance,
    options: &SolveOptions,
) -> Result<SolveReport, SolveError> {
    let start = Instant::now();
    let lowered = model.lower(true);
    let split = match options.decomposition {
        Decomposition::Auto => lowered.problem.num_vars() > JOINT_LP_VARS,
        Decomposition::Joint => false,
        Decomposition::PerScenario => true,
    };
    if split {
        return solve_decomposed(model, &lowered, options, start);
    }
    let network = &model.network;
    let (bound, lp) = if lowered.problem.num_vars() == 0 {
        (0.0, Vec::new())
    } else {
        lowered.problem.solve_relaxation()?
    };
    let caps = capacities_from(&lp, &lowered.capacity, model.econ.capacity_cap);
    let plan = DeploymentPlan::from_capacities(network, &caps);
    let block_routings = lowered
        .blocks
        .par_iter()
        .map(|blk| {
            second_stage::rounded(
                network,
                &model.blocks[blk.members[0]],
                &caps,
                model.econ.truckload,
                model.penalty,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = assemble(
        model,
        &lowered,
        plan,
        block_routings,
        SolveStatus::Heuristic,
        options,
        start,
    );
    report.lower_bound = bound.min(report.objective);
    report.optimality_gap = relative_gap(report.objective, report.lower_bound);
    report.bound_history = vec![report.lower_bound];
    Ok(report)
}

/// Smallest value whose cumulative weight reaches `q`.
fn weighted_quantile(mut values: Vec<(f64, f64)>, q: f64) -> f64 {
    values.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = values.iter().map(|v| v.1).sum();
    let mut acc = 0.0;
    for &(v, w) in &values {
        acc += w;
        if acc >= q * total - 1e-12 {
            return v;
        }
    }
    values.last().map_or(0.0, |v| v.0)
}

/// Heuristic for large models. Each distinct scenario is solved as an LP
/// with its own first stage; the weighted sum of those optima bounds the
/// joint problem from below. Candidate plans take per-hub quantiles of the
/// scenario capacities, are screened with greedy routing, and the best one
/// is routed again with LP guidance.
fn solve_decomposed(
    model: &ModelInstance,
    lowered: &model::Lowered,
    options: &SolveOptions,
    start: Instant,
) -> Result<SolveReport, SolveError> {
    let network = &model.network;
    let econ = &model.econ;
    let b = econ.capacity_cap;
    let per_block = lowered
        .blocks
        .par_iter()
        .map(|blk| {
            let (p, cap_vars) = model.single_scenario(blk.members[0]);
            let (obj, x) = p.solve_relaxation()?;
            Ok((obj, cap_vars.iter().map(|&v| x[v]).collect::<Vec<f64>>()))
        })
        .collect::<Result<Vec<_>, SolveError>>()?;
    let bound: f64 = lowered
        .blocks
        .iter()
        .zip(&per_block)
        .map(|(blk, (obj, _))| blk.weight * obj)
        .sum();

    let hubs = network.hubs().len();
    let mut candidates: Vec<Vec<u32>> = Vec::new();
    for q in [0.5, 0.7, 0.8, 0.9, 1.0] {
        let caps: Vec<u32> = (0..hubs)
            .map(|k| {
                let vals = lowered
                    .blocks
                    .iter()
                    .zip(&per_block)
                    .map(|(blk, (_, c))| (c[k], blk.weight))
                    .collect();
                ((weighted_quantile(vals, q) - 1e-6).ceil().max(0.0) as u32).min(b)
            })
            .collect();
        if !candidates.contains(&caps) {
            candidates.push(caps);
        }
    }
    let route_all = |caps: &[u32], guided: bool| {
        lowered
            .blocks
            .par_iter()
            .map(|blk| {
                let block = &model.blocks[blk.members[0]];
                if guided {
                    second_stage::rounded(network, block, caps, econ.truckload, model.penalty)
                } else {
                    second_stage::greedy(network, block, caps, econ.truckload, model.penalty)
                }
            })
            .collect::<Result<Vec<_>, _>>()
    };
    let evaluate = |caps: &[u32]| -> Result<Option<(f64, Vec<RoutingSolution>)>, SolveError> {
        let routings = match route_all(caps, false) {
            Ok(r) => r,
            Err(SolveError::Infeasible) => return Ok(None),
            Err(e) => return Err(e),
        };
        let plan = DeploymentPlan::from_capacities(network, caps);
        let cost = plan.first_stage_cost(econ)
            + lowered
                .blocks
                .iter()
                .zip(&routings)
                .map(|(blk, r)| blk.weight * r.total_cost())
                .sum::<f64>();
        Ok(Some((cost, routings)))
    };
    let out_of_time = || options.time_limit.is_some_and(|t| start.elapsed() >= t);
    let mut best: Option<(f64, Vec<u32>, Vec<RoutingSolution>)> = None;
    for caps in candidates {
        if let Some((cost, routings)) = evaluate(&caps)? {
            if best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
                best = Some((cost, caps, routings));
            }
        }
    }
    let (mut best_cost, mut caps, mut routings) = best.ok_or(SolveError::Infeasible)?;

    // coordinate descent on single hubs, coarse steps first
    for step in [4u32, 1] {
        let mut improved = true;
        let mut passes = 0;
        while improved && passes < 3 && !out_of_time() {
            improved = false;
            passes += 1;
            for k in 0..hubs {
                for up in [false, true] {
                    let c = caps[k];
                    let next = if up {
                        (c + step).min(b)
                    } else {
                        c.saturating_sub(step)
                    };
                    if next == c {
                        continue;
                    }
                    let mut trial = caps.clone();
                    trial[k] = next;
                    if let Some((cost, r)) = evaluate(&trial)? {
                        if cost < best_cost - 1e-9 {
                            (best_cost, caps, routings) = (cost, trial, r);
                            improved = true;
                        }
                    }
                }
            }
        }
    }
    if !out_of_time() {
        if let Ok(guided) = route_all(&caps, true) {
            for (r, g) in routings.iter_mut().zip(guided) {
                if g.total_cost() < r.total_cost() {
                    *r = g;
                }
            }
        }
    }
    let plan = DeploymentPlan::from_capacities(network, &caps);
    let mut report = assemble(
        model,
        lowered,
        plan,
        routings,
        SolveStatus::Heuristic,
        options,
        start,
    );
    report.lower_bound = bound.min(report.objective);
    report.optimality_gap = relative_gap(report.objective, report.lower_bound);
    report.bound_history = vec![report.lower_bound];
    Ok(report)
}

/// Copies a second-stage solution into the matching variables of a block of
/// the extensive form; keys are (origin, arc) for flows, arcs for trucks and
/// commodity positions for slack.
fn transplant(target: &model::BlockVars, source: &model::BlockVars, values: &[f64], x: &mut [f64]) {
    use std::collections::BTreeMap;
    let mut flow = BTreeMap::new();
    for (g, fv) in source.groups.iter().zip(&source.flows) {
        for &(a, v) in fv {
            flow.insert((g.origin, a), values[v]);
        }
    }
    for (g, fv) in target.groups.iter().zip(&target.flows) {
        for &(a, v) in fv {
            x[v] = flow.get(&(g.origin, a)).copied().unwrap_or(0.0);
        }
    }
    let trucks: BTreeMap<usize, f64> = source.trucks.iter().map(|&(a, v)| (a, values[v])).collect();
    for &(a, v) in &target.trucks {
        x[v] = trucks.get(&a).copied().unwrap_or(0.0);
    }
    for (t, s) in target.slack.iter().zip(&source.slack) {
        if let (Some(t), Some(s)) = (t, s) {
            x[*t] = values[*s];
        }
    }
}

fn assemble(
    model: &ModelInstance,
    lowered: &model::Lowered,
    plan: DeploymentPlan,
    block_routings: Vec<RoutingSolution>,
    status: SolveStatus,
    options: &SolveOptions,
    start: Instant,
) -> SolveReport {
    let n = model.blocks.len();
    let mut routings = vec![RoutingSolution::default(); n];
    let mut scenario_costs = Vec::with_capacity(n);
    let mut expected = 0.0;
    for (blk, routing) in lowered.blocks.iter().zip(block_routings) {
        expected += blk.weight * routing.total_cost();
        for &i in &blk.members {
            routings[i] = routing.clone();
        }
    }
    for (i, r) in routings.iter().enumerate() {
        scenario_costs.push(ScenarioCost {
            scenario: i,
            weight: model.weights[i],
            fleet_cost: r.fleet_cost,
            penalty_cost: r.penalty_cost,
            unserved_units: r.unserved_units(),
        });
    }
    let first_stage_cost = plan.first_stage_cost(&model.econ);
    SolveReport {
        status,
        mode: options.mode,
        seed: options.seed,
        objective: first_stage_cost + expected,
        first_stage_cost,
        expected_second_stage_cost: expected,
        plan,
        lower_bound: f64::NEG_INFINITY,
        optimality_gap: 0.0,
        node_count: 0,
        bound_history: Vec::new(),
        scenario_costs,
        routings,
        wall_time: start.elapsed(),
    }
}
