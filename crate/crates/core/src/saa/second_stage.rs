use std::collections::BTreeMap;

use super::model::{
    add_block, extract_routing, resolve_block, resolve_overflow, Block, BlockVars, Capacity,
};
use super::routing::{cheapest_path, decompose_origin_flow, RoutingSolution};
use super::{truck_count, DeploymentPlan, Overflow, SolveError};
use crate::economics::HubEconomics;
use crate::milp::{BranchAndBound, MilpError, MilpProblem};
use crate::network::{Network, DEFAULT_DELAY_MULTIPLIER};
use crate::scenario::{OdPair, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondStageMethod {
    /// Branch-and-bound on the routing MILP.
    Exact,
    /// LP relaxation, floored path decomposition, then greedy routing of the
    /// remainder.
    Rounded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondStageOptions {
    pub overflow: Overflow,
    pub delay_multiplier: f64,
    pub method: SecondStageMethod,
    /// Branch-and-bound node budget for [`SecondStageMethod::Exact`]; the
    /// best routing found so far is kept when it runs out.
    pub node_limit: Option<usize>,
}

impl Default for SecondStageOptions {
    fn default() -> Self {
        SecondStageOptions {
            overflow: Overflow::Auto,
            delay_multiplier: DEFAULT_DELAY_MULTIPLIER,
            method: SecondStageMethod::Exact,
            node_limit: Some(20_000),
        }
    }
}

/// Minimum-cost routing of one scenario with hub capacities fixed by `plan`.
pub fn solve_second_stage(
    plan: &DeploymentPlan,
    network: &Network,
    econ: &HubEconomics,
    scenario: &Scenario,
    options: &SecondStageOptions,
) -> Result<RoutingSolution, SolveError> {
    plan.validate(econ)?;
    let caps = plan.aligned_capacities(network)?;
    let block = resolve_block(network, scenario, options.delay_multiplier)?;
    let pairs = scenario.demand.keys().cloned().collect();
    let penalty = resolve_overflow(network, &pairs, options.overflow);
    match options.method {
        SecondStageMethod::Exact => exact(
            network,
            &block,
            &caps,
            econ.truckload,
            penalty,
            options.node_limit,
        )
        .map(|(r, _, _)| r),
        SecondStageMethod::Rounded => rounded(network, &block, &caps, econ.truckload, penalty),
    }
}

/// Exact second stage; also returns the sub-model variables and values so
/// callers can transplant them into a larger model.
pub(crate) fn exact(
    network: &Network,
    block: &Block,
    caps: &[u32],
    truckload: u32,
    penalty: Option<f64>,
    node_limit: Option<usize>,
) -> Result<(RoutingSolution, BlockVars, Vec<f64>), SolveError> {
    let mut p = MilpProblem::new();
    let vars = add_block(
        &mut p,
        network,
        block,
        1.0,
        truckload,
        penalty,
        Capacity::Fixed(caps),
        "s",
    );
    if p.num_vars() == 0 {
        if penalty.is_none() && !block.commodities.is_empty() {
            return Err(SolveError::Infeasible);
        }
        let values = Vec::new();
        let routing = extract_routing(network, block, &vars, &values, truckload, penalty);
        return Ok((routing, vars, values));
    }
    let mut bb = BranchAndBound::new(1e-9, None);
    bb.node_limit = node_limit;
    let out = match bb.solve(&p) {
        Ok(o) => o,
        Err(MilpError::Infeasible) => return Err(SolveError::Infeasible),
        Err(MilpError::Unbounded) => return Err(SolveError::Unbounded),
    };
    let Some(values) = out.values else {
        // node budget ran out before any integral routing turned up
        let routing = rounded(network, block, caps, truckload, penalty)?;
        let values = Vec::new();
        return Ok((routing, vars, values));
    };
    let routing = extract_routing(network, block, &vars, &values, truckload, penalty);
    Ok((routing, vars, values))
}

/// LP-based rounding for the second stage. Always feasible when overflow is
/// allowed; without overflow, demand it cannot route makes it fail with
/// [`SolveError::Infeasible`] even if an exact method might succeed.
pub(crate) fn rounded(
    network: &Network,
    block: &Block,
    caps: &[u32],
    truckload: u32,
    penalty: Option<f64>,
) -> Result<RoutingSolution, SolveError> {
    route(network, block, caps, truckload, penalty, true)
}

/// The greedy completion alone, without the LP guide. Cheap enough for
/// screening candidate plans on large networks.
pub(crate) fn greedy(
    network: &Network,
    block: &Block,
    caps: &[u32],
    truckload: u32,
    penalty: Option<f64>,
) -> Result<RoutingSolution, SolveError> {
    route(network, block, caps, truckload, penalty, false)
}

fn route(
    network: &Network,
    block: &Block,
    caps: &[u32],
    truckload: u32,
    penalty: Option<f64>,
    guided: bool,
) -> Result<RoutingSolution, SolveError> {
    let m = truckload as u64;
    let mut st = Greedy {
        network,
        block,
        load: vec![0; network.arcs().len()],
        cap_left: vec![0; network.nodes().len()],
        routed: vec![0; block.commodities.len()],
        paths: Vec::new(),
    };
    for (k, &h) in network.hubs().iter().enumerate() {
        st.cap_left[h] = caps[k] as u64;
    }
    if guided {
        lp_guide(&mut st, caps, truckload, penalty)?;
    }

    // greedy completion, cheapest marginal truck cost first
    for (k, c) in block.commodities.iter().enumerate() {
        while st.routed[k] < c.demand {
            let hub_ok = |h: usize| st.cap_left[h] > 0;
            let cost = |a: usize| {
                let spare = truck_count(st.load[a], truckload) * m - st.load[a];
                let arc = network.arc(a);
                Some(if spare > 0 {
                    0.0
                } else {
                    arc.fleet_cost_rate * block.times[a]
                })
            };
            let Some((cost, arcs)) = cheapest_path(network, c.origin, c.destination, &hub_ok, cost)
            else {
                break;
            };
            if penalty.is_some_and(|pen| cost >= pen) {
                break;
            }
            let mut units = c.demand - st.routed[k];
            for &a in &arcs {
                let spare = truck_count(st.load[a], truckload) * m - st.load[a];
                units = units.min(if spare > 0 { spare } else { m });
                let head = network.arc(a).head;
                if network.is_hub(head) {
                    units = units.min(st.cap_left[head]);
                }
            }
            st.take(k, arcs, units);
        }
    }
    let Greedy { routed, paths, .. } = st;

    let unserved: BTreeMap<OdPair, u64> = block
        .commodities
        .iter()
        .enumerate()
        .map(|(k, c)| (c.pair.clone(), c.demand - routed[k]))
        .collect();
    if penalty.is_none() && unserved.values().any(|&u| u > 0) {
        return Err(SolveError::Infeasible);
    }
    let mut merged: BTreeMap<(OdPair, Vec<usize>), u64> = BTreeMap::new();
    for (pair, arcs, units) in paths {
        *merged.entry((pair, arcs)).or_default() += units;
    }
    let paths = merged.into_iter().map(|((p, a), u)| (p, a, u)).collect();
    Ok(RoutingSolution::from_paths(
        network,
        &block.times,
        truckload,
        paths,
        unserved,
        penalty.unwrap_or(0.0),
    ))
}

/// Takes the floored path decomposition of the fixed-capacity LP routing.
fn lp_guide(
    st: &mut Greedy<'_>,
    caps: &[u32],
    truckload: u32,
    penalty: Option<f64>,
) -> Result<(), SolveError> {
    let (network, block) = (st.network, st.block);
    let mut p = MilpProblem::new();
    let vars = add_block(
        &mut p,
        network,
        block,
        1.0,
        truckload,
        penalty,
        Capacity::Fixed(caps),
        "s",
    );
    if p.num_vars() == 0 {
        return Ok(());
    }
    let lp = match p.solve_relaxation() {
        Ok((_, x)) => x,
        Err(MilpError::Infeasible) => return Err(SolveError::Infeasible),
        Err(MilpError::Unbounded) => return Err(SolveError::Unbounded),
    };
    for (g, fv) in vars.groups.iter().zip(&vars.flows) {
        let arc_flow: BTreeMap<usize, f64> = fv
            .iter()
            .map(|&(a, v)| (a, lp[v]))
            .filter(|&(_, f)| f > 1e-9)
            .collect();
        let need: Vec<(usize, usize, f64)> = g
            .commodities
            .iter()
            .map(|&k| {
                let c = &block.commodities[k];
                let inflow: f64 = network
                    .in_arcs(c.destination)
                    .iter()
                    .filter_map(|a| arc_flow.get(a))
                    .sum();
                (k, c.destination, inflow.min(c.demand as f64))
            })
            .collect();
        for (k, arcs, amount) in
            decompose_origin_flow(network, &block.times, g.origin, &arc_flow, &need, 1e-7)
        {
            let units = (amount + 1e-7).floor() as u64;
            let room = arcs
                .iter()
                .map(|&a| network.arc(a).head)
                .filter(|&h| network.is_hub(h))
                .map(|h| st.cap_left[h])
                .min()
                .unwrap_or(u64::MAX);
            let units = units
                .min(room)
                .min(block.commodities[k].demand - st.routed[k]);
            if units > 0 {
                st.take(k, arcs, units);
            }
        }
    }
    Ok(())
}

struct Greedy<'n> {
    network: &'n Network,
    block: &'n Block,
    load: Vec<u64>,
    cap_left: Vec<u64>,
    routed: Vec<u64>,
    paths: Vec<(OdPair, Vec<usize>, u64)>,
}

impl Greedy<'_> {
    fn take(&mut self, k: usize, arcs: Vec<usize>, units: u64) {
        for &a in &arcs {
            self.load[a] += units;
            let head = self.network.arc(a).head;
            if self.network.is_hub(head) {
                self.cap_left[head] -= units;
            }
        }
        self.routed[k] += units;
        self.paths
            .push((self.block.commodities[k].pair.clone(), arcs, units));
    }
}
