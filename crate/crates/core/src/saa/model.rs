use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::routing::{cheapest_path, decompose_origin_flow, RoutingSolution};
use super::{Overflow, SolveError};
use crate::economics::{HubCost, HubEconomics};
use crate::milp::{MilpProblem, RowOp};
use crate::network::{Network, DEFAULT_DELAY_MULTIPLIER};
use crate::scenario::{OdPair, Scenario, ScenarioSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOptions {
    pub overflow: Overflow,
    /// Travel-time factor on arcs touching a disrupted hub.
    pub delay_multiplier: f64,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            overflow: Overflow::Auto,
            delay_multiplier: DEFAULT_DELAY_MULTIPLIER,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Commodity {
    pub pair: OdPair,
    pub origin: usize,
    pub destination: usize,
    pub demand: u64,
}

/// One scenario resolved against the network.
#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub commodities: Vec<Commodity>,
    pub times: Vec<f64>,
}

/// Commodities sharing an origin, with the arcs any of them may use.
#[derive(Debug, Clone)]
pub(crate) struct Group {
    pub origin: usize,
    pub commodities: Vec<usize>,
    pub arcs: Vec<usize>,
    pub supply: u64,
}

/// Variable indices of one scenario block inside a [`MilpProblem`].
#[derive(Debug, Clone, Default)]
pub(crate) struct BlockVars {
    pub groups: Vec<Group>,
    /// Per group: (arc, variable).
    pub flows: Vec<Vec<(usize, usize)>>,
    pub trucks: Vec<(usize, usize)>,
    /// Per commodity.
    pub slack: Vec<Option<usize>>,
}

pub(crate) enum Capacity<'c> {
    Vars(&'c [usize]),
    Fixed(&'c [u32]),
}

#[derive(Debug, Clone)]
pub(crate) struct LoweredBlock {
    /// Indices of the input scenarios this block stands for.
    pub members: Vec<usize>,
    pub weight: f64,
    pub vars: BlockVars,
}

#[derive(Debug, Clone)]
pub(crate) struct Lowered {
    pub problem: MilpProblem,
    pub open: Vec<usize>,
    pub capacity: Vec<usize>,
    pub blocks: Vec<LoweredBlock>,
}

/// Size of the full (unmerged) extensive form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct ModelStats {
    pub open_vars: usize,
    pub capacity_vars: usize,
    pub flow_vars: usize,
    pub truck_vars: usize,
    pub slack_vars: usize,
    pub rows: usize,
    pub scenario_blocks: usize,
}

/// The SAA extensive form: network, economics, resolved scenarios and the
/// overflow policy.
#[derive(Debug, Clone)]
pub struct ModelInstance {
    pub(crate) network: Network,
    pub(crate) econ: HubEconomics,
    pub(crate) hub_costs: Vec<HubCost>,
    pub(crate) scenarios: ScenarioSet,
    pub(crate) blocks: Vec<Block>,
    pub(crate) weights: Vec<f64>,
    pub(crate) penalty: Option<f64>,
    pub(crate) delay_multiplier: f64,
}

pub fn build_extensive_form(
    network: &Network,
    econ: &HubEconomics,
    scenarios: &ScenarioSet,
    options: &ModelOptions,
) -> Result<ModelInstance, SolveError> {
    scenarios
        .validate()
        .map_err(|e| SolveError::InvalidScenarios(e.to_string()))?;
    let hub_costs = econ.aligned(network)?;
    let pairs = scenarios.pairs();
    check_reachable(network, &pairs)?;
    let penalty = resolve_overflow(network, &pairs, options.overflow);
    let blocks = scenarios
        .scenarios
        .iter()
        .map(|s| resolve_block(network, s, options.delay_multiplier))
        .collect::<Result<Vec<_>, _>>()?;
    let total = scenarios.total_weight();
    let weights = scenarios
        .scenarios
        .iter()
        .map(|s| s.weight / total)
        .collect();
    Ok(ModelInstance {
        network: network.clone(),
        econ: econ.clone(),
        hub_costs,
        scenarios: scenarios.clone(),
        blocks,
        weights,
        penalty,
        delay_multiplier: options.delay_multiplier,
    })
}

/// Every pair needs a path whose interior nodes are hubs.
pub(crate) fn check_reachable<'p>(
    network: &Network,
    pairs: impl IntoIterator<Item = &'p OdPair>,
) -> Result<(), SolveError> {
    let mut missing = Vec::new();
    for pair in pairs {
        let o = network
            .node_index(&pair.origin)
            .ok_or_else(|| SolveError::UnknownNode(pair.origin.clone()))?;
        let d = network
            .node_index(&pair.destination)
            .ok_or_else(|| SolveError::UnknownNode(pair.destination.clone()))?;
        if !network.has_relay_path(o, d) {
            missing.push(pair.clone());
        }
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(SolveError::UnreachableDemand(missing))
    }
}

/// Ten times the costliest cheapest relay path (one truck, base travel
/// times) over the given pairs, floored at 10.
pub fn default_overflow_penalty<'p>(
    network: &Network,
    pairs: impl IntoIterator<Item = &'p OdPair>,
) -> f64 {
    let mut worst: f64 = 1.0;
    for pair in pairs {
        let (Some(o), Some(d)) = (
            network.node_index(&pair.origin),
            network.node_index(&pair.destination),
        ) else {
            continue;
        };
        let cost = |a: usize| {
            let arc = network.arc(a);
            Some(arc.fleet_cost_rate * arc.base_travel_time)
        };
        if let Some((c, _)) = cheapest_path(network, o, d, &|_| true, cost) {
            worst = worst.max(c);
        }
    }
    10.0 * worst
}

pub(crate) fn resolve_overflow(
    network: &Network,
    pairs: &BTreeSet<OdPair>,
    overflow: Overflow,
) -> Option<f64> {
    match overflow {
        Overflow::Auto => Some(default_overflow_penalty(network, pairs)),
        Overflow::Penalty(p) => Some(p),
        Overflow::Disabled => None,
    }
}

pub(crate) fn resolve_block(
    network: &Network,
    s: &Scenario,
    delay_multiplier: f64,
) -> Result<Block, SolveError> {
    let disrupted = network
        .disruption_mask(s.disrupted_hubs.iter().map(String::as_str))
        .map_err(|e| SolveError::InvalidScenarios(e.to_string()))?;
    let mut commodities = Vec::new();
    for (pair, &q) in &s.demand {
        if q == 0 {
            continue;
        }
        let origin = network
            .node_index(&pair.origin)
            .ok_or_else(|| SolveError::UnknownNode(pair.origin.clone()))?;
        let destination = network
            .node_index(&pair.destination)
            .ok_or_else(|| SolveError::UnknownNode(pair.destination.clone()))?;
        commodities.push(Commodity {
            pair: pair.clone(),
            origin,
            destination,
            demand: q,
        });
    }
    let times = network.scenario_travel_times(&disrupted, delay_multiplier);
    Ok(Block { commodities, times })
}

/// Groups a block's commodities by origin and finds the arcs each group can
/// use: tails are the origin or a usable hub, heads are usable hubs or the
/// group's destinations, and every arc lies on some origin-destination path.
pub(crate) fn groups(network: &Network, block: &Block, usable_hub: &[bool]) -> Vec<Group> {
    let mut by_origin: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, c) in block.commodities.iter().enumerate() {
        by_origin.entry(c.origin).or_default().push(k);
    }
    let n = network.nodes().len();
    let hub = |i: usize| network.is_hub(i) && usable_hub[i];
    by_origin
        .into_iter()
        .map(|(origin, commodities)| {
            let mut dest = vec![false; n];
            for &k in &commodities {
                dest[block.commodities[k].destination] = true;
            }
            let mut fwd = vec![false; n];
            let mut queue = VecDeque::from([origin]);
            fwd[origin] = true;
            while let Some(i) = queue.pop_front() {
                for &a in network.out_arcs(i) {
                    let j = network.arc(a).head;
                    if fwd[j] || j == origin {
                        continue;
                    }
                    if hub(j) {
                        fwd[j] = true;
                        queue.push_back(j);
                    } else if dest[j] {
                        fwd[j] = true;
                    }
                }
            }
            let mut bwd = vec![false; n];
            let mut queue: VecDeque<usize> = (0..n).filter(|&j| dest[j]).collect();
            for &j in &queue {
                bwd[j] = true;
            }
            while let Some(j) = queue.pop_front() {
                for &a in network.in_arcs(j) {
                    let i = network.arc(a).tail;
                    if bwd[i] {
                        continue;
                    }
                    if hub(i) {
                        bwd[i] = true;
                        queue.push_back(i);
                    } else if i == origin {
                        bwd[i] = true;
                    }
                }
            }
            let arcs = network
                .arcs()
                .iter()
                .enumerate()
                .filter(|(_, arc)| {
                    let (t, h) = (arc.tail, arc.head);
                    (t == origin || hub(t))
                        && (dest[h] || hub(h))
                        && h != origin
                        && fwd[t]
                        && bwd[h]
                })
                .map(|(a, _)| a)
                .collect();
            let supply = commodities
                .iter()
                .map(|&k| block.commodities[k].demand)
                .sum();
            Group {
                origin,
                commodities,
                arcs,
                supply,
            }
        })
        .collect()
}

fn var_name(network: &Network, prefix: &str, tag: &str, parts: &[usize]) -> String {
    let mut s = if tag.is_empty() {
        prefix.to_string()
    } else {
        format!("{prefix}_{tag}")
    };
    for &i in parts {
        s.push('_');
        s.push_str(&network.node(i).id);
    }
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Adds one scenario block to `p`. Objective terms are scaled by `weight`.
pub(crate) fn add_block(
    p: &mut MilpProblem,
    network: &Network,
    block: &Block,
    weight: f64,
    truckload: u32,
    penalty: Option<f64>,
    capacity: Capacity<'_>,
    tag: &str,
) -> BlockVars {
    let hubs = network.hubs();
    let mut hub_pos = vec![None; network.nodes().len()];
    for (k, &h) in hubs.iter().enumerate() {
        hub_pos[h] = Some(k);
    }
    let usable: Vec<bool> = (0..network.nodes().len())
        .map(|i| match (&capacity, hub_pos[i]) {
            (Capacity::Fixed(caps), Some(k)) => caps[k] > 0,
            _ => true,
        })
        .collect();
    let groups = groups(network, block, &usable);
    let m = truckload as f64;

    let mut flows = Vec::with_capacity(groups.len());
    let mut on_arc: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut arc_supply: BTreeMap<usize, u64> = BTreeMap::new();
    for g in &groups {
        let mut vars = Vec::with_capacity(g.arcs.len());
        for &a in &g.arcs {
            let arc = network.arc(a);
            let name = var_name(network, "F", tag, &[g.origin, arc.tail, arc.head]);
            let v = p.add_integer(name, 0.0, 0.0, g.supply as f64, 3);
            vars.push((a, v));
            on_arc.entry(a).or_default().push(v);
            *arc_supply.entry(a).or_default() += g.supply;
        }
        flows.push(vars);
    }
    let mut trucks = Vec::with_capacity(on_arc.len());
    for (&a, fv) in &on_arc {
        let arc = network.arc(a);
        let cost = weight * arc.fleet_cost_rate * block.times[a];
        let hi = arc_supply[&a].div_ceil(truckload as u64) as f64;
        let v = p.add_integer(
            var_name(network, "Tr", tag, &[arc.tail, arc.head]),
            cost,
            0.0,
            hi,
            2,
        );
        trucks.push((a, v));
        let mut terms: Vec<(usize, f64)> = fv.iter().map(|&f| (f, 1.0)).collect();
        terms.push((v, -m));
        p.add_row(
            var_name(network, "fleet", tag, &[arc.tail, arc.head]),
            terms,
            RowOp::Le,
            0.0,
        );
    }
    let mut slack = vec![None; block.commodities.len()];
    if let Some(pen) = penalty {
        for (k, c) in block.commodities.iter().enumerate() {
            let name = var_name(network, "U", tag, &[c.origin, c.destination]);
            slack[k] = Some(p.add_continuous(name, weight * pen, 0.0, c.demand as f64));
        }
    }

    for (g, vars) in groups.iter().zip(&flows) {
        let flow_of: BTreeMap<usize, usize> = vars.iter().copied().collect();
        for &k in &g.commodities {
            let c = &block.commodities[k];
            let mut terms: Vec<(usize, f64)> = network
                .in_arcs(c.destination)
                .iter()
                .filter_map(|a| flow_of.get(a).map(|&v| (v, 1.0)))
                .collect();
            if let Some(u) = slack[k] {
                terms.push((u, 1.0));
            }
            let name = var_name(network, "dest", tag, &[c.origin, c.destination]);
            p.add_row(name, terms, RowOp::Eq, c.demand as f64);
        }
        for &h in hubs {
            let mut terms: Vec<(usize, f64)> = Vec::new();
            for a in network.out_arcs(h) {
                if let Some(&v) = flow_of.get(a) {
                    terms.push((v, 1.0));
                }
            }
            for a in network.in_arcs(h) {
                if let Some(&v) = flow_of.get(a) {
                    terms.push((v, -1.0));
                }
            }
            if !terms.is_empty() {
                p.add_row(
                    var_name(network, "hub", tag, &[g.origin, h]),
                    terms,
                    RowOp::Eq,
                    0.0,
                );
            }
        }
    }
    for (k, &h) in hubs.iter().enumerate() {
        let mut terms: Vec<(usize, f64)> = network
            .in_arcs(h)
            .iter()
            .filter_map(|a| on_arc.get(a))
            .flatten()
            .map(|&v| (v, 1.0))
            .collect();
        if terms.is_empty() {
            continue;
        }
        let name = var_name(network, "cap", tag, &[h]);
        match capacity {
            Capacity::Vars(c) => {
                terms.push((c[k], -1.0));
                p.add_row(name, terms, RowOp::Le, 0.0);
            }
            Capacity::Fixed(c) => p.add_row(name, terms, RowOp::Le, c[k] as f64),
        }
    }
    BlockVars {
        groups,
        flows,
        trucks,
        slack,
    }
}

/// Reads a block's routing out of a solution vector: rounds flows, decomposes
/// them into fastest-first paths, and recomputes minimal truck counts.
pub(crate) fn extract_routing(
    network: &Network,
    block: &Block,
    vars: &BlockVars,
    values: &[f64],
    truckload: u32,
    penalty: Option<f64>,
) -> RoutingSolution {
    let mut paths = Vec::new();
    let mut unserved: BTreeMap<OdPair, u64> = BTreeMap::new();
    for (g, fv) in vars.groups.iter().zip(&vars.flows) {
        let arc_flow: BTreeMap<usize, f64> = fv
            .iter()
            .map(|&(a, v)| (a, values[v].round().max(0.0)))
            .filter(|&(_, f)| f > 0.0)
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
        let mut routed = vec![0u64; block.commodities.len()];
        for (k, arcs, amount) in
            decompose_origin_flow(network, &block.times, g.origin, &arc_flow, &need, 0.5)
        {
            let units = amount.round() as u64;
            routed[k] += units;
            paths.push((block.commodities[k].pair.clone(), arcs, units));
        }
        for &k in &g.commodities {
            let c = &block.commodities[k];
            unserved.insert(c.pair.clone(), c.demand.saturating_sub(routed[k]));
        }
    }
    RoutingSolution::from_paths(
        network,
        &block.times,
        truckload,
        paths,
        unserved,
        penalty.unwrap_or(0.0),
    )
}

impl ModelInstance {
    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn economics(&self) -> &HubEconomics {
        &self.econ
    }

    pub fn scenarios(&self) -> &ScenarioSet {
        &self.scenarios
    }

    /// Per-unit overflow penalty, `None` when overflow is disabled.
    pub fn overflow_penalty(&self) -> Option<f64> {
        self.penalty
    }

    pub fn delay_multiplier(&self) -> f64 {
        self.delay_multiplier
    }

    /// Normalized scenario weights (summing to one).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Lowers the model. With `merge`, scenarios with identical demand and
    /// disruption share one block whose weight is the sum of theirs.
    fn add_first_stage(&self, p: &mut MilpProblem) -> (Vec<usize>, Vec<usize>) {
        let b = self.econ.capacity_cap as f64;
        let mut open = Vec::new();
        let mut capacity = Vec::new();
        for (k, &h) in self.network.hubs().iter().enumerate() {
            let id = &self.network.node(h).id;
            let cost = self.hub_costs[k];
            let x = p.add_integer(
                var_name(&self.network, "X", "", &[h]),
                cost.fixed_cost,
                0.0,
                1.0,
                0,
            );
            let c = p.add_integer(
                var_name(&self.network, "C", "", &[h]),
                cost.unit_capacity_cost,
                0.0,
                b,
                1,
            );
            p.add_row(
                format!("link_{}", sanitize(id)),
                vec![(c, 1.0), (x, -b)],
                RowOp::Le,
                0.0,
            );
            open.push(x);
            capacity.push(c);
        }
        (open, capacity)
    }

    /// Scenario `i` alone with its own first stage, at weight one. Returns
    /// the problem and the capacity variables in hub order.
    pub(crate) fn single_scenario(&self, i: usize) -> (MilpProblem, Vec<usize>) {
        let mut p = MilpProblem::new();
        let (_, capacity) = self.add_first_stage(&mut p);
        add_block(
            &mut p,
            &self.network,
            &self.blocks[i],
            1.0,
            self.econ.truckload,
            self.penalty,
            Capacity::Vars(&capacity),
            "w0",
        );
        (p, capacity)
    }

    pub(crate) fn lower(&self, merge: bool) -> Lowered {
        let mut p = MilpProblem::new();
        let (open, capacity) = self.add_first_stage(&mut p);

        let mut members: Vec<Vec<usize>> = Vec::new();
        if merge {
            let mut seen: BTreeMap<(Vec<(OdPair, u64)>, Vec<String>), usize> = BTreeMap::new();
            for (i, s) in self.scenarios.scenarios.iter().enumerate() {
                let key = (
                    s.demand
                        .iter()
                        .filter(|(_, &q)| q > 0)
                        .map(|(p, &q)| (p.clone(), q))
                        .collect(),
                    s.disrupted_hubs.iter().cloned().collect(),
                );
                match seen.get(&key) {
                    Some(&j) => members[j].push(i),
                    None => {
                        seen.insert(key, members.len());
                        members.push(vec![i]);
                    }
                }
            }
        } else {
            members = (0..self.blocks.len()).map(|i| vec![i]).collect();
        }
        let n = self.weights.len();
        let uniform = self.weights.windows(2).all(|w| w[0] == w[1]);
        let blocks = members
            .into_iter()
            .enumerate()
            .map(|(j, m)| {
                let weight = if uniform {
                    m.len() as f64 / n as f64
                } else {
                    m.iter().map(|&i| self.weights[i]).sum()
                };
                let vars = add_block(
                    &mut p,
                    &self.network,
                    &self.blocks[m[0]],
                    weight,
                    self.econ.truckload,
                    self.penalty,
                    Capacity::Vars(&capacity),
                    &format!("w{j}"),
                );
                LoweredBlock {
                    members: m,
                    weight,
                    vars,
                }
            })
            .collect();
        Lowered {
            problem: p,
            open,
            capacity,
            blocks,
        }
    }

    pub fn stats(&self) -> ModelStats {
        let lowered = self.lower(false);
        let mut s = ModelStats {
            open_vars: lowered.open.len(),
            capacity_vars: lowered.capacity.len(),
            flow_vars: 0,
            truck_vars: 0,
            slack_vars: 0,
            rows: lowered.problem.num_rows(),
            scenario_blocks: lowered.blocks.len(),
        };
        for b in &lowered.blocks {
            s.flow_vars += b.vars.flows.iter().map(Vec::len).sum::<usize>();
            s.truck_vars += b.vars.trucks.len();
            s.slack_vars += b.vars.slack.iter().flatten().count();
        }
        s
    }

    /// The full extensive form in LP file format.
    pub fn to_lp(&self) -> String {
        self.lower(false).problem.to_lp_format()
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
