use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use super::truck_count;
use crate::network::Network;
use crate::scenario::OdPair;

/// Units of one commodity sent along one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutedPath {
    pub pair: OdPair,
    pub arcs: Vec<String>,
    pub units: u64,
    /// Path travel time in the scenario, hours.
    pub travel_time_hours: f64,
}

/// Second-stage decisions for one scenario.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RoutingSolution {
    /// F_o^d(a): per pair, units on each arc (by arc id).
    pub flows: BTreeMap<OdPair, BTreeMap<String, u64>>,
    /// Tr(a): trucks on each used arc.
    pub trucks: BTreeMap<String, u64>,
    /// Demand that could not be routed.
    pub unserved: BTreeMap<OdPair, u64>,
    pub paths: Vec<RoutedPath>,
    pub fleet_cost: f64,
    pub penalty_cost: f64,
}

impl RoutingSolution {
    /// Builds flows, minimal truck counts and costs from routed paths.
    /// `times` are the scenario arc travel times.
    pub(crate) fn from_paths(
        network: &Network,
        times: &[f64],
        truckload: u32,
        paths: Vec<(OdPair, Vec<usize>, u64)>,
        unserved: BTreeMap<OdPair, u64>,
        penalty: f64,
    ) -> Self {
        let mut flows: BTreeMap<OdPair, BTreeMap<String, u64>> = BTreeMap::new();
        let mut load = vec![0u64; network.arcs().len()];
        let mut routed = Vec::with_capacity(paths.len());
        for (pair, arcs, units) in paths {
            if units == 0 {
                continue;
            }
            let per_pair = flows.entry(pair.clone()).or_default();
            for &a in &arcs {
                *per_pair.entry(network.arc(a).id.clone()).or_default() += units;
                load[a] += units;
            }
            routed.push(RoutedPath {
                pair,
                travel_time_hours: arcs.iter().map(|&a| times[a]).sum(),
                arcs: arcs.iter().map(|&a| network.arc(a).id.clone()).collect(),
                units,
            });
        }
        let mut trucks = BTreeMap::new();
        let mut fleet_cost = 0.0;
        for (a, &l) in load.iter().enumerate() {
            if l > 0 {
                let tr = truck_count(l, truckload);
                let arc = network.arc(a);
                fleet_cost += arc.fleet_cost_rate * times[a] * tr as f64;
                trucks.insert(arc.id.clone(), tr);
            }
        }
        let unserved: BTreeMap<OdPair, u64> =
            unserved.into_iter().filter(|(_, u)| *u > 0).collect();
        let penalty_cost = penalty * unserved.values().sum::<u64>() as f64;
        RoutingSolution {
            flows,
            trucks,
            unserved,
            paths: routed,
            fleet_cost,
            penalty_cost,
        }
    }

    pub fn total_cost(&self) -> f64 {
        self.fleet_cost + self.penalty_cost
    }

    pub fn unserved_units(&self) -> u64 {
        self.unserved.values().sum()
    }

    pub fn routed_units(&self) -> u64 {
        self.paths.iter().map(|p| p.units).sum()
    }

    /// Total units on each arc.
    pub fn arc_loads(&self) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for per_pair in self.flows.values() {
            for (a, &f) in per_pair {
                *out.entry(a.clone()).or_default() += f;
            }
        }
        out
    }
}

/// Splits one origin's arc flows into paths towards its destinations.
///
/// `need` lists (commodity, destination node, units delivered). Paths are
/// peeled off fastest-first (Dijkstra on scenario travel time over arcs that
/// still carry flow); each takes the bottleneck of residual flow and the
/// destination's remaining need. Returns (commodity, arc list, amount).
pub(crate) fn decompose_origin_flow(
    network: &Network,
    times: &[f64],
    origin: usize,
    arc_flow: &BTreeMap<usize, f64>,
    need: &[(usize, usize, f64)],
    eps: f64,
) -> Vec<(usize, Vec<usize>, f64)> {
    let mut residual = arc_flow.clone();
    let mut remaining: Vec<f64> = need.iter().map(|n| n.2).collect();
    let mut out = Vec::new();
    let n = network.nodes().len();
    loop {
        if remaining.iter().all(|&r| r <= eps) {
            break;
        }
        // Dijkstra from the origin over arcs with residual flow
        let mut dist = vec![f64::INFINITY; n];
        let mut pred: Vec<Option<usize>> = vec![None; n];
        let mut heap = BinaryHeap::new();
        dist[origin] = 0.0;
        heap.push(Reverse((OrderedFloat(0.0), origin)));
        let mut target = None;
        while let Some(Reverse((OrderedFloat(d), i))) = heap.pop() {
            if d > dist[i] {
                continue;
            }
            if let Some(k) = need.iter().position(|&(_, dest, _)| dest == i) {
                if remaining[k] > eps {
                    target = Some(k);
                    break;
                }
            }
            if i != origin && !network.is_hub(i) {
                continue;
            }
            for &a in network.out_arcs(i) {
                if residual.get(&a).copied().unwrap_or(0.0) <= eps {
                    continue;
                }
                let j = network.arc(a).head;
                let nd = d + times[a];
                if nd < dist[j] {
                    dist[j] = nd;
                    pred[j] = Some(a);
                    heap.push(Reverse((OrderedFloat(nd), j)));
                }
            }
        }
        let Some(k) = target else { break };
        let mut arcs = Vec::new();
        let mut at = need[k].1;
        while at != origin {
            let a = pred[at].expect("predecessor on shortest-path tree");
            arcs.push(a);
            at = network.arc(a).tail;
        }
        arcs.reverse();
        let amount = arcs
            .iter()
            .map(|a| residual[a])
            .fold(remaining[k], f64::min);
        for a in &arcs {
            *residual.get_mut(a).unwrap() -= amount;
        }
        remaining[k] -= amount;
        out.push((need[k].0, arcs, amount));
    }
    out
}

/// Cheapest path from `from` to `to` whose interior nodes are hubs accepted
/// by `hub_ok`. `cost` returns `None` for arcs that cannot be used.
pub(crate) fn cheapest_path(
    network: &Network,
    from: usize,
    to: usize,
    hub_ok: &dyn Fn(usize) -> bool,
    cost: impl Fn(usize) -> Option<f64>,
) -> Option<(f64, Vec<usize>)> {
    let n = network.nodes().len();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    dist[from] = 0.0;
    heap.push(Reverse((OrderedFloat(0.0), from)));
    while let Some(Reverse((OrderedFloat(d), i))) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        if i == to {
            let mut arcs = Vec::new();
            let mut at = to;
            while at != from {
                let a = pred[at]?;
                arcs.push(a);
                at = network.arc(a).tail;
            }
            arcs.reverse();
            return Some((d, arcs));
        }
        if i != from && !(network.is_hub(i) && hub_ok(i)) {
            continue;
        }
        for &a in network.out_arcs(i) {
            let j = network.arc(a).head;
            if j == from || (j != to && !network.is_hub(j)) {
                continue;
            }
            let Some(c) = cost(a) else { continue };
            let nd = d + c;
            if nd < dist[j] {
                dist[j] = nd;
                pred[j] = Some(a);
                heap.push(Reverse((OrderedFloat(nd), j)));
            }
        }
    }
    None
}
