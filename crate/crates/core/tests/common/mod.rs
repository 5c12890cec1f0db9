//! Brute-force reference for tiny instances, written without any of the
//! solver's internals: every integral routing is enumerated as a split of
//! each pair's demand over its simple relay paths.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use hubcap::economics::{HubCost, HubEconomics};
use hubcap::network::{
    build_network, CandidateArcs, Network, NetworkConfig, Node, NodeKind, RawArc,
};
use hubcap::scenario::{OdPair, Scenario, ScenarioSet};
use proptest::prelude::*;

#[derive(Debug, Clone)]
pub struct Tiny {
    /// (id, fixed cost f, unit capacity cost s)
    pub hubs: Vec<(String, f64, f64)>,
    pub origins: Vec<String>,
    pub destinations: Vec<String>,
    /// (tail, head, hours, cost per truck-hour)
    pub arcs: Vec<(String, String, f64, f64)>,
    pub truckload: u32,
    pub cap: u32,
    pub multiplier: f64,
    pub penalty: Option<f64>,
    /// Equally weighted scenarios: demand per (origin, destination), disrupted hubs.
    pub scenarios: Vec<(Vec<(String, String, u64)>, Vec<String>)>,
}

impl Tiny {
    /// The worked example: O -> H -> D, one hour per leg, one truck-hour costs 1.
    pub fn chain(demand: u64, truckload: u32) -> Tiny {
        Tiny {
            hubs: vec![("H".into(), 10.0, 1.0)],
            origins: vec!["O".into()],
            destinations: vec!["D".into()],
            arcs: vec![
                ("O".into(), "H".into(), 1.0, 1.0),
                ("H".into(), "D".into(), 1.0, 1.0),
            ],
            truckload,
            cap: 10,
            multiplier: 3.0,
            penalty: Some(100.0),
            scenarios: vec![(vec![("O".into(), "D".into(), demand)], vec![])],
        }
    }

    pub fn network(&self) -> Network {
        let mut nodes = Vec::new();
        for o in &self.origins {
            nodes.push(Node::new(o.clone(), NodeKind::Origin, 0.0, 0.0));
        }
        for (h, _, _) in &self.hubs {
            nodes.push(Node::new(h.clone(), NodeKind::Hub, 0.0, 0.0));
        }
        for d in &self.destinations {
            nodes.push(Node::new(d.clone(), NodeKind::Destination, 0.0, 0.0));
        }
        let arcs = self
            .arcs
            .iter()
            .map(|(t, h, hours, rate)| RawArc::new(t.clone(), h.clone(), *hours, *rate))
            .collect();
        let pairs: BTreeSet<(String, String)> = self
            .scenarios
            .iter()
            .flat_map(|(d, _)| d.iter().map(|(o, dd, _)| (o.clone(), dd.clone())))
            .collect();
        let pairs: Vec<_> = pairs.into_iter().collect();
        build_network(
            nodes,
            CandidateArcs::Directed(arcs),
            NetworkConfig::default(),
            &pairs,
        )
        .unwrap()
    }

    pub fn economics(&self) -> HubEconomics {
        HubEconomics::new(
            self.hubs.iter().map(|(h, f, s)| {
                (
                    h.clone(),
                    HubCost {
                        fixed_cost: *f,
                        unit_capacity_cost: *s,
                        disruption_rate: 0.1,
                    },
                )
            }),
            self.truckload,
            self.cap,
        )
        .unwrap()
    }

    pub fn scenario(&self, i: usize) -> Scenario {
        let (demand, disrupted) = &self.scenarios[i];
        Scenario {
            demand: demand
                .iter()
                .map(|(o, d, q)| (OdPair::new(o.clone(), d.clone()), *q))
                .collect(),
            disrupted_hubs: disrupted.iter().cloned().collect(),
            weight: 1.0 / self.scenarios.len() as f64,
        }
    }

    pub fn scenario_set(&self) -> ScenarioSet {
        ScenarioSet {
            scenarios: (0..self.scenarios.len())
                .map(|i| self.scenario(i))
                .collect(),
        }
    }

    fn is_hub(&self, id: &str) -> bool {
        self.hubs.iter().any(|(h, _, _)| h == id)
    }

    /// Simple paths from `o` to `d` through hubs only, as arc indices.
    fn paths(&self, o: &str, d: &str) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut stack = vec![(o.to_string(), Vec::<usize>::new(), vec![o.to_string()])];
        while let Some((at, path, seen)) = stack.pop() {
            for (k, (t, h, _, _)) in self.arcs.iter().enumerate() {
                if *t != at || seen.contains(h) {
                    continue;
                }
                let mut p = path.clone();
                p.push(k);
                if h == d && !path.is_empty() {
                    out.push(p);
                } else if self.is_hub(h) {
                    let mut s = seen.clone();
                    s.push(h.clone());
                    stack.push((h.clone(), p, s));
                }
            }
        }
        out
    }

    /// Minimum routing cost for scenario `i`, keyed by the inbound load of
    /// each hub.
    pub fn load_table(&self, i: usize) -> BTreeMap<Vec<u64>, f64> {
        let (demand, disrupted) = &self.scenarios[i];
        let times: Vec<f64> = self
            .arcs
            .iter()
            .map(|(t, h, hours, _)| {
                if disrupted.contains(t) || disrupted.contains(h) {
                    hours * self.multiplier
                } else {
                    *hours
                }
            })
            .collect();
        let options: Vec<(Vec<Vec<usize>>, u64)> = demand
            .iter()
            .map(|(o, d, q)| (self.paths(o, d), *q))
            .collect();
        let mut table = BTreeMap::new();
        let mut loads = vec![0u64; self.arcs.len()];
        let first = options.first().map_or(0, |o| o.1);
        self.enumerate(&options, 0, 0, first, &mut loads, 0, &times, &mut table);
        table
    }

    #[allow(clippy::too_many_arguments)]
    fn enumerate(
        &self,
        options: &[(Vec<Vec<usize>>, u64)],
        pair: usize,
        path: usize,
        left: u64,
        loads: &mut Vec<u64>,
        unserved: u64,
        times: &[f64],
        table: &mut BTreeMap<Vec<u64>, f64>,
    ) {
        if pair == options.len() {
            let m = self.truckload as u64;
            let mut cost = 0.0;
            for (k, (_, _, _, rate)) in self.arcs.iter().enumerate() {
                cost += rate * times[k] * loads[k].div_ceil(m) as f64;
            }
            if unserved > 0 {
                match self.penalty {
                    Some(p) => cost += p * unserved as f64,
                    None => return,
                }
            }
            let hub_loads: Vec<u64> = self
                .hubs
                .iter()
                .map(|(h, _, _)| {
                    self.arcs
                        .iter()
                        .enumerate()
                        .filter(|(_, (_, head, _, _))| head == h)
                        .map(|(k, _)| loads[k])
                        .sum()
                })
                .collect();
            let best = table.entry(hub_loads).or_insert(f64::INFINITY);
            *best = best.min(cost);
            return;
        }
        let paths = &options[pair].0;
        if path == paths.len() {
            let next = options.get(pair + 1).map_or(0, |o| o.1);
            self.enumerate(
                options,
                pair + 1,
                0,
                next,
                loads,
                unserved + left,
                times,
                table,
            );
            return;
        }
        for units in 0..=left {
            for &a in &paths[path] {
                loads[a] += units;
            }
            self.enumerate(
                options,
                pair,
                path + 1,
                left - units,
                loads,
                unserved,
                times,
                table,
            );
            for &a in &paths[path] {
                loads[a] -= units;
            }
        }
    }

    /// Optimal objective by enumerating every capacity vector and, per
    /// scenario, every integral routing. `None` when infeasible.
    pub fn brute_force(&self) -> Option<f64> {
        let tables: Vec<_> = (0..self.scenarios.len())
            .map(|i| self.load_table(i))
            .collect();
        let n = self.scenarios.len() as f64;
        let mut best: Option<f64> = None;
        let mut caps = vec![0u32; self.hubs.len()];
        loop {
            let mut total = 0.0;
            for (k, (_, f, s)) in self.hubs.iter().enumerate() {
                if caps[k] > 0 {
                    total += f;
                }
                total += s * caps[k] as f64;
            }
            let mut feasible = true;
            for table in &tables {
                let second = table
                    .iter()
                    .filter(|(loads, _)| loads.iter().zip(&caps).all(|(&l, &c)| l <= c as u64))
                    .map(|(_, &c)| c)
                    .fold(f64::INFINITY, f64::min);
                if second.is_infinite() {
                    feasible = false;
                    break;
                }
                total += second / n;
            }
            if feasible {
                best = Some(best.map_or(total, |b: f64| b.min(total)));
            }
            // odometer over 0..=cap per hub
            let mut k = 0;
            loop {
                if k == caps.len() {
                    return best;
                }
                if caps[k] < self.cap {
                    caps[k] += 1;
                    break;
                }
                caps[k] = 0;
                k += 1;
            }
        }
    }
}

/// Random instances within 2 hubs, 2 pairs, 3 scenarios, b <= 10 and m <= 5.
pub fn tiny_strategy() -> impl Strategy<Value = Tiny> {
    (
        1usize..=2,
        1usize..=2,
        1usize..=3,
        1u32..=5,
        3u32..=10,
        prop::option::weighted(0.8, 5.0f64..60.0),
        any::<bool>(),
        prop::collection::vec((0.5f64..4.0, 0.5f64..3.0), 8),
        prop::collection::vec((0.0f64..15.0, 0.0f64..3.0), 2),
        prop::collection::vec((prop::collection::vec(0u64..=5, 2), 0usize..4), 3),
    )
        .prop_map(
            |(hubs, dests, nscen, m, b, penalty, link, arc_params, costs, scen)| {
                let hub_ids: Vec<String> =
                    ["H", "K"][..hubs].iter().map(|s| s.to_string()).collect();
                let dest_ids: Vec<String> =
                    ["D", "E"][..dests].iter().map(|s| s.to_string()).collect();
                let mut arcs = Vec::new();
                let mut p = arc_params.iter();
                for h in &hub_ids {
                    let (t, r) = p.next().unwrap();
                    arcs.push((
                        "O".to_string(),
                        h.clone(),
                        (t * 4.0).round() / 4.0,
                        r.round().max(1.0),
                    ));
                    for d in &dest_ids {
                        let (t, r) = p.next().unwrap();
                        arcs.push((
                            h.clone(),
                            d.clone(),
                            (t * 4.0).round() / 4.0,
                            r.round().max(1.0),
                        ));
                    }
                }
                if hubs == 2 && link {
                    arcs.push(("H".into(), "K".into(), 1.0, 1.0));
                }
                let scenarios = scen[..nscen]
                    .iter()
                    .map(|(qs, dmask)| {
                        let demand = dest_ids
                            .iter()
                            .zip(qs)
                            .map(|(d, &q)| ("O".to_string(), d.clone(), q))
                            .collect();
                        let disrupted = hub_ids
                            .iter()
                            .enumerate()
                            .filter(|(k, _)| dmask & (1 << k) != 0)
                            .map(|(_, h)| h.clone())
                            .collect();
                        (demand, disrupted)
                    })
                    .collect();
                Tiny {
                    hubs: hub_ids
                        .iter()
                        .zip(&costs)
                        .map(|(h, (f, s))| (h.clone(), f.round(), (s * 2.0).round() / 2.0))
                        .collect(),
                    origins: vec!["O".into()],
                    destinations: dest_ids,
                    arcs,
                    truckload: m,
                    cap: b,
                    multiplier: 3.0,
                    penalty: penalty.map(|x| x.round()),
                    scenarios,
                }
            },
        )
}
