//! Independent re-evaluation of constraints (2)–(8) from raw solution data.
//!
//! Nothing here reuses the model builder: every check goes back to the
//! network, the economics and the scenario as given.

use std::collections::BTreeMap;

use super::{DeploymentPlan, ModelInstance, RoutingSolution, SolveReport};
use crate::economics::HubEconomics;
use crate::network::{scenario_travel_time, Network};
use crate::scenario::Scenario;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1.0)
}

/// Violations of the plan constraints (7)–(8).
pub fn check_plan(plan: &DeploymentPlan, network: &Network, econ: &HubEconomics) -> Vec<String> {
    let mut out = Vec::new();
    for d in &plan.hubs {
        match network.node_index(&d.hub) {
            Some(i) if network.is_hub(i) => {}
            _ => out.push(format!("plan lists `{}`, which is not a hub", d.hub)),
        }
        let limit = if d.open { econ.capacity_cap } else { 0 };
        if d.capacity > limit {
            out.push(format!(
                "hub `{}`: capacity {} exceeds b*X = {}",
                d.hub, d.capacity, limit
            ));
        }
    }
    out
}

/// Violations of constraints (2)–(6) for one scenario's routing, plus a
/// recomputation of its fleet and penalty costs.
pub fn check_routing(
    network: &Network,
    econ: &HubEconomics,
    plan: &DeploymentPlan,
    scenario: &Scenario,
    routing: &RoutingSolution,
    delay_multiplier: f64,
    overflow_penalty: Option<f64>,
) -> Vec<String> {
    let mut out = Vec::new();
    let mask = match network.disruption_mask(scenario.disrupted_hubs.iter().map(String::as_str)) {
        Ok(m) => m,
        Err(e) => return vec![e.to_string()],
    };
    let mut arc_total: BTreeMap<usize, u64> = BTreeMap::new();
    for (pair, flows) in &routing.flows {
        if !scenario.demand.contains_key(pair) && flows.values().any(|&f| f > 0) {
            out.push(format!("flow for {pair}, which has no demand"));
        }
    }
    for (pair, &q) in &scenario.demand {
        let u = routing.unserved.get(pair).copied().unwrap_or(0);
        if u > q {
            out.push(format!("{pair}: unserved {u} exceeds demand {q}"));
            continue;
        }
        if u > 0 && overflow_penalty.is_none() {
            out.push(format!("{pair}: {u} units unserved with overflow disabled"));
        }
        let (Some(o), Some(d)) = (
            network.node_index(&pair.origin),
            network.node_index(&pair.destination),
        ) else {
            out.push(format!("{pair}: unknown node"));
            continue;
        };
        let mut balance: BTreeMap<usize, i128> = BTreeMap::new();
        for (arc_id, &f) in routing.flows.get(pair).into_iter().flatten() {
            let Some(a) = network.arcs().iter().position(|arc| &arc.id == arc_id) else {
                out.push(format!("{pair}: flow on unknown arc {arc_id}"));
                continue;
            };
            let arc = network.arc(a);
            *balance.entry(arc.tail).or_default() += f as i128;
            *balance.entry(arc.head).or_default() -= f as i128;
            *arc_total.entry(a).or_default() += f;
        }
        let sent = (q - u) as i128;
        for (&i, &net) in &balance {
            let want = if i == o {
                sent
            } else if i == d {
                -sent
            } else {
                0
            };
            if net != want {
                let role = if network.is_hub(i) { "hub" } else { "node" };
                out.push(format!(
                    "{pair}: {role} {} has net outflow {net}, expected {want}",
                    network.node(i).id
                ));
            }
            if i != o && i != d && !network.is_hub(i) && net == 0 && want == 0 {
                let touched = routing.flows[pair]
                    .iter()
                    .any(|(id, &f)| f > 0 && id.starts_with(&format!("{}->", network.node(i).id)));
                if touched {
                    out.push(format!(
                        "{pair}: relays through non-hub {}",
                        network.node(i).id
                    ));
                }
            }
        }
        if sent > 0 && !balance.contains_key(&o) {
            out.push(format!(
                "{pair}: {sent} units expected to leave the origin, none do"
            ));
        }
    }

    let m = econ.truckload as u64;
    let mut fleet_cost = 0.0;
    for (arc_id, &tr) in &routing.trucks {
        match network.arcs().iter().position(|arc| &arc.id == arc_id) {
            Some(a) => {
                let arc = network.arc(a);
                fleet_cost += arc.fleet_cost_rate
                    * scenario_travel_time(arc, &mask, delay_multiplier)
                    * tr as f64;
            }
            None => out.push(format!("trucks on unknown arc {arc_id}")),
        }
    }
    for (&a, &f) in &arc_total {
        let tr = routing.trucks.get(&network.arc(a).id).copied().unwrap_or(0);
        if f > m * tr {
            out.push(format!(
                "arc {}: flow {f} exceeds {tr} trucks of {m}",
                network.arc(a).id
            ));
        }
    }
    for &h in network.hubs() {
        let inbound: u64 = network
            .in_arcs(h)
            .iter()
            .filter_map(|a| arc_total.get(a))
            .sum();
        let cap = plan.capacity(&network.node(h).id) as u64;
        if inbound > cap {
            out.push(format!(
                "hub {}: inbound {inbound} exceeds capacity {cap}",
                network.node(h).id
            ));
        }
    }
    if !close(fleet_cost, routing.fleet_cost) {
        out.push(format!(
            "fleet cost {} but trucks cost {fleet_cost}",
            routing.fleet_cost
        ));
    }
    let penalty = overflow_penalty.unwrap_or(0.0) * routing.unserved.values().sum::<u64>() as f64;
    if !close(penalty, routing.penalty_cost) {
        out.push(format!(
            "penalty cost {} but unserved units cost {penalty}",
            routing.penalty_cost
        ));
    }
    out
}

/// Checks every scenario of a report and recomputes objective (9).
pub fn check_report(model: &ModelInstance, report: &SolveReport) -> Vec<String> {
    let mut out = check_plan(&report.plan, &model.network, &model.econ);
    let scenarios = &model.scenarios.scenarios;
    if report.routings.len() != scenarios.len() {
        out.push(format!(
            "{} routings for {} scenarios",
            report.routings.len(),
            scenarios.len()
        ));
        return out;
    }
    let total_weight: f64 = scenarios.iter().map(|s| s.weight).sum();
    let mut expected = 0.0;
    for (i, (s, r)) in scenarios.iter().zip(&report.routings).enumerate() {
        for v in check_routing(
            &model.network,
            &model.econ,
            &report.plan,
            s,
            r,
            model.delay_multiplier,
            model.penalty,
        ) {
            out.push(format!("scenario {i}: {v}"));
        }
        expected += s.weight / total_weight * (r.fleet_cost + r.penalty_cost);
    }
    let first = report.plan.first_stage_cost(&model.econ);
    if !close(first, report.first_stage_cost) {
        out.push(format!(
            "first-stage cost {} recomputes to {first}",
            report.first_stage_cost
        ));
    }
    if !close(expected, report.expected_second_stage_cost) {
        out.push(format!(
            "expected second-stage cost {} recomputes to {expected}",
            report.expected_second_stage_cost
        ));
    }
    if !close(first + expected, report.objective) {
        out.push(format!(
            "objective {} recomputes to {}",
            report.objective,
            first + expected
        ));
    }
    out
}
