use std::collections::BTreeMap;

use hubcap::economics::{HubCost, HubEconomics};
use hubcap::network::{
    build_network, CandidateArcs, Network, NetworkConfig, Node, NodeKind, RawArc,
};
use hubcap::saa::{DeploymentPlan, HubDeployment, Overflow};
use hubcap::scenario::{DemandMap, OdPair, StressLevel};
use hubcap::simulator::{
    run_stress_test, simulate, HubCostAmortization, SimulationConfig, StressDemand,
};

/// O -> H -> D, one hour per leg and one cost unit per truck-hour.
fn chain() -> Network {
    let nodes = vec![
        Node::new("O", NodeKind::Origin, 0.0, 0.0),
        Node::new("H", NodeKind::Hub, 0.0, 0.0),
        Node::new("D", NodeKind::Destination, 0.0, 0.0),
    ];
    let arcs = vec![
        RawArc::new("O", "H", 1.0, 1.0),
        RawArc::new("H", "D", 1.0, 1.0),
    ];
    build_network(
        nodes,
        CandidateArcs::Directed(arcs),
        NetworkConfig::default(),
        &[("O".to_string(), "D".to_string())],
    )
    .unwrap()
}

fn econ(rate: f64) -> HubEconomics {
    let cost = HubCost {
        fixed_cost: 10.0,
        unit_capacity_cost: 1.0,
        disruption_rate: rate,
    };
    HubEconomics::new([("H".to_string(), cost)], 5, 10).unwrap()
}

fn plan(capacity: u32) -> DeploymentPlan {
    DeploymentPlan {
        hubs: vec![HubDeployment {
            hub: "H".into(),
            open: capacity > 0,
            capacity,
        }],
    }
}

fn days(quantities: &[u64]) -> Vec<DemandMap> {
    quantities
        .iter()
        .map(|&q| BTreeMap::from([(OdPair::new("O", "D"), q)]))
        .collect()
}

fn config(n: usize, seed: u64) -> SimulationConfig {
    SimulationConfig {
        horizon_days: n,
        deadline_hours: 4.0,
        seed,
        ..SimulationConfig::default()
    }
}

#[test]
fn zero_demand_is_always_on_time() {
    let r = simulate(
        &plan(5),
        &chain(),
        &econ(0.5),
        &days(&[0, 0, 0]),
        &config(3, 1),
    )
    .unwrap();
    assert_eq!(r.on_time_rate, 1.0);
    assert_eq!(r.avg_daily_fleet_cost, 0.0);
    assert!((r.avg_daily_total_cost - (5.0 + 10.0 / 3.0)).abs() < 1e-12);
}

#[test]
fn operational_amortization_drops_the_fixed_share() {
    let cfg = SimulationConfig {
        amortization: HubCostAmortization::DailyOperationalOnly,
        ..config(3, 1)
    };
    let r = simulate(&plan(5), &chain(), &econ(0.0), &days(&[5, 5, 5]), &cfg).unwrap();
    // s*C + one truck on each one-hour leg
    assert!((r.avg_daily_total_cost - 7.0).abs() < 1e-12);
    assert_eq!(r.on_time_rate, 1.0);
}

#[test]
fn late_fraction_equals_disrupted_share() {
    // a disrupted hub triples both legs: 6 h against a 4 h deadline
    let n = 2000;
    let p = 0.3;
    let r = simulate(
        &plan(5),
        &chain(),
        &econ(p),
        &days(&vec![5; n]),
        &config(n, 9),
    )
    .unwrap();
    let disrupted = r
        .days
        .iter()
        .filter(|d| !d.disrupted_hubs.is_empty())
        .count();
    assert!((r.on_time_rate - (1.0 - disrupted as f64 / n as f64)).abs() < 1e-12);
    for d in &r.days {
        let expect = if d.disrupted_hubs.is_empty() { 5 } else { 0 };
        assert_eq!(d.on_time_units, expect);
    }
    let sd = (p * (1.0 - p) / n as f64).sqrt();
    assert!(
        (1.0 - r.on_time_rate - p).abs() < 4.0 * sd,
        "{}",
        r.on_time_rate
    );
}

#[test]
fn no_disruption_risk_makes_l3_equal_l1() {
    let realized = days(&[3, 7, 5, 4]);
    let quantile = BTreeMap::from([(OdPair::new("O", "D"), 5)]);
    let m = run_stress_test(
        &[("p".to_string(), plan(10))],
        &StressLevel::ALL,
        &chain(),
        &econ(0.0),
        StressDemand {
            realized: &realized,
            quantile: &quantile,
        },
        &config(4, 3),
    )
    .unwrap();
    let get = |l| m.get(l, "p").unwrap();
    assert_eq!(
        get(StressLevel::L1Deterministic),
        get(StressLevel::L3StochasticDisruption)
    );
    assert_eq!(
        get(StressLevel::L2StochasticDemand),
        get(StressLevel::L4Integrated)
    );
    assert_eq!(m.cells.len(), 4);
}

#[test]
fn same_seed_same_report() {
    let d = days(&[5, 3, 8, 1, 0, 6]);
    let a = simulate(&plan(8), &chain(), &econ(0.4), &d, &config(6, 42)).unwrap();
    let b = simulate(&plan(8), &chain(), &econ(0.4), &d, &config(6, 42)).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn on_time_rate_falls_as_disruption_rate_rises() {
    // the same uniforms decide every day, so higher rates disrupt a superset
    let n = 300;
    let d = days(&vec![5; n]);
    let rates: Vec<f64> = [0.0, 0.1, 0.3, 0.6, 1.0]
        .iter()
        .map(|&p| {
            simulate(&plan(5), &chain(), &econ(p), &d, &config(n, 5))
                .unwrap()
                .on_time_rate
        })
        .collect();
    assert_eq!(rates[0], 1.0);
    assert_eq!(rates[4], 0.0);
    assert!(rates.windows(2).all(|w| w[0] >= w[1]), "{rates:?}");
}

#[test]
fn closed_hub_leaves_everything_unserved() {
    let cfg = SimulationConfig {
        overflow: Overflow::Penalty(50.0),
        ..config(2, 0)
    };
    let r = simulate(&plan(0), &chain(), &econ(0.0), &days(&[4, 6]), &cfg).unwrap();
    assert_eq!(r.unserved_units, 10);
    assert_eq!(r.on_time_rate, 0.0);
    assert!((r.avg_daily_penalty_cost - 250.0).abs() < 1e-12);
}

#[test]
fn horizon_must_match_the_days() {
    assert!(simulate(
        &plan(5),
        &chain(),
        &econ(0.0),
        &days(&[1, 2]),
        &config(3, 0)
    )
    .is_err());
}
