//! Network metrics of a deployment plan and the cross-level comparison table.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::network::Network;
use crate::saa::{DeploymentPlan, RoutingSolution};
use crate::scenario::StressLevel;
use crate::simulator::StressMatrix;

/// Which neighbors count towards a hub's degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeScope {
    /// Origins, destinations and hubs.
    #[default]
    All,
    /// Other hubs only.
    Hubs,
}

impl FromStr for DegreeScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" => Ok(DegreeScope::All),
            "hubs" => Ok(DegreeScope::Hubs),
            other => Err(format!(
                "unknown degree scope `{other}` (expected all or hubs)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkMetrics {
    pub total_throughput_capacity: u64,
    pub active_hub_count: usize,
    pub avg_hub_capacity: f64,
    /// Mean number of distinct neighbors of an active hub.
    pub hub_connectivity: f64,
}

/// Capacity metrics from the plan; connectivity from arcs carrying flow in
/// any routing, or from the designed arcs among active nodes when there are
/// no routings.
pub fn compute_network_metrics(
    plan: &DeploymentPlan,
    network: &Network,
    routings: &[RoutingSolution],
    scope: DegreeScope,
) -> NetworkMetrics {
    let total = plan.total_capacity();
    let active: BTreeSet<&str> = plan
        .hubs
        .iter()
        .filter(|d| d.open)
        .map(|d| d.hub.as_str())
        .collect();
    let count = active.len();

    let edges: Vec<(usize, usize)> = if routings.is_empty() {
        network
            .arcs()
            .iter()
            .filter(|a| {
                let live =
                    |i: usize| !network.is_hub(i) || active.contains(network.node(i).id.as_str());
                live(a.tail) && live(a.head)
            })
            .map(|a| (a.tail, a.head))
            .collect()
    } else {
        let used: BTreeSet<String> = routings
            .iter()
            .flat_map(|r| {
                r.arc_loads()
                    .into_iter()
                    .filter(|(_, f)| *f > 0)
                    .map(|(a, _)| a)
            })
            .collect();
        network
            .arcs()
            .iter()
            .filter(|a| used.contains(&a.id))
            .map(|a| (a.tail, a.head))
            .collect()
    };
    let mut neighbors: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (t, h) in edges {
        neighbors.entry(t).or_default().insert(h);
        neighbors.entry(h).or_default().insert(t);
    }
    let degree_sum: usize = network
        .hubs()
        .iter()
        .filter(|&&h| active.contains(network.node(h).id.as_str()))
        .map(|h| {
            neighbors.get(h).map_or(0, |s| {
                s.iter()
                    .filter(|&&j| scope == DegreeScope::All || network.is_hub(j))
                    .count()
            })
        })
        .sum();
    NetworkMetrics {
        total_throughput_capacity: total,
        active_hub_count: count,
        avg_hub_capacity: if count == 0 {
            0.0
        } else {
            total as f64 / count as f64
        },
        hub_connectivity: if count == 0 {
            0.0
        } else {
            degree_sum as f64 / count as f64
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub plan: String,
    pub level: StressLevel,
    pub capacity: u64,
    pub active_hubs: usize,
    pub avg_capacity: f64,
    pub connectivity: f64,
    pub on_time_rate: f64,
    pub avg_daily_total_cost: f64,
    /// On-time rate at L1 minus on-time rate at L4 for this plan.
    pub resilience_slope: f64,
}

pub const COMPARISON_COLUMNS: [&str; 9] = [
    "plan",
    "level",
    "capacity",
    "active_hubs",
    "avg_capacity",
    "connectivity",
    "on_time_rate",
    "avg_daily_total_cost",
    "resilience_slope",
];

/// Table-2 metrics next to every KPI cell of the matrix, one row per (plan,
/// level). Plans without an L1 or L4 cell get a resilience slope of 0.
pub fn compare_plans(
    metrics: &[(String, NetworkMetrics)],
    matrix: &StressMatrix,
) -> Vec<ComparisonRow> {
    let mut rows = Vec::new();
    for (name, m) in metrics {
        let rate = |l| matrix.get(l, name).map(|r| r.on_time_rate);
        let slope = match (
            rate(StressLevel::L1Deterministic),
            rate(StressLevel::L4Integrated),
        ) {
            (Some(a), Some(b)) => a - b,
            _ => 0.0,
        };
        for level in StressLevel::ALL {
            let Some(kpi) = matrix.get(level, name) else {
                continue;
            };
            rows.push(ComparisonRow {
                plan: name.clone(),
                level,
                capacity: m.total_throughput_capacity,
                active_hubs: m.active_hub_count,
                avg_capacity: m.avg_hub_capacity,
                connectivity: m.hub_connectivity,
                on_time_rate: kpi.on_time_rate,
                avg_daily_total_cost: kpi.avg_daily_total_cost,
                resilience_slope: slope,
            });
        }
    }
    rows
}

/// CSV with [`COMPARISON_COLUMNS`]; metrics and costs at one decimal, rates
/// at four.
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COMPARISON_COLUMNS).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.plan.clone(),
            r.level.to_string(),
            r.capacity.to_string(),
            r.active_hubs.to_string(),
            format!("{:.1}", r.avg_capacity),
            format!("{:.1}", r.connectivity),
            format!("{:.4}", r.on_time_rate),
            format!("{:.1}", r.avg_daily_total_cost),
            format!("{:.4}", r.resilience_slope),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn comparison_json(rows: &[ComparisonRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows always serialize")
}
