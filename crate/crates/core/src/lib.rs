//! Throughput capacity deployment for open-access hubs in a hyperconnected
//! relay network.
//!
//! The crate covers the whole pipeline: network construction under the
//! short-haul leg limit ([`network`]), demand and disruption scenarios for
//! the four stress-testing levels ([`scenario`]), the sample-average
//! two-stage model and its exact branch-and-bound solution ([`saa`]), a
//! day-by-day rollout simulator ([`simulator`]) and network/KPI reporting
//! ([`metrics`]). [`io`] reads and writes the file formats and [`synth`]
//! generates synthetic instances.

pub mod economics;
pub mod io;
pub mod metrics;
pub mod milp;
pub mod network;
pub mod rng;
pub mod saa;
pub mod scenario;
pub mod simulator;
pub mod synth;

pub use economics::{HubCost, HubEconomics};
pub use network::{
    build_network, scenario_travel_time, CandidateArcs, Network, NetworkConfig, Node, NodeKind,
};
pub use scenario::{
    build_stress_scenarios, fit_demand_estimator, DemandEstimator, DemandHistory, DemandMap,
    OdPair, Scenario, ScenarioSet, StressLevel,
};
