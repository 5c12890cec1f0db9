use serde::{Deserialize, Serialize};

use super::SolveError;
use crate::economics::HubEconomics;
use crate::network::Network;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HubDeployment {
    pub hub: String,
    /// X_h
    pub open: bool,
    /// C_h, freight units per day
    pub capacity: u32,
}

/// First-stage decisions: which hubs open and how much daily throughput
/// capacity each receives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeploymentPlan {
    pub hubs: Vec<HubDeployment>,
}

impl DeploymentPlan {
    /// Every hub of `network` closed.
    pub fn closed(network: &Network) -> Self {
        Self::from_capacities(network, &vec![0; network.hubs().len()])
    }

    /// Plan opening exactly the hubs with positive capacity; `caps` follows
    /// `network.hubs()` order.
    pub fn from_capacities(network: &Network, caps: &[u32]) -> Self {
        DeploymentPlan {
            hubs: network
                .hubs()
                .iter()
                .zip(caps)
                .map(|(&h, &c)| HubDeployment {
                    hub: network.node(h).id.clone(),
                    open: c > 0,
                    capacity: c,
                })
                .collect(),
        }
    }

    pub fn get(&self, hub: &str) -> Option<&HubDeployment> {
        self.hubs.iter().find(|d| d.hub == hub)
    }

    /// Usable capacity: zero for closed or unlisted hubs.
    pub fn capacity(&self, hub: &str) -> u32 {
        self.get(hub).filter(|d| d.open).map_or(0, |d| d.capacity)
    }

    pub fn total_capacity(&self) -> u64 {
        self.hubs.iter().map(|d| d.capacity as u64).sum()
    }

    pub fn active_hubs(&self) -> usize {
        self.hubs.iter().filter(|d| d.open).count()
    }

    /// Checks `C_h <= b * X_h` for every hub.
    pub fn validate(&self, econ: &HubEconomics) -> Result<(), SolveError> {
        for d in &self.hubs {
            let cap = if d.open { econ.capacity_cap } else { 0 };
            if d.capacity > cap {
                return Err(SolveError::InvalidPlan(format!(
                    "hub `{}` has capacity {} above its limit {}",
                    d.hub, d.capacity, cap
                )));
            }
        }
        Ok(())
    }

    /// Usable capacities aligned with `network.hubs()`; every listed hub must
    /// be a hub of the network.
    pub fn aligned_capacities(&self, network: &Network) -> Result<Vec<u32>, SolveError> {
        for d in &self.hubs {
            match network.node_index(&d.hub) {
                Some(i) if network.is_hub(i) => {}
                _ => {
                    return Err(SolveError::InvalidPlan(format!(
                        "`{}` is not a hub of the network",
                        d.hub
                    )))
                }
            }
        }
        Ok(network
            .hubs()
            .iter()
            .map(|&h| self.capacity(&network.node(h).id))
            .collect())
    }

    /// `Σ f_h X_h + s_h C_h`
    pub fn first_stage_cost(&self, econ: &HubEconomics) -> f64 {
        self.hubs
            .iter()
            .filter_map(|d| {
                let c = econ.get(&d.hub)?;
                let fixed = if d.open { c.fixed_cost } else { 0.0 };
                Some(fixed + c.unit_capacity_cost * d.capacity as f64)
            })
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plans always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
