//! Per-hub cost and disruption parameters plus the global truckload and
//! capacity cap.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::Network;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EconomicsError {
    #[error("hub `{hub}`: {reason}")]
    InvalidHub { hub: String, reason: String },
    #[error("truckload must be at least 1")]
    InvalidTruckload,
    #[error("hub `{0}` appears twice")]
    DuplicateHub(String),
    #[error("no economics given for hub `{0}`")]
    MissingHub(String),
    #[error("economics reference `{0}`, which is not a hub of the network")]
    UnknownHub(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HubCost {
    /// One-off cost of opening the hub (f_h).
    pub fixed_cost: f64,
    /// Daily cost per unit of throughput capacity (s_h).
    pub unit_capacity_cost: f64,
    /// Daily probability that the hub is disrupted (p_h).
    pub disruption_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubEconomics {
    hubs: BTreeMap<String, HubCost>,
    /// Freight units per truck (m).
    pub truckload: u32,
    /// Largest capacity any single hub may receive (b).
    pub capacity_cap: u32,
}

impl HubEconomics {
    pub fn new(
        hubs: impl IntoIterator<Item = (String, HubCost)>,
        truckload: u32,
        capacity_cap: u32,
    ) -> Result<Self, EconomicsError> {
        if truckload < 1 {
            return Err(EconomicsError::InvalidTruckload);
        }
        let mut map = BTreeMap::new();
        for (id, cost) in hubs {
            let bad = |reason: &str| EconomicsError::InvalidHub {
                hub: id.clone(),
                reason: reason.to_string(),
            };
            if !(cost.fixed_cost >= 0.0 && cost.fixed_cost.is_finite()) {
                return Err(bad("fixed cost must be a non-negative number"));
            }
            if !(cost.unit_capacity_cost >= 0.0 && cost.unit_capacity_cost.is_finite()) {
                return Err(bad("unit capacity cost must be a non-negative number"));
            }
            if !(0.0..=1.0).contains(&cost.disruption_rate) {
                return Err(bad("disruption rate must lie in [0, 1]"));
            }
            if map.insert(id.clone(), cost).is_some() {
                return Err(EconomicsError::DuplicateHub(id));
            }
        }
        Ok(HubEconomics {
            hubs: map,
            truckload,
            capacity_cap,
        })
    }

    pub fn get(&self, hub: &str) -> Option<&HubCost> {
        self.hubs.get(hub)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &HubCost)> {
        self.hubs.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.hubs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hubs.is_empty()
    }

    /// Copy with every disruption rate replaced.
    pub fn with_uniform_disruption(&self, rate: f64) -> Self {
        let mut out = self.clone();
        for cost in out.hubs.values_mut() {
            cost.disruption_rate = rate.clamp(0.0, 1.0);
        }
        out
    }

    /// Hub costs aligned with `network.hubs()`. Every network hub needs an
    /// entry and every entry must name a network hub.
    pub fn aligned(&self, network: &Network) -> Result<Vec<HubCost>, EconomicsError> {
        for id in self.hubs.keys() {
            match network.node_index(id) {
                Some(i) if network.is_hub(i) => {}
                _ => return Err(EconomicsError::UnknownHub(id.clone())),
            }
        }
        network
            .hubs()
            .iter()
            .map(|&h| {
                let id = &network.node(h).id;
                self.hubs
                    .get(id)
                    .copied()
                    .ok_or_else(|| EconomicsError::MissingHub(id.clone()))
            })
            .collect()
    }
}
