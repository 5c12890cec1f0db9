//! Synthetic instances: nodes scattered in a bounding box, auto-connected
//! arcs under the leg limit, a Poisson-mixture demand history and uniform
//! hub economics.

use std::collections::VecDeque;

use chrono::NaiveDate;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::economics::{EconomicsError, HubCost, HubEconomics};
use crate::network::{haversine_km, NetworkConfig, Node, NodeKind};
use crate::rng::{stream_rng, streams};
use crate::scenario::{DemandHistory, DemandRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub origins: usize,
    pub hubs: usize,
    pub destinations: usize,
    pub days: usize,
    pub seed: u64,
    /// (south, north) latitude bounds in degrees.
    pub lat_range: (f64, f64),
    /// (west, east) longitude bounds in degrees.
    pub lon_range: (f64, f64),
    pub network: NetworkConfig,
    /// Number of origins shipping to each destination.
    pub origins_per_destination: usize,
    /// Mean daily units per pair in the quiet regime.
    pub mean_daily_demand: f64,
    /// Daily probability of the busy regime, and its demand multiplier.
    pub peak_probability: f64,
    pub peak_factor: f64,
    pub fixed_cost: f64,
    pub unit_capacity_cost: f64,
    pub disruption_rate: f64,
    pub fleet_cost_rate: f64,
    pub truckload: u32,
    pub capacity_cap: u32,
    pub start_date: NaiveDate,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            origins: 3,
            hubs: 5,
            destinations: 6,
            days: 30,
            seed: 0,
            lat_range: (31.0, 35.0),
            lon_range: (-88.0, -82.0),
            network: NetworkConfig::default(),
            origins_per_destination: 2,
            mean_daily_demand: 3.0,
            peak_probability: 0.2,
            peak_factor: 2.5,
            fixed_cost: 200.0,
            unit_capacity_cost: 20.0,
            disruption_rate: 0.1,
            fleet_cost_rate: 10.0,
            truckload: 1,
            capacity_cap: 60,
            start_date: NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthInstance {
    pub nodes: Vec<Node>,
    pub economics: HubEconomics,
    pub history: DemandHistory,
}

const KM_PER_DEG_LAT: f64 = 111.2;

fn hubs_connected(hubs: &[(f64, f64)], reach_km: f64) -> bool {
    let mut seen = vec![false; hubs.len()];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for j in 0..hubs.len() {
            if !seen[j] && haversine_km(hubs[i].0, hubs[i].1, hubs[j].0, hubs[j].1) <= reach_km {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

pub fn generate(config: &SynthConfig) -> Result<SynthInstance, EconomicsError> {
    assert!(
        config.origins >= 1 && config.hubs >= 1 && config.destinations >= 1 && config.days >= 1
    );
    let mut rng = stream_rng(config.seed, streams::SYNTH);
    let reach = config.network.max_leg_hours * config.network.speed_kmh;
    let (s, n) = config.lat_range;
    let (w, e) = config.lon_range;

    // hubs: resample until every hub can reach every other by relay legs
    let mut hubs: Vec<(f64, f64)> = Vec::new();
    for attempt in 0.. {
        // shrink towards the box centre if the box is too sparse
        let shrink = 0.9f64.powi(attempt / 20);
        let (cy, cx) = ((s + n) / 2.0, (w + e) / 2.0);
        hubs = (0..config.hubs)
            .map(|_| {
                (
                    cy + (rng.random_range(s..=n) - cy) * shrink,
                    cx + (rng.random_range(w..=e) - cx) * shrink,
                )
            })
            .collect();
        if hubs_connected(&hubs, reach * 0.95) {
            break;
        }
    }

    // shippers and receivers sit within 40% of a leg from some hub
    let near_hub = |rng: &mut rand_chacha::ChaCha8Rng| {
        let &(lat, lon) = hubs.choose(rng).expect("at least one hub");
        let r = rng.random_range(0.1..0.4) * reach;
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let dlat = r * theta.sin() / KM_PER_DEG_LAT;
        let dlon = r * theta.cos() / (KM_PER_DEG_LAT * lat.to_radians().cos());
        (lat + dlat, lon + dlon)
    };
    let mut nodes = Vec::new();
    for i in 0..config.origins {
        let (lat, lon) = near_hub(&mut rng);
        nodes.push(Node::new(
            format!("O{}", i + 1),
            NodeKind::Origin,
            round4(lat),
            round4(lon),
        ));
    }
    for (i, &(lat, lon)) in hubs.iter().enumerate() {
        nodes.push(Node::new(
            format!("H{}", i + 1),
            NodeKind::Hub,
            round4(lat),
            round4(lon),
        ));
    }
    for i in 0..config.destinations {
        let (lat, lon) = near_hub(&mut rng);
        nodes.push(Node::new(
            format!("D{}", i + 1),
            NodeKind::Destination,
            round4(lat),
            round4(lon),
        ));
    }

    let economics = HubEconomics::new(
        (0..config.hubs).map(|i| {
            (
                format!("H{}", i + 1),
                HubCost {
                    fixed_cost: config.fixed_cost,
                    unit_capacity_cost: config.unit_capacity_cost,
                    disruption_rate: config.disruption_rate,
                },
            )
        }),
        config.truckload,
        config.capacity_cap,
    )?;

    // each destination buys from a few distinct origins
    let per_dest = config.origins_per_destination.clamp(1, config.origins);
    let origin_ids: Vec<usize> = (1..=config.origins).collect();
    let mut records = Vec::new();
    for d in 1..=config.destinations {
        let chosen: Vec<usize> = origin_ids
            .choose_multiple(&mut rng, per_dest)
            .copied()
            .collect();
        for o in chosen {
            let lambda = config.mean_daily_demand * rng.random_range(0.5..1.5);
            let quiet = Poisson::new(lambda).expect("positive rate");
            let busy = Poisson::new(lambda * config.peak_factor).expect("positive rate");
            for day in 0..config.days {
                let q = if rng.random::<f64>() < config.peak_probability {
                    busy.sample(&mut rng)
                } else {
                    quiet.sample(&mut rng)
                } as u64;
                if q > 0 || day == 0 || day + 1 == config.days {
                    records.push(DemandRecord {
                        date: config.start_date + chrono::Days::new(day as u64),
                        origin: format!("O{o}"),
                        destination: format!("D{d}"),
                        quantity: q,
                    });
                }
            }
        }
    }
    records.sort_by(|a, b| {
        (a.date, &a.origin, &a.destination).cmp(&(b.date, &b.origin, &b.destination))
    });
    Ok(SynthInstance {
        nodes,
        economics,
        history: DemandHistory::new(records),
    })
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_network, CandidateArcs};

    fn pairs(inst: &SynthInstance) -> Vec<(String, String)> {
        inst.history
            .pairs()
            .into_iter()
            .map(|p| (p.origin, p.destination))
            .collect()
    }

    #[test]
    fn minimal_instance_is_connected() {
        let cfg = SynthConfig {
            origins: 1,
            hubs: 1,
            destinations: 1,
            days: 3,
            seed: 9,
            ..Default::default()
        };
        let inst = generate(&cfg).unwrap();
        assert_eq!(inst.nodes.len(), 3);
        assert_eq!(inst.history.horizon_days(), 3);
        let net = build_network(
            inst.nodes.clone(),
            CandidateArcs::AutoConnect {
                fleet_cost_rate: 1.0,
            },
            cfg.network,
            &pairs(&inst),
        );
        assert!(net.is_ok(), "{net:?}");
    }

    #[test]
    fn same_seed_same_instance() {
        let cfg = SynthConfig {
            seed: 4,
            ..Default::default()
        };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = SynthConfig {
            seed: 5,
            ..cfg.clone()
        };
        assert_ne!(
            generate(&other).unwrap().nodes,
            generate(&cfg).unwrap().nodes
        );
    }

    #[test]
    fn large_network_counts() {
        let cfg = SynthConfig {
            origins: 13,
            hubs: 24,
            destinations: 50,
            days: 90,
            seed: 1,
            ..Default::default()
        };
        let inst = generate(&cfg).unwrap();
        let kinds = |k| inst.nodes.iter().filter(|n| n.kind == k).count();
        assert_eq!(
            (
                kinds(NodeKind::Origin),
                kinds(NodeKind::Hub),
                kinds(NodeKind::Destination)
            ),
            (13, 24, 50)
        );
        assert_eq!(inst.history.horizon_days(), 90);
        build_network(
            inst.nodes.clone(),
            CandidateArcs::AutoConnect {
                fleet_cost_rate: 1.0,
            },
            cfg.network,
            &pairs(&inst),
        )
        .unwrap();
    }
}
