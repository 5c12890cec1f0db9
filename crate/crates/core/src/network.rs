//! Hyperconnected relay network: nodes, directed arcs bounded by the
//! short-haul leg limit, adjacency indexes and scenario travel times.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius used for great-circle distances.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

pub const DEFAULT_MAX_LEG_HOURS: f64 = 5.5;
pub const DEFAULT_SPEED_KMH: f64 = 70.0;
pub const DEFAULT_DELAY_MULTIPLIER: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("network has no nodes")]
    EmptyNodes,
    #[error("duplicate node id `{0}`")]
    DuplicateNodeId(String),
    #[error("node `{id}` has invalid coordinates ({lat}, {lon})")]
    InvalidCoordinate { id: String, lat: f64, lon: f64 },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("arc {tail}->{head}: {reason}")]
    InvalidArc {
        tail: String,
        head: String,
        reason: String,
    },
    #[error("duplicate arc {0}")]
    DuplicateArc(String),
    #[error("average speed must be positive, got {0}")]
    InvalidSpeed(f64),
    #[error("max leg hours must be positive, got {0}")]
    InvalidMaxLeg(f64),
    #[error("demand pair {origin}->{destination} has no hub-relay path")]
    DisconnectedDemandPair { origin: String, destination: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Origin,
    Destination,
    Hub,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Origin => "origin",
            NodeKind::Destination => "destination",
            NodeKind::Hub => "hub",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for NodeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "origin" | "o" | "source" => Ok(NodeKind::Origin),
            "destination" | "d" | "dest" => Ok(NodeKind::Destination),
            "hub" | "h" => Ok(NodeKind::Hub),
            other => Err(format!("unknown node kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub lat: f64,
    pub lon: f64,
}

impl Node {
    pub fn new(id: impl Into<String>, kind: NodeKind, lat: f64, lon: f64) -> Self {
        Node {
            id: id.into(),
            kind,
            lat,
            lon,
        }
    }
}

/// Candidate arc as read from input, referencing nodes by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawArc {
    pub tail: String,
    pub head: String,
    pub travel_time_hours: f64,
    pub fleet_cost_rate: f64,
}

impl RawArc {
    pub fn new(tail: impl Into<String>, head: impl Into<String>, hours: f64, rate: f64) -> Self {
        RawArc {
            tail: tail.into(),
            head: head.into(),
            travel_time_hours: hours,
            fleet_cost_rate: rate,
        }
    }
}

/// A directed arc. `tail` and `head` are node indexes into the owning network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub id: String,
    pub tail: usize,
    pub head: usize,
    pub base_travel_time: f64,
    pub fleet_cost_rate: f64,
}

/// How the arc set is obtained.
#[derive(Debug, Clone)]
pub enum CandidateArcs {
    /// Each row is one directed arc.
    Directed(Vec<RawArc>),
    /// Each row expands to two directed arcs with identical attributes.
    Undirected(Vec<RawArc>),
    /// Connect every admissible node pair, timing each leg as haversine
    /// distance over `speed_kmh`.
    AutoConnect { fleet_cost_rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    pub max_leg_hours: f64,
    pub speed_kmh: f64,
    /// Forbid arcs between two non-hub nodes so every path relays through a hub.
    pub relay_only: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            max_leg_hours: DEFAULT_MAX_LEG_HOURS,
            speed_kmh: DEFAULT_SPEED_KMH,
            relay_only: true,
        }
    }
}

/// Immutable relay network with adjacency indexes.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: Vec<Node>,
    arcs: Vec<Arc>,
    out_arcs: Vec<Vec<usize>>,
    in_arcs: Vec<Vec<usize>>,
    index: HashMap<String, usize>,
    hubs: Vec<usize>,
    origins: Vec<usize>,
    destinations: Vec<usize>,
    config: NetworkConfig,
}

/// Great-circle distance in kilometres.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

/// Builds a network from nodes and candidate arcs.
///
/// Arcs longer than `config.max_leg_hours` are dropped, as are arcs between two
/// non-hub nodes when `config.relay_only` is set. Every pair in `demand_pairs`
/// must admit a path from origin to destination whose intermediate nodes are
/// all hubs.
pub fn build_network(
    nodes: Vec<Node>,
    candidates: CandidateArcs,
    config: NetworkConfig,
    demand_pairs: &[(String, String)],
) -> Result<Network, NetworkError> {
    if nodes.is_empty() {
        return Err(NetworkError::EmptyNodes);
    }
    if !(config.max_leg_hours > 0.0) {
        return Err(NetworkError::InvalidMaxLeg(config.max_leg_hours));
    }
    let mut index = HashMap::with_capacity(nodes.len());
    for (i, node) in nodes.iter().enumerate() {
        if !(-90.0..=90.0).contains(&node.lat) || !(-180.0..=180.0).contains(&node.lon) {
            return Err(NetworkError::InvalidCoordinate {
                id: node.id.clone(),
                lat: node.lat,
                lon: node.lon,
            });
        }
        if index.insert(node.id.clone(), i).is_some() {
            return Err(NetworkError::DuplicateNodeId(node.id.clone()));
        }
    }

    let lookup = |id: &str| {
        index
            .get(id)
            .copied()
            .ok_or_else(|| NetworkError::UnknownNode(id.to_string()))
    };

    // (tail, head, hours, rate)
    let mut directed: Vec<(usize, usize, f64, f64)> = Vec::new();
    match candidates {
        CandidateArcs::Directed(raw) => {
            for r in &raw {
                directed.push((
                    lookup(&r.tail)?,
                    lookup(&r.head)?,
                    r.travel_time_hours,
                    r.fleet_cost_rate,
                ));
            }
        }
        CandidateArcs::Undirected(raw) => {
            for r in &raw {
                let (t, h) = (lookup(&r.tail)?, lookup(&r.head)?);
                directed.push((t, h, r.travel_time_hours, r.fleet_cost_rate));
                directed.push((h, t, r.travel_time_hours, r.fleet_cost_rate));
            }
        }
        CandidateArcs::AutoConnect { fleet_cost_rate } => {
            if !(config.speed_kmh > 0.0) {
                return Err(NetworkError::InvalidSpeed(config.speed_kmh));
            }
            for (t, a) in nodes.iter().enumerate() {
                for (h, b) in nodes.iter().enumerate() {
                    if t == h {
                        continue;
                    }
                    let hours = haversine_km(a.lat, a.lon, b.lat, b.lon) / config.speed_kmh;
                    if hours > 0.0 {
                        directed.push((t, h, hours, fleet_cost_rate));
                    }
                }
            }
        }
    }

    let mut arcs = Vec::new();
    let mut seen = HashSet::new();
    for (t, h, hours, rate) in directed {
        let (tail_id, head_id) = (&nodes[t].id, &nodes[h].id);
        let invalid = |reason: &str| NetworkError::InvalidArc {
            tail: tail_id.clone(),
            head: head_id.clone(),
            reason: reason.to_string(),
        };
        if t == h {
            return Err(invalid("tail equals head"));
        }
        if !(hours > 0.0) || !hours.is_finite() {
            return Err(invalid("travel time must be positive"));
        }
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(invalid("fleet cost rate must be non-negative"));
        }
        if hours > config.max_leg_hours {
            continue;
        }
        if config.relay_only && nodes[t].kind != NodeKind::Hub && nodes[h].kind != NodeKind::Hub {
            continue;
        }
        let id = format!("{tail_id}->{head_id}");
        if !seen.insert((t, h)) {
            return Err(NetworkError::DuplicateArc(id));
        }
        arcs.push(Arc {
            id,
            tail: t,
            head: h,
            base_travel_time: hours,
            fleet_cost_rate: rate,
        });
    }

    let network = Network::assemble(nodes, arcs, index, config);
    for (o, d) in demand_pairs {
        let find = |id: &str| {
            network
                .node_index(id)
                .ok_or_else(|| NetworkError::UnknownNode(id.to_string()))
        };
        let (oi, di) = (find(o)?, find(d)?);
        if !network.has_relay_path(oi, di) {
            return Err(NetworkError::DisconnectedDemandPair {
                origin: o.clone(),
                destination: d.clone(),
            });
        }
    }
    Ok(network)
}

impl Network {
    fn assemble(
        nodes: Vec<Node>,
        arcs: Vec<Arc>,
        index: HashMap<String, usize>,
        config: NetworkConfig,
    ) -> Self {
        let n = nodes.len();
        let mut out_arcs = vec![Vec::new(); n];
        let mut in_arcs = vec![Vec::new(); n];
        for (a, arc) in arcs.iter().enumerate() {
            out_arcs[arc.tail].push(a);
            in_arcs[arc.head].push(a);
        }
        let of_kind = |k: NodeKind| -> Vec<usize> {
            nodes
                .iter()
                .enumerate()
                .filter(|(_, node)| node.kind == k)
                .map(|(i, _)| i)
                .collect()
        };
        let hubs = of_kind(NodeKind::Hub);
        let origins = of_kind(NodeKind::Origin);
        let destinations = of_kind(NodeKind::Destination);
        Network {
            nodes,
            arcs,
            out_arcs,
            in_arcs,
            index,
            hubs,
            origins,
            destinations,
            config,
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn arc(&self, a: usize) -> &Arc {
        &self.arcs[a]
    }

    pub fn config(&self) -> NetworkConfig {
        self.config
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Arcs leaving node `i` (δ⁺).
    pub fn out_arcs(&self, i: usize) -> &[usize] {
        &self.out_arcs[i]
    }

    /// Arcs entering node `i` (δ⁻).
    pub fn in_arcs(&self, i: usize) -> &[usize] {
        &self.in_arcs[i]
    }

    /// Hub node indexes in input order.
    pub fn hubs(&self) -> &[usize] {
        &self.hubs
    }

    pub fn origins(&self) -> &[usize] {
        &self.origins
    }

    pub fn destinations(&self) -> &[usize] {
        &self.destinations
    }

    pub fn is_hub(&self, i: usize) -> bool {
        self.nodes[i].kind == NodeKind::Hub
    }

    pub fn find_arc(&self, tail: usize, head: usize) -> Option<usize> {
        self.out_arcs[tail]
            .iter()
            .copied()
            .find(|&a| self.arcs[a].head == head)
    }

    /// Whether an arc can carry freight of a shipment from `origin` to
    /// `destination`: it must leave the origin or a hub and enter a hub or
    /// the destination.
    pub fn arc_serves(&self, a: usize, origin: usize, destination: usize) -> bool {
        let arc = &self.arcs[a];
        (arc.tail == origin || self.is_hub(arc.tail))
            && (arc.head == destination || self.is_hub(arc.head))
            && arc.head != origin
            && arc.tail != destination
    }

    /// Breadth-first search for a path from `origin` to `destination` whose
    /// interior nodes are hubs. In relay-only mode the path must visit at
    /// least one hub.
    pub fn has_relay_path(&self, origin: usize, destination: usize) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::new();
        seen[origin] = true;
        queue.push_back(origin);
        while let Some(i) = queue.pop_front() {
            for &a in &self.out_arcs[i] {
                let j = self.arcs[a].head;
                if j == destination {
                    if i != origin || !self.config.relay_only {
                        return true;
                    }
                    continue;
                }
                if self.is_hub(j) && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        false
    }

    /// Travel time of every arc in a scenario with the given disruptions.
    pub fn scenario_travel_times(
        &self,
        disrupted: &DisruptedHubs,
        delay_multiplier: f64,
    ) -> Vec<f64> {
        self.arcs
            .iter()
            .map(|a| scenario_travel_time(a, disrupted, delay_multiplier))
            .collect()
    }

    /// Resolves hub ids into a disruption mask. Unknown or non-hub ids are errors.
    pub fn disruption_mask<'a, I>(&self, hub_ids: I) -> Result<DisruptedHubs, NetworkError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut mask = DisruptedHubs::none(self.nodes.len());
        for id in hub_ids {
            let i = self
                .node_index(id)
                .filter(|&i| self.is_hub(i))
                .ok_or_else(|| NetworkError::UnknownNode(id.to_string()))?;
            mask.0[i] = true;
        }
        Ok(mask)
    }
}

/// Set of disrupted hubs as a mask over node indexes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DisruptedHubs(Vec<bool>);

impl DisruptedHubs {
    pub fn none(node_count: usize) -> Self {
        DisruptedHubs(vec![false; node_count])
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        DisruptedHubs(mask)
    }

    pub fn contains(&self, node: usize) -> bool {
        self.0.get(node).copied().unwrap_or(false)
    }

    pub fn insert(&mut self, node: usize) {
        self.0[node] = true;
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }
}

/// Travel time of `arc` when the hubs in `disrupted` are down: arcs touching a
/// disrupted hub are slowed by `delay_multiplier`.
pub fn scenario_travel_time(arc: &Arc, disrupted: &DisruptedHubs, delay_multiplier: f64) -> f64 {
    debug_assert!(delay_multiplier >= 1.0);
    if disrupted.contains(arc.tail) || disrupted.contains(arc.head) {
        arc.base_travel_time * delay_multiplier
    } else {
        arc.base_travel_time
    }
}
