//! Demand and disruption scenarios: per-pair kernel density estimators fitted
//! to daily demand history, seeded samplers, and the scenario sets of the
//! four stress-testing levels.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::economics::HubEconomics;
use crate::rng::{stream_rng, streams};

/// Lower bound on the kernel bandwidth so constant histories stay usable.
pub const MIN_BANDWIDTH: f64 = 1e-3;
pub const DEFAULT_DEMAND_QUANTILE: f64 = 0.7;
pub const DEFAULT_SCENARIO_COUNT: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("demand history is empty")]
    EmptyHistory,
    #[error("scenario count must be at least 1")]
    InvalidCount,
    #[error("demand quantile must lie in (0, 1), got {0}")]
    InvalidQuantile(f64),
    #[error("invalid OD pair `{0}`, expected `ORIGIN->DESTINATION`")]
    InvalidPair(String),
    #[error("no economics for hub `{0}`")]
    UnknownHub(String),
    #[error("scenario weights sum to {0}, expected 1")]
    BadWeights(f64),
    #[error("scenario set is empty")]
    EmptySet,
    #[error("unknown stress level `{0}`")]
    UnknownLevel(String),
}

/// Ordered origin/destination pair, written `O->D` in files.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OdPair {
    pub origin: String,
    pub destination: String,
}

impl OdPair {
    pub fn new(origin: impl Into<String>, destination: impl Into<String>) -> Self {
        OdPair {
            origin: origin.into(),
            destination: destination.into(),
        }
    }
}

impl fmt::Display for OdPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.origin, self.destination)
    }
}

impl FromStr for OdPair {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once("->") {
            Some((o, d)) if !o.trim().is_empty() && !d.trim().is_empty() => {
                Ok(OdPair::new(o.trim(), d.trim()))
            }
            _ => Err(ScenarioError::InvalidPair(s.to_string())),
        }
    }
}

impl Serialize for OdPair {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OdPair {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Integer freight units per OD pair for one day or scenario.
pub type DemandMap = BTreeMap<OdPair, u64>;

pub fn total_units(demand: &DemandMap) -> u64 {
    demand.values().sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandRecord {
    pub date: NaiveDate,
    pub origin: String,
    pub destination: String,
    pub quantity: u64,
}

/// Dated demand records. The horizon spans the first to the last date, and
/// days without a record for a pair count as zero demand.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DemandHistory {
    pub records: Vec<DemandRecord>,
}

impl DemandHistory {
    pub fn new(records: Vec<DemandRecord>) -> Self {
        DemandHistory { records }
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[DemandRecord] {
        &self.records
    }

    fn date_range(&self) -> Option<(NaiveDate, NaiveDate)> {
        let first = self.records.iter().map(|r| r.date).min()?;
        let last = self.records.iter().map(|r| r.date).max()?;
        Some((first, last))
    }

    pub fn horizon_days(&self) -> usize {
        self.date_range()
            .map(|(a, b)| (b - a).num_days() as usize + 1)
            .unwrap_or(0)
    }

    pub fn pairs(&self) -> BTreeSet<OdPair> {
        self.records
            .iter()
            .map(|r| OdPair::new(r.origin.clone(), r.destination.clone()))
            .collect()
    }

    /// Per-pair daily totals over the horizon, zero-filled.
    pub fn daily_totals(&self) -> BTreeMap<OdPair, Vec<u64>> {
        let Some((first, _)) = self.date_range() else {
            return BTreeMap::new();
        };
        let days = self.horizon_days();
        let mut out: BTreeMap<OdPair, Vec<u64>> = BTreeMap::new();
        for r in &self.records {
            let day = (r.date - first).num_days() as usize;
            let series = out
                .entry(OdPair::new(r.origin.clone(), r.destination.clone()))
                .or_insert_with(|| vec![0; days]);
            series[day] += r.quantity;
        }
        out
    }

    /// One demand map per day of the horizon (zero entries omitted).
    pub fn daily_demands(&self) -> Vec<DemandMap> {
        let mut days = vec![DemandMap::new(); self.horizon_days()];
        for (pair, series) in self.daily_totals() {
            for (day, &q) in series.iter().enumerate() {
                if q > 0 {
                    days[day].insert(pair.clone(), q);
                }
            }
        }
        days
    }
}

/// Linear-interpolation sample quantile of already sorted data.
pub fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => 0.0,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Truncates at zero and rounds half up.
pub fn to_units(x: f64) -> u64 {
    if x <= 0.0 {
        0
    } else {
        (x + 0.5).floor() as u64
    }
}

/// Gaussian-kernel density estimate of one pair's daily demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairKde {
    samples: Vec<f64>,
    bandwidth: f64,
}

impl PairKde {
    /// Fits the estimator with Silverman's rule,
    /// `0.9 · min(sd, IQR/1.34) · n^(-1/5)`, floored at [`MIN_BANDWIDTH`].
    pub fn fit(samples: Vec<f64>) -> Self {
        assert!(!samples.is_empty(), "estimator needs at least one sample");
        let bandwidth = silverman_bandwidth(&samples);
        PairKde { samples, bandwidth }
    }

    pub fn with_bandwidth(samples: Vec<f64>, bandwidth: f64) -> Self {
        assert!(!samples.is_empty() && bandwidth > 0.0);
        PairKde { samples, bandwidth }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn quantile(&self, q: f64) -> f64 {
        let mut sorted = self.samples.clone();
        sorted.sort_by(f64::total_cmp);
        sorted_quantile(&sorted, q)
    }

    /// Density of the fitted estimate at `x`.
    pub fn density(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * h * self.samples.len() as f64);
        self.samples
            .iter()
            .map(|&s| (-0.5 * ((x - s) / h).powi(2)).exp())
            .sum::<f64>()
            * norm
    }

    /// One continuous draw: a resampled data point plus kernel noise.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let i = rng.random_range(0..self.samples.len());
        let z: f64 = rng.sample(StandardNormal);
        self.samples[i] + self.bandwidth * z
    }
}

fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let sd = if samples.len() > 1 {
        let mean = samples.iter().sum::<f64>() / n;
        (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = (sorted_quantile(&sorted, 0.75) - sorted_quantile(&sorted, 0.25)) / 1.34;
    // a zero IQR with non-zero spread would collapse the kernel; fall back to sd
    let spread = if sd > 0.0 && iqr > 0.0 {
        sd.min(iqr)
    } else {
        sd.max(iqr)
    };
    (0.9 * spread * n.powf(-0.2)).max(MIN_BANDWIDTH)
}

/// Independent per-pair estimators of daily demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandEstimator {
    pairs: BTreeMap<OdPair, PairKde>,
}

impl DemandEstimator {
    pub fn from_pairs(pairs: BTreeMap<OdPair, PairKde>) -> Self {
        DemandEstimator { pairs }
    }

    pub fn pairs(&self) -> &BTreeMap<OdPair, PairKde> {
        &self.pairs
    }

    pub fn get(&self, pair: &OdPair) -> Option<&PairKde> {
        self.pairs.get(pair)
    }

    /// Per-pair empirical quantile of daily demand, rounded to units.
    pub fn quantile_demand(&self, q: f64) -> DemandMap {
        self.pairs
            .iter()
            .map(|(p, kde)| (p.clone(), to_units(kde.quantile(q))))
            .filter(|(_, v)| *v > 0)
            .collect()
    }
}

pub fn fit_demand_estimator(history: &DemandHistory) -> Result<DemandEstimator, ScenarioError> {
    if history.is_empty() {
        return Err(ScenarioError::EmptyHistory);
    }
    let pairs = history
        .daily_totals()
        .into_iter()
        .map(|(pair, series)| {
            (
                pair,
                PairKde::fit(series.into_iter().map(|q| q as f64).collect()),
            )
        })
        .collect();
    Ok(DemandEstimator { pairs })
}

/// Draws `n` demand maps. Pairs are visited in sorted order within each
/// scenario, all from one generator seeded by `seed`.
pub fn sample_demand_scenarios(
    estimator: &DemandEstimator,
    n: usize,
    seed: u64,
) -> Result<Vec<DemandMap>, ScenarioError> {
    if n == 0 {
        return Err(ScenarioError::InvalidCount);
    }
    let mut rng = stream_rng(seed, streams::DEMAND);
    Ok((0..n)
        .map(|_| {
            estimator
                .pairs
                .iter()
                .map(|(p, kde)| (p.clone(), to_units(kde.draw(&mut rng))))
                .filter(|(_, v)| *v > 0)
                .collect()
        })
        .collect())
}

/// Draws `n` disrupted-hub sets; hub `h` is down independently with its
/// disruption rate.
pub fn sample_disruption_scenarios(
    econ: &HubEconomics,
    hubs: &[String],
    n: usize,
    seed: u64,
) -> Result<Vec<BTreeSet<String>>, ScenarioError> {
    if n == 0 {
        return Err(ScenarioError::InvalidCount);
    }
    let rates = hubs
        .iter()
        .map(|h| {
            econ.get(h)
                .map(|c| c.disruption_rate)
                .ok_or_else(|| ScenarioError::UnknownHub(h.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = stream_rng(seed, streams::DISRUPTION);
    Ok((0..n)
        .map(|_| draw_disruptions(hubs, &rates, &mut rng))
        .collect())
}

pub(crate) fn draw_disruptions<R: Rng + ?Sized>(
    hubs: &[String],
    rates: &[f64],
    rng: &mut R,
) -> BTreeSet<String> {
    hubs.iter()
        .zip(rates)
        .filter_map(|(h, &p)| {
            let u: f64 = rng.random();
            (u < p).then(|| h.clone())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StressLevel {
    /// Quantile demand, no disruptions.
    L1Deterministic,
    /// Sampled demand, no disruptions.
    L2StochasticDemand,
    /// Quantile demand, sampled disruptions.
    L3StochasticDisruption,
    /// Sampled demand paired with sampled disruptions.
    L4Integrated,
}

impl StressLevel {
    pub const ALL: [StressLevel; 4] = [
        StressLevel::L1Deterministic,
        StressLevel::L2StochasticDemand,
        StressLevel::L3StochasticDisruption,
        StressLevel::L4Integrated,
    ];

    pub fn number(self) -> u8 {
        match self {
            StressLevel::L1Deterministic => 1,
            StressLevel::L2StochasticDemand => 2,
            StressLevel::L3StochasticDisruption => 3,
            StressLevel::L4Integrated => 4,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        StressLevel::ALL.get((n as usize).wrapping_sub(1)).copied()
    }

    /// Short name of the plan trained at this level.
    pub fn plan_name(self) -> &'static str {
        match self {
            StressLevel::L1Deterministic => "BDN",
            StressLevel::L2StochasticDemand => "SDN",
            StressLevel::L3StochasticDisruption => "SDiN",
            StressLevel::L4Integrated => "ISN",
        }
    }

    pub fn stochastic_demand(self) -> bool {
        matches!(
            self,
            StressLevel::L2StochasticDemand | StressLevel::L4Integrated
        )
    }

    pub fn disruptions(self) -> bool {
        matches!(
            self,
            StressLevel::L3StochasticDisruption | StressLevel::L4Integrated
        )
    }
}

impl fmt::Display for StressLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.number())
    }
}

impl FromStr for StressLevel {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let digits = t.strip_prefix(['L', 'l']).unwrap_or(t);
        if let Some(level) = digits.parse::<u8>().ok().and_then(StressLevel::from_number) {
            return Ok(level);
        }
        StressLevel::ALL
            .into_iter()
            .find(|l| l.plan_name().eq_ignore_ascii_case(t))
            .ok_or_else(|| ScenarioError::UnknownLevel(s.to_string()))
    }
}

impl Serialize for StressLevel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StressLevel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// One joint realization of demand and disrupted hubs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub demand: DemandMap,
    pub disrupted_hubs: BTreeSet<String>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    /// Equally weighted set.
    pub fn uniform(parts: Vec<(DemandMap, BTreeSet<String>)>) -> Self {
        let w = 1.0 / parts.len() as f64;
        ScenarioSet {
            scenarios: parts
                .into_iter()
                .map(|(demand, disrupted_hubs)| Scenario {
                    demand,
                    disrupted_hubs,
                    weight: w,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.scenarios.iter().map(|s| s.weight).sum()
    }

    pub fn pairs(&self) -> BTreeSet<OdPair> {
        self.scenarios
            .iter()
            .flat_map(|s| {
                s.demand
                    .iter()
                    .filter(|(_, &q)| q > 0)
                    .map(|(p, _)| p.clone())
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.scenarios.is_empty() {
            return Err(ScenarioError::EmptySet);
        }
        let total = self.total_weight();
        if (total - 1.0).abs() > 1e-9 || self.scenarios.iter().any(|s| !(s.weight >= 0.0)) {
            return Err(ScenarioError::BadWeights(total));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario sets always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Scenario set of one stress-testing level. Levels 2 and 4 share the demand
/// draws for a given seed, and levels 3 and 4 share the disruption draws.
pub fn build_stress_scenarios(
    level: StressLevel,
    estimator: &DemandEstimator,
    econ: &HubEconomics,
    n: usize,
    demand_quantile: f64,
    seed: u64,
) -> Result<ScenarioSet, ScenarioError> {
    if n == 0 {
        return Err(ScenarioError::InvalidCount);
    }
    if !(demand_quantile > 0.0 && demand_quantile < 1.0) {
        return Err(ScenarioError::InvalidQuantile(demand_quantile));
    }
    let hubs: Vec<String> = econ.iter().map(|(h, _)| h.to_string()).collect();
    let demands = if level.stochastic_demand() {
        sample_demand_scenarios(estimator, n, seed)?
    } else {
        vec![estimator.quantile_demand(demand_quantile); n]
    };
    let disruptions = if level.disruptions() {
        sample_disruption_scenarios(econ, &hubs, n, seed)?
    } else {
        vec![BTreeSet::new(); n]
    };
    Ok(ScenarioSet::uniform(
        demands.into_iter().zip(disruptions).collect(),
    ))
}
