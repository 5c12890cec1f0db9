//! Reading and writing the on-disk formats. Every error names the file.
//!
//! | file | columns / shape |
//! |---|---|
//! | nodes | `id,kind,lat,lon` |
//! | arcs | `tail,head,travel_time_hours,fleet_cost_rate` |
//! | economics | `hub_id,fixed_cost,unit_capacity_cost,disruption_rate` |
//! | demand history | `date,origin,destination,quantity` |
//! | scenarios | `{"scenarios":[{"demand":{"O1->D1":5},"disrupted_hubs":["H3"],"weight":0.02}]}` |
//! | plan | `{"hubs":[{"hub":"H1","open":true,"capacity":12}]}` |

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::economics::{HubCost, HubEconomics};
use crate::network::{Node, RawArc};
use crate::saa::DeploymentPlan;
use crate::scenario::{DemandHistory, DemandRecord, ScenarioSet};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", .path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {source}", .path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{}: {message}", .path.display())]
    Invalid { path: PathBuf, message: String },
}

impl IoError {
    pub fn path(&self) -> &Path {
        match self {
            IoError::Io { path, .. }
            | IoError::Csv { path, .. }
            | IoError::Json { path, .. }
            | IoError::Invalid { path, .. } => path,
        }
    }
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|source| IoError::Csv {
            path: path.to_path_buf(),
            source,
        })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|source| IoError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    }
    let bytes = w.into_inner().map_err(|e| IoError::Io {
        path: path.to_path_buf(),
        source: e.into_error(),
    })?;
    write_bytes(path, &bytes)
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `bytes`, creating parent directories.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let wrap = |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(wrap)?;
    }
    fs::write(path, bytes).map_err(wrap)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    write_bytes(path, text.as_bytes())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    serde_json::from_str(&read_text(path)?).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_nodes(path: &Path) -> Result<Vec<Node>, IoError> {
    read_csv(path)
}

pub fn write_nodes(path: &Path, nodes: &[Node]) -> Result<(), IoError> {
    write_csv(path, nodes)
}

pub fn read_arcs(path: &Path) -> Result<Vec<RawArc>, IoError> {
    read_csv(path)
}

pub fn write_arcs(path: &Path, arcs: &[RawArc]) -> Result<(), IoError> {
    write_csv(path, arcs)
}

#[derive(Debug, Serialize, Deserialize)]
struct EconomicsRow {
    hub_id: String,
    fixed_cost: f64,
    unit_capacity_cost: f64,
    disruption_rate: f64,
}

/// Hub economics; the truckload `m` and capacity cap `b` are run settings,
/// not columns.
pub fn read_economics(
    path: &Path,
    truckload: u32,
    capacity_cap: u32,
) -> Result<HubEconomics, IoError> {
    let rows: Vec<EconomicsRow> = read_csv(path)?;
    HubEconomics::new(
        rows.into_iter().map(|r| {
            (
                r.hub_id,
                HubCost {
                    fixed_cost: r.fixed_cost,
                    unit_capacity_cost: r.unit_capacity_cost,
                    disruption_rate: r.disruption_rate,
                },
            )
        }),
        truckload,
        capacity_cap,
    )
    .map_err(|e| IoError::Invalid {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_economics(path: &Path, econ: &HubEconomics) -> Result<(), IoError> {
    let rows: Vec<EconomicsRow> = econ
        .iter()
        .map(|(h, c)| EconomicsRow {
            hub_id: h.to_string(),
            fixed_cost: c.fixed_cost,
            unit_capacity_cost: c.unit_capacity_cost,
            disruption_rate: c.disruption_rate,
        })
        .collect();
    write_csv(path, &rows)
}

pub fn read_demand_history(path: &Path) -> Result<DemandHistory, IoError> {
    let records: Vec<DemandRecord> = read_csv(path)?;
    if records.is_empty() {
        return Err(IoError::Invalid {
            path: path.to_path_buf(),
            message: "no demand records".into(),
        });
    }
    Ok(DemandHistory::new(records))
}

pub fn write_demand_history(path: &Path, history: &DemandHistory) -> Result<(), IoError> {
    write_csv(path, history.records())
}

pub fn read_scenarios(path: &Path) -> Result<ScenarioSet, IoError> {
    let set: ScenarioSet = read_json(path)?;
    set.validate().map_err(|e| IoError::Invalid {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(set)
}

pub fn write_scenarios(path: &Path, set: &ScenarioSet) -> Result<(), IoError> {
    write_text(path, &(set.to_json() + "\n"))
}

pub fn read_plan(path: &Path) -> Result<DeploymentPlan, IoError> {
    read_json(path)
}

pub fn write_plan(path: &Path, plan: &DeploymentPlan) -> Result<(), IoError> {
    write_text(path, &(plan.to_json() + "\n"))
}
