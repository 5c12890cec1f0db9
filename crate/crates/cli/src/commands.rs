use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use hubcap::io;
use hubcap::metrics::{
    compare_plans, comparison_csv, comparison_json, compute_network_metrics, NetworkMetrics,
};
use hubcap::network::{build_network, CandidateArcs, Network, RawArc};
use hubcap::saa::verify::check_report;
use hubcap::saa::{
    build_extensive_form, solve, Decomposition, DeploymentPlan, ModelOptions, SolveError,
    SolveOptions, SolveReport,
};
use hubcap::scenario::{
    build_stress_scenarios, fit_demand_estimator, DemandEstimator, DemandMap, ScenarioSet,
    StressLevel,
};
use hubcap::simulator::{run_stress_test, SimulationConfig, StressDemand, StressMatrix};
use hubcap::synth::{generate as synth_generate, SynthConfig};
use hubcap::HubEconomics;

use crate::config::RunConfig;

/// Outcome of a command that finished: optimal, or stopped at a limit with
/// an incumbent on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Finish {
    Done,
    TimedOut,
}

pub struct Instance {
    pub network: Network,
    pub econ: HubEconomics,
    pub estimator: DemandEstimator,
    /// Realized days replayed by the simulator.
    pub days: Vec<DemandMap>,
}

pub fn load(cfg: &RunConfig) -> Result<Instance> {
    let nodes = io::read_nodes(cfg.require("nodes", &cfg.nodes)?)?;
    let econ_path = cfg.require("economics", &cfg.economics)?;
    let econ = io::read_economics(econ_path, cfg.truckload, cfg.capacity_cap)?;
    let history_path = cfg.require("history", &cfg.history)?;
    let history = io::read_demand_history(history_path)?;
    let pairs: Vec<(String, String)> = history
        .pairs()
        .into_iter()
        .map(|p| (p.origin, p.destination))
        .collect();
    let candidates = match &cfg.arcs {
        Some(path) => CandidateArcs::Directed(io::read_arcs(path)?),
        None => CandidateArcs::AutoConnect {
            fleet_cost_rate: cfg.fleet_cost_rate,
        },
    };
    let network = build_network(nodes, candidates, cfg.network_config(), &pairs)
        .context("building the network")?;
    let estimator =
        fit_demand_estimator(&history).with_context(|| history_path.display().to_string())?;
    let mut days = history.daily_demands();
    if let Some(h) = cfg.horizon_days {
        if h > days.len() {
            bail!(
                "{}: horizon_days = {h} exceeds the {} days of history",
                history_path.display(),
                days.len()
            );
        }
        days.truncate(h);
    }
    Ok(Instance {
        network,
        econ,
        estimator,
        days,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    io::write_text(path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn scenario_path(out: &Path, level: StressLevel) -> PathBuf {
    out.join("scenarios").join(format!("{level}.json"))
}

pub fn plan_path(out: &Path, level: StressLevel) -> PathBuf {
    out.join("plans")
        .join(format!("{}.json", level.plan_name()))
}

pub fn report_path(out: &Path, level: StressLevel) -> PathBuf {
    out.join("reports")
        .join(format!("{}.json", level.plan_name()))
}

fn scenarios_for(cfg: &RunConfig, inst: &Instance, level: StressLevel) -> Result<ScenarioSet> {
    Ok(build_stress_scenarios(
        level,
        &inst.estimator,
        &inst.econ,
        cfg.scenario_count,
        cfg.demand_quantile,
        cfg.seed,
    )?)
}

pub fn generate(cfg: &RunConfig, levels: &[StressLevel], out: &Path) -> Result<Finish> {
    let inst = load(cfg)?;
    for &level in levels {
        let set = scenarios_for(cfg, &inst, level)?;
        let path = scenario_path(out, level);
        io::write_scenarios(&path, &set)?;
        println!("wrote {}", path.display());
    }
    Ok(Finish::Done)
}

/// Solves one level, checks the result and writes plan and report.
fn optimize_level(
    cfg: &RunConfig,
    inst: &Instance,
    level: StressLevel,
    set: &ScenarioSet,
    out: &Path,
) -> Result<(SolveReport, Finish)> {
    let options = ModelOptions {
        overflow: cfg.overflow,
        delay_multiplier: cfg.delay_multiplier,
    };
    let model = build_extensive_form(&inst.network, &inst.econ, set, &options)?;
    let solve_opts = SolveOptions {
        gap_tol: cfg.gap_tol,
        time_limit: cfg.time_limit,
        seed: cfg.seed,
        mode: cfg.mode,
        node_limit: None,
        decomposition: Decomposition::Auto,
    };
    let (report, finish) = match solve(&model, &solve_opts) {
        Ok(r) => (r, Finish::Done),
        Err(SolveError::TimedOut(Some(r))) => (*r, Finish::TimedOut),
        Err(e) => {
            return Err(e).with_context(|| format!("solving {level} ({})", level.plan_name()))
        }
    };
    let violations = check_report(&model, &report);
    if !violations.is_empty() {
        bail!(
            "{level} solution failed the constraint check: {}",
            violations.join("; ")
        );
    }
    write(&plan_path(out, level), &(report.plan.to_json() + "\n"))?;
    write(&report_path(out, level), &(report.to_json() + "\n"))?;
    println!(
        "{level} {}: status {:?}, objective {:.6}, gap {:.3e}, nodes {}, active hubs {}, capacity {}",
        level.plan_name(),
        report.status,
        report.objective,
        report.optimality_gap,
        report.node_count,
        report.plan.active_hubs(),
        report.plan.total_capacity()
    );
    Ok((report, finish))
}

pub fn optimize(
    cfg: &RunConfig,
    levels: &[StressLevel],
    scenarios: Option<&Path>,
    out: &Path,
) -> Result<Finish> {
    if scenarios.is_some() && levels.len() != 1 {
        bail!(crate::config::ConfigError {
            origin: "--scenarios".into(),
            message: "needs exactly one --level".into(),
        });
    }
    let inst = load(cfg)?;
    let mut finish = Finish::Done;
    for &level in levels {
        let path = scenarios.map_or_else(|| scenario_path(out, level), Path::to_path_buf);
        let set = io::read_scenarios(&path)?;
        let (_, f) = optimize_level(cfg, &inst, level, &set, out)?;
        if f == Finish::TimedOut {
            finish = f;
        }
    }
    Ok(finish)
}

fn sim_config(cfg: &RunConfig, horizon: usize) -> SimulationConfig {
    SimulationConfig {
        horizon_days: horizon,
        deadline_hours: cfg.deadline_hours,
        delay_multiplier: cfg.delay_multiplier,
        overflow: cfg.overflow,
        amortization: cfg.amortization,
        disruptions: true,
        routing: cfg.sim_routing,
        seed: cfg.seed,
    }
}

fn summary_csv(matrix: &StressMatrix) -> String {
    let mut s = String::from(
        "level,plan,on_time_rate,avg_daily_total_cost,avg_daily_hub_cost,avg_daily_fleet_cost,\
         avg_daily_penalty_cost,demand_units,on_time_units,late_units,unserved_units\n",
    );
    for c in &matrix.cells {
        let r = &c.report;
        s.push_str(&format!(
            "{},{},{:.4},{:.1},{:.1},{:.1},{:.1},{},{},{},{}\n",
            c.level,
            c.plan,
            r.on_time_rate,
            r.avg_daily_total_cost,
            r.avg_daily_hub_cost,
            r.avg_daily_fleet_cost,
            r.avg_daily_penalty_cost,
            r.demand_units,
            r.on_time_units,
            r.late_units,
            r.unserved_units
        ));
    }
    s
}

fn run_simulation(
    cfg: &RunConfig,
    inst: &Instance,
    plans: &[(String, DeploymentPlan)],
    levels: &[StressLevel],
    out: &Path,
) -> Result<StressMatrix> {
    let quantile = inst.estimator.quantile_demand(cfg.demand_quantile);
    let demand = StressDemand {
        realized: &inst.days,
        quantile: &quantile,
    };
    let matrix = run_stress_test(
        plans,
        levels,
        &inst.network,
        &inst.econ,
        demand,
        &sim_config(cfg, inst.days.len()),
    )?;
    write(&out.join("kpi.json"), &(matrix.to_json() + "\n"))?;
    write(&out.join("kpi_days.csv"), &matrix.to_csv())?;
    write(&out.join("kpi_summary.csv"), &summary_csv(&matrix))?;
    Ok(matrix)
}

fn plan_name(path: &Path) -> String {
    path.file_stem().map_or_else(
        || path.display().to_string(),
        |s| s.to_string_lossy().into_owned(),
    )
}

pub fn simulate(
    cfg: &RunConfig,
    plan_files: &[PathBuf],
    levels: &[StressLevel],
    out: &Path,
) -> Result<Finish> {
    let inst = load(cfg)?;
    let mut plans = Vec::new();
    for path in plan_files {
        let plan = io::read_plan(path)?;
        plan.aligned_capacities(&inst.network)
            .and_then(|_| plan.validate(&inst.econ))
            .with_context(|| path.display().to_string())?;
        plans.push((plan_name(path), plan));
    }
    run_simulation(cfg, &inst, &plans, levels, out)?;
    Ok(Finish::Done)
}

fn metrics_csv(rows: &[(String, NetworkMetrics)]) -> String {
    let mut s = String::from("plan,capacity,active_hubs,avg_capacity,connectivity\n");
    for (name, m) in rows {
        s.push_str(&format!(
            "{name},{},{},{:.1},{:.1}\n",
            m.total_throughput_capacity, m.active_hub_count, m.avg_hub_capacity, m.hub_connectivity
        ));
    }
    s
}

fn write_metrics(rows: &[(String, NetworkMetrics)], out: &Path) -> Result<()> {
    let map: BTreeMap<&str, &NetworkMetrics> = rows.iter().map(|(n, m)| (n.as_str(), m)).collect();
    let json = serde_json::to_string_pretty(&map)? + "\n";
    write(&out.join("metrics.json"), &json)?;
    write(&out.join("metrics.csv"), &metrics_csv(rows))
}

/// Metrics of plans given directly or through solve reports; reports also
/// supply the routings used for connectivity.
pub fn metrics(
    cfg: &RunConfig,
    plan_files: &[PathBuf],
    report_files: &[PathBuf],
    out: &Path,
) -> Result<Finish> {
    let inst = load(cfg)?;
    let mut rows = Vec::new();
    for path in report_files {
        let text = io::read_text(path)?;
        let report: SolveReport = serde_json::from_str(&text).map_err(|e| {
            anyhow!(io::IoError::Json {
                path: path.clone(),
                source: e
            })
        })?;
        rows.push((
            plan_name(path),
            compute_network_metrics(
                &report.plan,
                &inst.network,
                &report.routings,
                cfg.degree_scope,
            ),
        ));
    }
    for path in plan_files {
        let plan = io::read_plan(path)?;
        rows.push((
            plan_name(path),
            compute_network_metrics(&plan, &inst.network, &[], cfg.degree_scope),
        ));
    }
    if rows.is_empty() {
        bail!(crate::config::ConfigError {
            origin: "metrics".into(),
            message: "give at least one --plan or --report".into(),
        });
    }
    write_metrics(&rows, out)?;
    Ok(Finish::Done)
}

/// generate, optimize at every level, simulate all plans at all levels and
/// write the comparison table.
pub fn stress_test(cfg: &RunConfig, out: &Path) -> Result<Finish> {
    let inst = load(cfg)?;
    let mut finish = Finish::Done;
    let mut plans = Vec::new();
    let mut metrics = Vec::new();
    for level in StressLevel::ALL {
        let set = scenarios_for(cfg, &inst, level)?;
        let path = scenario_path(out, level);
        io::write_scenarios(&path, &set)?;
        println!("wrote {}", path.display());
        let (report, f) = optimize_level(cfg, &inst, level, &set, out)?;
        if f == Finish::TimedOut {
            finish = f;
        }
        let name = level.plan_name().to_string();
        metrics.push((
            name.clone(),
            compute_network_metrics(
                &report.plan,
                &inst.network,
                &report.routings,
                cfg.degree_scope,
            ),
        ));
        plans.push((name, report.plan));
    }
    write_metrics(&metrics, out)?;
    let matrix = run_simulation(cfg, &inst, &plans, &StressLevel::ALL, out)?;
    let rows = compare_plans(&metrics, &matrix);
    write(&out.join("comparison.csv"), &comparison_csv(&rows))?;
    write(
        &out.join("comparison.json"),
        &(comparison_json(&rows) + "\n"),
    )?;
    Ok(finish)
}

/// Writes a synthetic instance with auto-connected arcs and a matching
/// `run.cfg`.
pub fn synth(c: &SynthConfig, out: &Path) -> Result<Finish> {
    let inst = synth_generate(c)?;
    let pairs: Vec<(String, String)> = inst
        .history
        .pairs()
        .into_iter()
        .map(|p| (p.origin, p.destination))
        .collect();
    let network = build_network(
        inst.nodes.clone(),
        CandidateArcs::AutoConnect {
            fleet_cost_rate: c.fleet_cost_rate,
        },
        c.network,
        &pairs,
    )
    .context("connecting the synthetic instance")?;
    let arcs: Vec<RawArc> = network
        .arcs()
        .iter()
        .map(|a| {
            RawArc::new(
                network.node(a.tail).id.clone(),
                network.node(a.head).id.clone(),
                (a.base_travel_time * 1e4).round() / 1e4,
                a.fleet_cost_rate,
            )
        })
        .collect();
    for (name, result) in [
        (
            "nodes.csv",
            io::write_nodes(&out.join("nodes.csv"), &inst.nodes),
        ),
        ("arcs.csv", io::write_arcs(&out.join("arcs.csv"), &arcs)),
        (
            "economics.csv",
            io::write_economics(&out.join("economics.csv"), &inst.economics),
        ),
        (
            "history.csv",
            io::write_demand_history(&out.join("history.csv"), &inst.history),
        ),
    ] {
        result?;
        println!("wrote {}", out.join(name).display());
    }
    let cfg = format!(
        "# synthetic instance: {} origins, {} hubs, {} destinations, {} days, seed {}\n\
         nodes = nodes.csv\narcs = arcs.csv\neconomics = economics.csv\nhistory = history.csv\n\
         truckload = {}\ncapacity_cap = {}\nmax_leg_hours = {}\nspeed_kmh = {}\nseed = {}\n",
        c.origins,
        c.hubs,
        c.destinations,
        c.days,
        c.seed,
        c.truckload,
        c.capacity_cap,
        c.network.max_leg_hours,
        c.network.speed_kmh,
        c.seed
    );
    write(&out.join("run.cfg"), &cfg)?;
    Ok(Finish::Done)
}
