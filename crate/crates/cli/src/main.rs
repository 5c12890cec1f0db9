//! `hubcap` command-line pipeline.
//!
//! Exit codes: 0 success, 2 solver stopped at its limit with an incumbent,
//! 3 infeasible or unreachable demand, 64 usage or config error, 74 I/O
//! error, 1 anything else.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use hubcap::io::IoError;
use hubcap::network::NetworkConfig;
use hubcap::saa::SolveError;
use hubcap::scenario::StressLevel;
use hubcap::simulator::SimulationError;
use hubcap::synth::SynthConfig;

use commands::Finish;
use config::{ConfigError, RunConfig};

#[derive(Parser)]
#[command(
    name = "hubcap",
    version,
    about = "Hub throughput capacity deployment and stress testing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic instance (nodes, arcs, economics, history, run.cfg).
    Synth(SynthCmd),
    /// Write one scenario set per stress level.
    Generate {
        #[command(flatten)]
        run: RunArgs,
        /// Levels to generate (1-4); all by default.
        #[arg(long, value_parser = parse_level)]
        level: Vec<StressLevel>,
    },
    /// Solve the deployment model for the given levels.
    Optimize {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_parser = parse_level)]
        level: Vec<StressLevel>,
        /// Scenario set to solve instead of OUT/scenarios/L<n>.json.
        #[arg(long)]
        scenarios: Option<PathBuf>,
    },
    /// Roll plans out day by day at the given evaluation levels.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_parser = parse_level)]
        level: Vec<StressLevel>,
        /// Plan JSON files; each plan is named after its file stem.
        #[arg(long = "plan", required = true)]
        plans: Vec<PathBuf>,
    },
    /// Capacity and connectivity metrics of plans or solve reports.
    Metrics {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long = "plan")]
        plans: Vec<PathBuf>,
        #[arg(long = "report")]
        reports: Vec<PathBuf>,
    },
    /// generate, optimize all four levels, simulate and compare.
    StressTest {
        #[command(flatten)]
        run: RunArgs,
    },
}

fn parse_level(s: &str) -> Result<StressLevel, String> {
    s.parse()
        .map_err(|e: hubcap::scenario::ScenarioError| e.to_string())
}

/// Flags shared by the pipeline commands. Each one overrides the config key
/// of the same name (dashes become underscores).
#[derive(Args)]
struct RunArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: out, or the config's `out`].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    nodes: Option<String>,
    #[arg(long)]
    arcs: Option<String>,
    #[arg(long)]
    economics: Option<String>,
    #[arg(long)]
    history: Option<String>,
    #[arg(long)]
    truckload: Option<String>,
    #[arg(long)]
    capacity_cap: Option<String>,
    #[arg(long)]
    max_leg_hours: Option<String>,
    #[arg(long)]
    speed_kmh: Option<String>,
    #[arg(long)]
    fleet_cost_rate: Option<String>,
    #[arg(long)]
    delay_multiplier: Option<String>,
    #[arg(long)]
    demand_quantile: Option<String>,
    #[arg(long)]
    scenario_count: Option<String>,
    #[arg(long)]
    gap_tol: Option<String>,
    /// Seconds, or `none`.
    #[arg(long)]
    time_limit: Option<String>,
    #[arg(long)]
    horizon_days: Option<String>,
    #[arg(long)]
    deadline_hours: Option<String>,
    /// `auto`, `none` or a cost per unserved unit.
    #[arg(long)]
    overflow_penalty: Option<String>,
    /// `exact` or `heuristic`.
    #[arg(long)]
    mode: Option<String>,
    /// `all` or `hubs`.
    #[arg(long)]
    degree_scope: Option<String>,
    /// `amortize` or `operational`.
    #[arg(long)]
    amortization: Option<String>,
    /// `exact` or `rounded`.
    #[arg(long)]
    sim_routing: Option<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<(RunConfig, PathBuf)> {
        let (mut cfg, cfg_out) = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => (RunConfig::default(), None),
        };
        let flags = [
            ("seed", &self.seed),
            ("nodes", &self.nodes),
            ("arcs", &self.arcs),
            ("economics", &self.economics),
            ("history", &self.history),
            ("truckload", &self.truckload),
            ("capacity_cap", &self.capacity_cap),
            ("max_leg_hours", &self.max_leg_hours),
            ("speed_kmh", &self.speed_kmh),
            ("fleet_cost_rate", &self.fleet_cost_rate),
            ("delay_multiplier", &self.delay_multiplier),
            ("demand_quantile", &self.demand_quantile),
            ("scenario_count", &self.scenario_count),
            ("gap_tol", &self.gap_tol),
            ("time_limit", &self.time_limit),
            ("horizon_days", &self.horizon_days),
            ("deadline_hours", &self.deadline_hours),
            ("overflow_penalty", &self.overflow_penalty),
            ("mode", &self.mode),
            ("degree_scope", &self.degree_scope),
            ("amortization", &self.amortization),
            ("sim_routing", &self.sim_routing),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v.trim(), Path::new(""))
                    .map_err(|message| ConfigError {
                        origin: format!("--{}", key.replace('_', "-")),
                        message,
                    })?;
            }
        }
        let out = self
            .out
            .clone()
            .or(cfg_out)
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok((cfg, out))
    }
}

#[derive(Args)]
struct SynthCmd {
    #[arg(long, default_value_t = 3)]
    origins: usize,
    #[arg(long, default_value_t = 5)]
    hubs: usize,
    #[arg(long, default_value_t = 6)]
    destinations: usize,
    #[arg(long, default_value_t = 30)]
    days: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "synth")]
    out: PathBuf,
    #[arg(long)]
    fixed_cost: Option<f64>,
    #[arg(long)]
    unit_capacity_cost: Option<f64>,
    #[arg(long)]
    disruption_rate: Option<f64>,
    #[arg(long)]
    fleet_cost_rate: Option<f64>,
    #[arg(long)]
    mean_daily_demand: Option<f64>,
    #[arg(long)]
    truckload: Option<u32>,
    #[arg(long)]
    capacity_cap: Option<u32>,
    #[arg(long)]
    max_leg_hours: Option<f64>,
    #[arg(long)]
    speed_kmh: Option<f64>,
}

impl SynthCmd {
    fn config(&self) -> Result<SynthConfig> {
        let usage = |message: String| ConfigError {
            origin: "synth".into(),
            message,
        };
        if self.origins == 0 || self.hubs == 0 || self.destinations == 0 || self.days == 0 {
            return Err(usage(
                "--origins, --hubs, --destinations and --days must be at least 1".into(),
            )
            .into());
        }
        let d = SynthConfig::default();
        let rate = self.disruption_rate.unwrap_or(d.disruption_rate);
        if !(0.0..=1.0).contains(&rate) {
            return Err(usage(format!("--disruption-rate must lie in [0, 1], got {rate}")).into());
        }
        Ok(SynthConfig {
            origins: self.origins,
            hubs: self.hubs,
            destinations: self.destinations,
            days: self.days,
            seed: self.seed,
            network: NetworkConfig {
                max_leg_hours: self.max_leg_hours.unwrap_or(d.network.max_leg_hours),
                speed_kmh: self.speed_kmh.unwrap_or(d.network.speed_kmh),
                ..d.network
            },
            fixed_cost: self.fixed_cost.unwrap_or(d.fixed_cost),
            unit_capacity_cost: self.unit_capacity_cost.unwrap_or(d.unit_capacity_cost),
            disruption_rate: rate,
            fleet_cost_rate: self.fleet_cost_rate.unwrap_or(d.fleet_cost_rate),
            mean_daily_demand: self.mean_daily_demand.unwrap_or(d.mean_daily_demand),
            truckload: self.truckload.unwrap_or(d.truckload),
            capacity_cap: self.capacity_cap.unwrap_or(d.capacity_cap),
            ..d
        })
    }
}

fn levels_or_all(levels: Vec<StressLevel>) -> Vec<StressLevel> {
    if levels.is_empty() {
        StressLevel::ALL.to_vec()
    } else {
        let mut l = levels;
        l.sort();
        l.dedup();
        l
    }
}

fn run(cli: Cli) -> Result<Finish> {
    match cli.command {
        Command::Synth(cmd) => commands::synth(&cmd.config()?, &cmd.out),
        Command::Generate { run, level } => {
            let (cfg, out) = run.resolve()?;
            commands::generate(&cfg, &levels_or_all(level), &out)
        }
        Command::Optimize {
            run,
            level,
            scenarios,
        } => {
            let (cfg, out) = run.resolve()?;
            commands::optimize(&cfg, &levels_or_all(level), scenarios.as_deref(), &out)
        }
        Command::Simulate { run, level, plans } => {
            let (cfg, out) = run.resolve()?;
            commands::simulate(&cfg, &plans, &levels_or_all(level), &out)
        }
        Command::Metrics {
            run,
            plans,
            reports,
        } => {
            let (cfg, out) = run.resolve()?;
            commands::metrics(&cfg, &plans, &reports, &out)
        }
        Command::StressTest { run } => {
            let (cfg, out) = run.resolve()?;
            commands::stress_test(&cfg, &out)
        }
    }
}

fn solve_code(e: &SolveError) -> u8 {
    match e {
        SolveError::Infeasible | SolveError::UnreachableDemand(_) => 3,
        SolveError::TimedOut(_) => 2,
        _ => 1,
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 64;
        }
        if cause.is::<IoError>() {
            return 74;
        }
        if let Some(e) = cause.downcast_ref::<SolveError>() {
            return solve_code(e);
        }
        if let Some(SimulationError::Plan(e)) = cause.downcast_ref::<SimulationError>() {
            return solve_code(e);
        }
    }
    1
}

/// The error chain joined by `: `, skipping causes already quoted by the
/// message above them.
fn describe(err: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !text.contains(&msg) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&msg);
        }
    }
    text
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 64 } else { 0 });
        }
    };
    match run(cli) {
        Ok(Finish::Done) => ExitCode::SUCCESS,
        Ok(Finish::TimedOut) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}
