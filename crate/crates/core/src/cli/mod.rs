//! Command-line front end: `bounds`, `simulate` and `sweep`.

pub mod config;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use crate::bounds;
use crate::model::Integrator;
use crate::sim::{
    self, check_trace, measure_rates, phase_curves, sweep::phase_rows, sweep::write_rows,
    Detection, SimError, SimTrace, SweepRow,
};

use config::{OneOrMany, PlantSection, RunConfig, Scenario};
pub use output::{sig6, BoundsTable};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVARIANT: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "etrate",
    version,
    about = "Event-triggered control over a bounded-delay finite-rate channel"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print every analytic bound for the given parameters.
    Bounds(BoundsArgs),
    /// Run one closed-loop simulation and write the trace and rate report.
    Simulate(SimulateArgs),
    /// Sweep the delay bound and write one CSV row per grid point.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// Plant growth rate A.
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub rho0: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Window factor b > 1.
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Delay model: constant:<d>, uniform[:<seed>], adversarial or replay:<d1,d2,...>.
    #[arg(long)]
    pub delay: Option<String>,
    /// Fixed packet size in bits.
    #[arg(long)]
    pub g: Option<u32>,
    #[arg(long, value_enum)]
    pub detect: Option<DetectArg>,
    #[arg(long, value_enum)]
    pub integrator: Option<IntegratorArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DetectArg {
    Grid,
    Refined,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum IntegratorArg {
    Exact,
    Euler,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Require the packet-size compatibility window (needs nu >= 2).
    #[arg(long)]
    pub assumption1: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub v0: Option<f64>,
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub xhat0: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::usage(e.to_string())
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Bounds(a) => cmd_bounds(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

fn load(common: &CommonArgs, params: &ParamArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path).map_err(CliError::usage)?,
        None => RunConfig::default(),
    };
    if let Some(a) = params.a {
        match &mut cfg.plant {
            Some(p) => p.a = a,
            None if cfg.jordan.is_some() => {
                return Err(CliError::usage("--a applies to scalar plants only"));
            }
            None => {
                cfg.plant = Some(PlantSection {
                    a,
                    b: 1.0,
                    k: 0.0,
                    l: 1.0,
                })
            }
        }
    }
    let t = &mut cfg.trigger;
    t.sigma = params.sigma.or(t.sigma);
    t.rho0 = params.rho0.or(t.rho0);
    t.gamma = params.gamma.unwrap_or(t.gamma);
    t.b = params.b.unwrap_or(t.b);
    t.nu = params.nu.unwrap_or(t.nu);
    if let Some(seed) = common.seed {
        cfg.channel.seed = seed;
    }
    if let Some(step) = common.step {
        cfg.sim.step = step;
    }
    if let Some(h) = common.horizon {
        cfg.sim.horizon = h;
    }
    Ok(cfg)
}

fn apply_run_args(cfg: &mut RunConfig, run: &RunArgs) {
    if let Some(d) = &run.delay {
        cfg.channel.delay = OneOrMany::One(d.clone());
    }
    if let Some(g) = run.g {
        cfg.sim.packet_bits = Some(g);
    }
    if let Some(d) = run.detect {
        cfg.sim.detection = match d {
            DetectArg::Grid => Detection::Grid,
            DetectArg::Refined => Detection::Refined,
        };
    }
    if let Some(i) = run.integrator {
        cfg.sim.integrator = match i {
            IntegratorArg::Exact => Integrator::Exact,
            IntegratorArg::Euler => Integrator::Euler,
        };
    }
}

fn out_dir(common: &CommonArgs) -> Result<Option<PathBuf>, CliError> {
    match &common.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Ok(Some(dir.clone()))
        }
        None => Ok(None),
    }
}

fn cmd_bounds(args: &BoundsArgs) -> Result<i32, CliError> {
    let cfg = load(&args.common, &args.params)?;
    let table = if cfg.is_vector() {
        let p = cfg.vector_bound_inputs().map_err(CliError::usage)?;
        if args.assumption1 {
            return Err(CliError::usage(
                "the packet-size window is defined for scalar plants",
            ));
        }
        BoundsTable::vector(&p)
    } else {
        let p = cfg.bound_inputs().map_err(CliError::usage)?;
        if args.assumption1 {
            if let Err(e) = bounds::assumption1_limits(&p) {
                return Err(CliError::usage(e.to_string()));
            }
            if p.gamma <= 0.0 {
                return Err(CliError::usage("the packet-size window needs gamma > 0"));
            }
        }
        BoundsTable::scalar(&p)
    };
    print!("{}", table.render());
    if let Some(dir) = out_dir(&args.common)? {
        let json =
            serde_json::to_string_pretty(&table).map_err(|e| CliError::usage(e.to_string()))?;
        std::fs::write(dir.join("bounds.json"), json + "\n")?;
    }
    Ok(EXIT_OK)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<i32, CliError> {
    let mut cfg = load(&args.common, &args.params)?;
    apply_run_args(&mut cfg, &args.run);
    if let Some(v0) = args.v0 {
        cfg.trigger.v0 = Some(OneOrMany::One(v0));
    }
    if let Some(x0) = args.x0 {
        cfg.sim.x0 = Some(OneOrMany::One(x0));
    }
    if let Some(xhat0) = args.xhat0 {
        cfg.sim.xhat0 = Some(OneOrMany::One(xhat0));
    }
    let scenario = cfg.scenario().map_err(CliError::usage)?;
    let result = match &scenario {
        Scenario::Scalar(s) => sim::run_scalar(s),
        Scenario::Vector(s) => sim::run_vector(s),
    };
    let dir = out_dir(&args.common)?.unwrap_or_else(|| PathBuf::from("."));
    match result {
        Ok(trace) => {
            let passed = write_run(&dir, &trace, None)?;
            Ok(if passed { EXIT_OK } else { EXIT_INVARIANT })
        }
        Err(SimError::Divergence { t, trace }) => {
            write_run(&dir, &trace, Some(t))?;
            Err(CliError {
                code: EXIT_DIVERGENCE,
                message: format!("state diverged at t = {t}"),
            })
        }
        Err(e) => Err(CliError::usage(e.to_string())),
    }
}

/// Writes `trace.csv`, `events.json` and `report.json`; returns whether all
/// invariants held.
fn write_run(dir: &Path, trace: &SimTrace, diverged_at: Option<f64>) -> Result<bool, CliError> {
    let to_usage = |e: &dyn std::fmt::Display| CliError::usage(e.to_string());
    let file = std::fs::File::create(dir.join("trace.csv"))?;
    trace
        .write_csv(std::io::BufWriter::new(file))
        .map_err(|e| to_usage(&e))?;
    let events = trace.events_json().map_err(|e| to_usage(&e))?;
    std::fs::write(dir.join("events.json"), events + "\n")?;

    let invariants = check_trace(trace);
    let rates = measure_rates(trace).map_err(|e| to_usage(&e))?;
    let report = serde_json::json!({
        "rates": rates,
        "invariants": invariants,
        "flagged_receptions": sim::invariants::flagged_receptions(trace),
        "diverged_at": diverged_at,
    });
    let text = serde_json::to_string_pretty(&report).map_err(|e| to_usage(&e))?;
    std::fs::write(dir.join("report.json"), text + "\n")?;

    println!(
        "triggers {}  bits {}  R_s {}  R_tr {}",
        rates.triggers,
        rates.bits_sent,
        sig6(rates.rs_empirical),
        sig6(rates.rtr_empirical)
    );
    for c in &invariants.checks {
        let verdict = if c.passed() { "ok" } else { "VIOLATED" };
        println!(
            "{:<14}{verdict} ({} checked, {} violations)",
            c.name, c.checked, c.violations
        );
    }
    for w in &trace.warnings {
        eprintln!("warning: {w}");
    }
    Ok(invariants.passed())
}

fn cmd_sweep(args: &SweepArgs) -> Result<i32, CliError> {
    let mut cfg = load(&args.common, &args.params)?;
    apply_run_args(&mut cfg, &args.run);
    let sweep = cfg
        .sweep
        .clone()
        .ok_or_else(|| CliError::usage("sweep needs a [sweep] section"))?;
    let gammas = sweep.gamma.values();
    if gammas.is_empty() {
        return Err(CliError::usage("the gamma grid is empty"));
    }
    let rows: Vec<SweepRow> = if sweep.simulate {
        let Scenario::Scalar(base) = cfg.scenario().map_err(CliError::usage)? else {
            return Err(CliError::usage("simulated sweeps need a scalar [plant]"));
        };
        sim::sweep_gamma(&base, &gammas).map_err(|e| CliError::usage(e.to_string()))?
    } else {
        let base = cfg.bound_inputs().map_err(CliError::usage)?;
        let family = sweep.rho0.clone().unwrap_or_else(|| vec![base.rho0]);
        let sigma_grid = sweep.sigma_sup.as_ref().map(|g| g.values());
        let mut rows = Vec::new();
        for rho0 in family {
            let p = base.with_rho0(rho0);
            p.validate().map_err(|e| CliError::usage(e.to_string()))?;
            let curve = phase_curves(&p, &gammas, sigma_grid.as_deref())
                .map_err(|e| CliError::usage(e.to_string()))?;
            rows.extend(phase_rows(&curve));
        }
        rows
    };
    let dir = out_dir(&args.common)?.unwrap_or_else(|| PathBuf::from("."));
    let file = std::fs::File::create(dir.join("sweep.csv"))?;
    write_rows(&rows, std::io::BufWriter::new(file)).map_err(|e| CliError::usage(e.to_string()))?;

    let ok = rows.iter().filter(|r| r.succeeded()).count();
    println!("{} rows, {} failed", rows.len(), rows.len() - ok);
    for r in rows.iter().filter(|r| !r.succeeded()) {
        eprintln!("gamma {}: {}", r.gamma, r.errors);
    }
    if ok > 0 {
        Ok(EXIT_OK)
    } else if rows.iter().any(|r| r.errors.starts_with("diverged")) {
        Ok(EXIT_DIVERGENCE)
    } else {
        Ok(EXIT_USAGE)
    }
}
