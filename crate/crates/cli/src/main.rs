use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use wheelrotor_core::config::{ConfigError, VehicleConfig};
use wheelrotor_core::log::{export_csv, LogError, SimLog};
use wheelrotor_core::metrics::{integrate_energy, noise_percentages, power_efficiency, round2, MetricsError};
use wheelrotor_core::mixcheck::mixcheck;
use wheelrotor_core::scenario::{run_scenario, Scenario, ScenarioError};

/// Process exit codes.
mod code {
    pub const SIM_FAILURE: u8 = 1;
    pub const INVALID_INPUT: u8 = 3;
    pub const IO: u8 = 4;
}

/// Largest mixer round-trip error accepted by `mixcheck`.
const MIXCHECK_TOLERANCE: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "wheelrotor", version, about = "Tilt-rotor / wheeled balancer simulator", arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and optionally write its CSV log.
    Sim {
        #[arg(long)]
        scenario: PathBuf,
        /// Vehicle config; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Round-trip the mixer over seeded random wrenches.
    Mixcheck {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Power efficiency, noise percentages, or energy of a logged run.
    Metrics(MetricsArgs),
    /// Check a config file (and optionally a scenario against it).
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

#[derive(Args)]
struct MetricsArgs {
    /// CSV log written by `sim --out`.
    #[arg(long, conflicts_with_all = ["pa", "pg", "ambient", "ground", "aerial"])]
    log: Option<PathBuf>,
    /// Aerial power (W).
    #[arg(long, requires = "pg")]
    pa: Option<f64>,
    /// Ground power (W).
    #[arg(long, requires = "pa")]
    pg: Option<f64>,
    /// Ambient noise (dB).
    #[arg(long, requires_all = ["ground", "aerial"])]
    ambient: Option<f64>,
    /// Ground-mode noise (dB).
    #[arg(long, requires_all = ["ambient", "aerial"])]
    ground: Option<f64>,
    /// Aerial-mode noise (dB).
    #[arg(long, requires_all = ["ambient", "ground"])]
    aerial: Option<f64>,
    #[arg(long)]
    json: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let code = if matches!(e, ConfigError::Io { .. }) { code::IO } else { code::INVALID_INPUT };
        Self::new(code, e.to_string())
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let code = if matches!(e, ScenarioError::Io(_)) { code::IO } else { code::INVALID_INPUT };
        Self::new(code, e.to_string())
    }
}

impl From<LogError> for Failure {
    fn from(e: LogError) -> Self {
        let code = if matches!(e, LogError::Io(_)) { code::IO } else { code::INVALID_INPUT };
        Self::new(code, e.to_string())
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        Self::new(code::INVALID_INPUT, e.to_string())
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<VehicleConfig<f64>, Failure> {
    Ok(match path {
        Some(p) => VehicleConfig::load(p)?,
        None => VehicleConfig::default(),
    })
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json value serializes"));
}

fn sim(scenario: &PathBuf, config: Option<&PathBuf>, out: Option<&PathBuf>, as_json: bool) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let sc = Scenario::load(scenario)?;
    let log = run_scenario(&sc, &cfg)?;
    if let Some(path) = out {
        export_csv(&log, path)?;
    }
    let energy = integrate_energy(&log).ok();
    let end = log.rows.last().map_or(0.0, |r| r.t);
    if as_json {
        print_json(&json!({
            "scenario": sc.name,
            "rows": log.len(),
            "end_time_s": end,
            "terminal": log.terminal,
            "energy": energy,
        }));
    } else {
        println!("scenario: {}", sc.name);
        println!("rows: {}", log.len());
        println!("end time: {end} s");
        if let Some(e) = energy {
            println!("energy: {:.6} Wh", e.energy_wh);
        }
        println!("status: {}", log.terminal.as_deref().unwrap_or("ok"));
    }
    match &log.terminal {
        Some(ev) => Err(Failure::new(code::SIM_FAILURE, format!("simulation ended early: {ev}"))),
        None => Ok(()),
    }
}

fn run_mixcheck(samples: usize, seed: u64, config: Option<&PathBuf>, as_json: bool) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let r = mixcheck(samples, seed, &cfg.vehicle);
    let pass = r.max_rel_error < MIXCHECK_TOLERANCE;
    if as_json {
        print_json(&json!({ "report": r, "tolerance": MIXCHECK_TOLERANCE, "pass": pass }));
    } else {
        println!("samples: {}", r.samples);
        println!("seed: {}", r.seed);
        println!("max round-trip error: {:e}", r.max_rel_error);
        println!("saturated: {}", r.saturated);
        println!("result: {}", if pass { "pass" } else { "fail" });
    }
    if pass {
        Ok(())
    } else {
        Err(Failure::new(code::SIM_FAILURE, format!("round-trip error {:e} exceeds {MIXCHECK_TOLERANCE:e}", r.max_rel_error)))
    }
}

fn metrics(a: &MetricsArgs) -> Result<(), Failure> {
    if let Some(path) = &a.log {
        let log = SimLog::load_csv(path)?;
        let r = integrate_energy(&log)?;
        if a.json {
            print_json(&json!(r));
        } else {
            println!("duration: {} s", r.duration_s);
            println!("energy: {:.6} Wh", r.energy_wh);
            println!("aerial energy: {:.6} Wh", r.aerial_energy_wh);
            println!("ground energy: {:.6} Wh", r.ground_energy_wh);
            if let Some(p) = r.p_aerial {
                println!("mean aerial power: {p:.2} W");
            }
            if let Some(p) = r.p_ground {
                println!("mean ground power: {p:.2} W");
            }
            if let Some(e) = r.efficiency_pct {
                println!("efficiency: {e:.2}%");
            }
        }
        return Ok(());
    }
    let mut out = serde_json::Map::new();
    let mut any = false;
    if let (Some(pa), Some(pg)) = (a.pa, a.pg) {
        let e = power_efficiency(pa, pg)?;
        any = true;
        out.insert("efficiency_pct".into(), json!(round2(e)));
        if !a.json {
            println!("efficiency: {e:.2}%");
        }
    }
    if let (Some(amb), Some(gr), Some(ae)) = (a.ambient, a.ground, a.aerial) {
        let n = noise_percentages(amb, gr, ae)?;
        any = true;
        out.insert("noise_reduction_pct".into(), json!(round2(n.ground_vs_aerial_reduction_pct)));
        out.insert("noise_increase_pct".into(), json!(round2(n.ground_vs_ambient_increase_pct)));
        if !a.json {
            println!("noise reduction vs aerial: {:.2}%", n.ground_vs_aerial_reduction_pct);
            println!("noise increase vs ambient: {:.2}%", n.ground_vs_ambient_increase_pct);
        }
    }
    if !any {
        return Err(Failure::new(2, "metrics needs --log, --pa/--pg, or --ambient/--ground/--aerial"));
    }
    if a.json {
        print_json(&serde_json::Value::Object(out));
    }
    Ok(())
}

fn validate(config: &PathBuf, scenario: Option<&PathBuf>) -> Result<(), Failure> {
    let cfg = VehicleConfig::load(config)?;
    if let Some(path) = scenario {
        Scenario::load(path)?.validate(&cfg)?;
    }
    println!("ok");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sim { scenario, config, out, json } => sim(scenario, config.as_ref(), out.as_ref(), *json),
        Command::Mixcheck { samples, seed, config, json } => run_mixcheck(*samples, *seed, config.as_ref(), *json),
        Command::Metrics(a) => metrics(a),
        Command::Validate { config, scenario } => validate(config, scenario.as_ref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
