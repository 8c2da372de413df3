//! Library side of the `oscihom` command-line tool: strict configs, the
//! subcommands and artifact writers.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use commands::Run;
use config::{load, Resolved, NODE_CAP_ENV};
use error::CliError;
use output::{write_csv, write_dat, write_json, Report};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_VERDICT_FAIL: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "oscihom", version, about = "Limits of surface integrals with oscillating periodic densities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON problem spec (optional for `examples`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seed for sampled lattice sums.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Treat undetermined direction classifications as errors.
    #[arg(long, global = true)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Rational/irrational classification of a direction.
    Classify,
    /// Cell average, optionally with a Weyl lattice average.
    Average,
    /// Lower, mean and upper directional averages.
    Triple,
    /// Surface integrals over an epsilon schedule.
    Sweep,
    /// Integrated homogenized bounds along a curve.
    Bounds,
    /// Sweep band against homogenized bounds.
    Sandwich,
    /// Dirichlet problem with oscillating boundary data.
    Dirichlet,
    /// Neumann problem with oscillating flux data.
    Neumann,
    /// The canned reproductions.
    Examples,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Average => "average",
            Command::Triple => "triple",
            Command::Sweep => "sweep",
            Command::Bounds => "bounds",
            Command::Sandwich => "sandwich",
            Command::Dirichlet => "dirichlet",
            Command::Neumann => "neumann",
            Command::Examples => "examples",
        }
    }
}

fn versions() -> Value {
    let core = oscihom::VERSION;
    json!({
        "geometry": core,
        "periodic_field": core,
        "averaging": core,
        "oscillatory_integral": core,
        "pde": core,
        "cli": env!("CARGO_PKG_VERSION"),
    })
}

fn require_config(cli: &Cli) -> Result<&Path, CliError> {
    cli.config.as_deref().ok_or_else(|| CliError::Usage(format!("'{}' needs --config <path>", cli.command.name())))
}

/// Loads the config, runs the command and returns the echoed config with the report.
fn dispatch(cli: &Cli, node_cap_env: Option<&str>) -> Result<(Value, Resolved, Report), CliError> {
    macro_rules! with_config {
        ($ty:ty, $run:path) => {{
            let cfg: $ty = load(require_config(cli)?)?;
            let tol = Resolved::new(cfg.tolerances.as_ref(), node_cap_env)?;
            let run = Run { tol, seed: cli.seed, strict: cli.strict };
            let report = $run(&cfg, &run)?;
            (serde_json::to_value(&cfg).unwrap_or(Value::Null), tol, report)
        }};
    }
    Ok(match cli.command {
        Command::Classify => with_config!(config::ClassifyConfig, commands::classify_cmd),
        Command::Average => with_config!(config::AverageConfig, commands::average_cmd),
        Command::Triple => with_config!(config::TripleConfig, commands::triple_cmd),
        Command::Sweep => with_config!(config::SweepConfig, commands::sweep_cmd),
        Command::Bounds => with_config!(config::BoundsConfig, commands::bounds_cmd),
        Command::Sandwich => with_config!(config::SandwichConfig, commands::sandwich_cmd),
        Command::Dirichlet => with_config!(config::ProblemConfig, commands::dirichlet_cmd),
        Command::Neumann => with_config!(config::ProblemConfig, commands::neumann_cmd),
        Command::Examples => {
            let cfg: config::ExamplesConfig = match &cli.config {
                Some(p) => load(p)?,
                None => Default::default(),
            };
            let tol = Resolved::new(cfg.tolerances.as_ref(), node_cap_env)?;
            let run = Run { tol, seed: cli.seed, strict: cli.strict };
            let report = commands::examples_cmd(&run)?;
            (serde_json::to_value(&cfg).unwrap_or(Value::Null), tol, report)
        }
    })
}

/// Runs one invocation and writes its artifacts; returns the exit code.
pub fn run(cli: &Cli) -> Result<u8, CliError> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // A second call in the same process keeps the existing pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    // Resolve paths before any work is done.
    if let Some(p) = &cli.config {
        if !p.is_file() {
            return Err(CliError::Read {
                path: p.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
            });
        }
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::Write { path: cli.out.clone(), message: e.to_string() })?;
    let out = cli.out.canonicalize().map_err(|e| CliError::Write { path: cli.out.clone(), message: e.to_string() })?;

    let env = std::env::var(NODE_CAP_ENV).ok();
    let (config, tol, report) = dispatch(cli, env.as_deref())?;
    let pass = report.pass();
    let doc = json!({
        "command": cli.command.name(),
        "config": config,
        "seed": cli.seed,
        "strict": cli.strict,
        "versions": versions(),
        "tolerances": tol,
        "result": report.result,
        "verdicts": report.verdicts,
        "pass": pass,
    });
    write_json(&out.join("result.json"), &doc)?;
    write_csv(&out.join("result.csv"), &report.table)?;
    for d in &report.dats {
        write_dat(&out, d)?;
    }
    Ok(if pass { EXIT_PASS } else { EXIT_VERDICT_FAIL })
}
