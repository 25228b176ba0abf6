//! Command-line front end for the `mehler-core` kernels, geodesics,
//! Riccati coefficients and verification suites.
//!
//! Exit codes: 0 success, 1 verification failure, 2 config error,
//! 3 singular time, 4 singular `D`.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{Format, RunConfig, Task};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "mehler", version, about = "Closed-form heat kernels, geodesics and Riccati coefficients")]
pub struct Cli {
    /// JSON run configuration
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Seed for the verification suites (default 42)
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Kernel values on a grid
    Kernel,
    /// Sampled geodesic with its energy and action
    Geodesic,
    /// Riccati coefficients at the configured times
    Riccati,
    /// Run verification suites; exits 1 if any sample fails
    Verify {
        /// Suites to run (all when neither these nor the config name any)
        suites: Vec<String>,
    },
    /// The Gaussian, Mehler and Ornstein–Uhlenbeck specializations
    Examples,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Kernel => "kernel",
            Command::Geodesic => "geodesic",
            Command::Riccati => "riccati",
            Command::Verify { .. } => "verify",
            Command::Examples => "examples",
        }
    }
}

pub const DEFAULT_SEED: u64 = 42;

/// Caps the global thread pool from `MEHLER_THREADS`.
pub fn configure_threads(value: Option<&str>) -> Result<(), CliError> {
    let Some(v) = value else { return Ok(()) };
    let threads: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("MEHLER_THREADS must be a positive integer, got '{v}'")))?;
    // a second initialization in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn load_config(path: &Option<PathBuf>) -> Result<Option<RunConfig>, CliError> {
    let Some(path) = path else { return Ok(None) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::from_json(&text).map(Some)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let config = load_config(&cli.config)?;
    if let Some(cfg) = &config {
        let wanted = cli.command.name();
        if !matches!(cli.command, Command::Examples) && cfg.task.kind() != wanted {
            return Err(CliError::Config(format!(
                "config describes a {} task but the {wanted} command was given",
                cfg.task.kind()
            )));
        }
    }
    let out = cli.out.clone().or_else(|| config.as_ref().and_then(|c| c.output.path.clone()));
    let format_or = |default: Format| cli.format.or(config.as_ref().and_then(|c| c.output.format)).unwrap_or(default);
    let require = || config.as_ref().ok_or_else(|| CliError::Config(format!("{} needs --config", cli.command.name())));

    let text = match &cli.command {
        Command::Kernel => {
            let cfg = require()?;
            let Task::Kernel { x0, axes, times } = &cfg.task else { unreachable!("task kind checked") };
            commands::kernel(&cfg.operator_spec()?, x0, axes, times, format_or(Format::Csv))?
        }
        Command::Geodesic => {
            let cfg = require()?;
            let Task::Geodesic { x0, x1, t, samples } = &cfg.task else { unreachable!("task kind checked") };
            commands::geodesic(&cfg.operator_spec()?, x0, x1, *t, *samples, format_or(Format::Csv))?
        }
        Command::Riccati => {
            let cfg = require()?;
            let Task::Riccati { times } = &cfg.task else { unreachable!("task kind checked") };
            commands::riccati(&cfg.operator_spec()?, times, format_or(Format::Json))?
        }
        Command::Verify { suites } => {
            let names = match (&config, suites.is_empty()) {
                (Some(RunConfig { task: Task::Verify { suites: listed }, .. }), true) => listed.clone(),
                _ => suites.clone(),
            };
            let names = commands::parse_suites(&names)?;
            let seed = cli.seed.or(config.as_ref().and_then(|c| c.seed)).unwrap_or(DEFAULT_SEED);
            let (text, reports) = commands::verify(&names, seed, format_or(Format::Json))?;
            output::emit(out.as_deref(), &text)?;
            for r in &reports {
                eprintln!(
                    "{} {}: {} samples, {} failing, max rel {:.3e}, {:.2} s",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.suite,
                    r.summary.count,
                    r.summary.failures,
                    r.summary.max,
                    r.elapsed_seconds.unwrap_or(0.0),
                );
            }
            let failed: Vec<String> = reports
                .iter()
                .filter(|r| !r.pass)
                .map(|r| format!("{} ({})", r.suite, r.failing_labels().join(", ")))
                .collect();
            if failed.is_empty() {
                return Ok(());
            }
            return Err(CliError::VerificationFailed(failed.join("; ")));
        }
        Command::Examples => commands::examples(format_or(Format::Csv))?,
    };
    output::emit(out.as_deref(), &text)
}
