//! Command-line front end: key-rate evaluation and sweeps, protocol simulation
//! batches and Monte Carlo verification of the concentration bounds.
//!
//! Exit codes: 0 success, 1 a violated bound or a runtime failure, 2 a usage or
//! configuration error.

pub mod commands;
pub mod config;
pub mod output;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{RunConfig, CONFIG_ENV};
use output::Format;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] cvqkd::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "cvqkd",
    version,
    about = "Finite-size key rates for continuous-variable QKD"
)]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Key rate at one distance and block size, with the full term breakdown.
    Keyrate(RateArgs),
    /// Key rates over a distance by block-size grid.
    Sweep(SweepArgs),
    /// Seeded batch of end-to-end protocol runs; trial records then a summary line.
    Simulate(SimulateArgs),
    /// Brute-force check of the concentration bounds.
    VerifyBounds(VerifyArgs),
}

fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < u64::MAX as f64 => Ok(v as u64),
        _ => Err(format!("expected a non-negative integer, got {s:?}")),
    }
}

#[derive(Debug, Args)]
pub struct ChannelArgs {
    #[arg(long)]
    pub distance_km: Option<f64>,
    #[arg(long)]
    pub transmittance: Option<f64>,
    #[arg(long)]
    pub excess_noise: Option<f64>,
    #[arg(long)]
    pub modulation_variance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Half the number of exchanged signals; `1e10` notation is accepted.
    #[arg(long, value_parser = parse_count)]
    pub n: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',')]
    pub distances_km: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_count)]
    pub n_values: Option<Vec<u64>>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long, value_parser = parse_count)]
    pub n: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub corrupt_symbols: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Suites to run, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub suites: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub eps_values: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Factor applied to every nominal bound before judging.
    #[arg(long)]
    pub bound_scale: Option<f64>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_channel(cfg: &mut RunConfig, a: &ChannelArgs) {
    if a.distance_km.is_some() {
        cfg.channel.distance_km = a.distance_km;
        cfg.channel.transmittance = None;
    }
    if a.transmittance.is_some() {
        cfg.channel.transmittance = a.transmittance;
    }
    set(&mut cfg.channel.excess_noise, a.excess_noise);
    if a.modulation_variance.is_some() {
        cfg.protocol.modulation_variance = a.modulation_variance;
    }
}

/// File values, then flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    match &cli.command {
        Command::Keyrate(a) => {
            apply_channel(&mut cfg, &a.channel);
            if a.n.is_some() {
                cfg.protocol.n = a.n;
            }
        }
        Command::Sweep(a) => {
            set(&mut cfg.sweep.distances_km, a.distances_km.clone());
            set(&mut cfg.sweep.n_values, a.n_values.clone());
        }
        Command::Simulate(a) => {
            apply_channel(&mut cfg, &a.channel);
            set(&mut cfg.simulate.n, a.n);
            set(&mut cfg.simulate.trials, a.trials);
            set(&mut cfg.simulate.corrupt_symbols, a.corrupt_symbols);
        }
        Command::VerifyBounds(a) => {
            set(&mut cfg.verify.suites, a.suites.clone());
            set(&mut cfg.verify.eps_values, a.eps_values.clone());
            set(&mut cfg.verify.trials, a.trials);
            set(&mut cfg.verify.bound_scale, a.bound_scale);
        }
    }
    Ok(cfg)
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    BoundViolated,
}

/// Runs the parsed command, writing results to `--out` or `stdout`.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<Status, CliError> {
    let cfg = resolve_config(cli)?;
    let mut file = match &cli.out {
        Some(p) => Some(BufWriter::new(File::create(p)?)),
        None => None,
    };
    let out: &mut dyn Write = match file.as_mut() {
        Some(f) => f,
        None => &mut *stdout,
    };
    let mut status = Status::Ok;
    match &cli.command {
        Command::Keyrate(_) => {
            output::write_keyrate(&commands::cmd_keyrate(&cfg)?, cli.format, out)?
        }
        Command::Sweep(_) => output::write_sweep(&commands::cmd_sweep(&cfg)?, cli.format, out)?,
        Command::Simulate(_) => {
            let sim = commands::cmd_simulate(&cfg)?;
            output::write_records(&sim.records, cli.format, out)?;
            out.flush()?;
            output::write_summary(&sim.summary, stdout)?;
        }
        Command::VerifyBounds(_) => {
            let reports = commands::cmd_verify_bounds(&cfg)?;
            output::write_reports(&reports, cli.format, out)?;
            if commands::any_violated(&reports) {
                status = Status::BoundViolated;
            }
        }
    }
    if let Some(f) = file.as_mut() {
        f.flush()?;
    }
    stdout.flush()?;
    Ok(status)
}

/// Parses `args`, runs the command and maps the result to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli, &mut lock) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::BoundViolated) => {
            eprintln!("cvqkd: at least one bound was violated");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("cvqkd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
