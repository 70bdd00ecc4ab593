//! Command-line front end for the decoy-state security analysis library.
//!
//! Exit codes: 0 when the requested analysis yields a secure key (or the
//! command has no security verdict), 1 on usage or data errors, 2 when the
//! analysis finds no secure key, 3 when the consistency check flags a
//! statistical anomaly (takes priority over 2).

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use decoyqkd::optimize::GridResolution;

mod commands;
mod io;

#[derive(Parser)]
#[command(
    name = "decoyqkd",
    version,
    about = "Decoy-state QKD security analysis: rate bounds, simulation, optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute secure-key bounds from a signal/decoy measurement CSV
    Analyze(AnalyzeArgs),
    /// Simulate a pulse-by-pulse session from a JSON config
    Simulate(SimulateArgs),
    /// Search signal/decoy intensities and decoy fraction for the best rate
    Optimize(OptimizeArgs),
    /// Tabulate secure rate versus fiber distance as CSV
    Sweep(SweepArgs),
    /// Recover channel parameters from a signal/decoy measurement CSV
    Fit(FitArgs),
}

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Measurement CSV: label,mean_photons,n_sent,n_detected,n_error
    pub input: PathBuf,
    /// Protocol efficiency factor (basis sifting and duty cycle)
    #[arg(long, default_value_t = 0.4478)]
    pub q: f64,
    /// Error-correction inefficiency relative to the Shannon limit
    #[arg(long, default_value_t = 1.22)]
    pub f_ec: f64,
    /// Statistical confidence width in standard deviations; 0 = asymptotic
    #[arg(long, default_value_t = 10.0)]
    pub u_alpha: f64,
    /// Wall-clock duration represented by the data, for the bit/s figure
    #[arg(long, default_value_t = 1.0)]
    pub session_seconds: f64,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Session config JSON; falls back to $DECOYQKD_CONFIG
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the seed in the config
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the per-intensity tally as CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct OptimizeArgs {
    /// Channel model JSON
    #[arg(long)]
    pub channel: PathBuf,
    /// Total pulses in the session budget
    #[arg(long, default_value_t = 105_000_000)]
    pub n_total: u64,
    #[arg(long, default_value_t = 0.4478)]
    pub q: f64,
    #[arg(long, default_value_t = 1.22)]
    pub f_ec: f64,
    #[arg(long, default_value_t = 10.0)]
    pub u_alpha: f64,
    /// Signal intensity search interval, as lo:hi
    #[arg(long, value_parser = parse_range, default_value = "0.05:1.0")]
    pub mu_range: (f64, f64),
    /// Decoy intensity search interval, as lo:hi
    #[arg(long, value_parser = parse_range, default_value = "0.01:0.5")]
    pub nu_range: (f64, f64),
    /// Decoy pulse fraction search interval, as lo:hi
    #[arg(long, value_parser = parse_range, default_value = "0.01:0.5")]
    pub fraction_range: (f64, f64),
    /// Coarse grid resolution, as MUxNUxFRACTION points
    #[arg(long, value_parser = parse_grid, default_value = "40x40x20")]
    pub grid: GridResolution,
    /// Write the optimum as a one-row CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SweepArgs {
    /// Channel model JSON; its distance field is overridden per row
    #[arg(long)]
    pub channel: PathBuf,
    #[arg(long, value_enum, default_value_t = ProtocolArg::OneDecoy)]
    pub protocol: ProtocolArg,
    /// Fixed reuses --mu/--nu/--fraction at every distance
    #[arg(long, value_enum, default_value_t = SweepModeArg::Fixed)]
    pub mode: SweepModeArg,
    #[arg(long, default_value_t = 0.80)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.12)]
    pub nu: f64,
    /// Fraction of pulses sent at the decoy intensity
    #[arg(long, default_value_t = 0.10)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0.0)]
    pub d_min: f64,
    #[arg(long, default_value_t = 60.0)]
    pub d_max: f64,
    /// Distance step in km
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
    #[arg(long, default_value_t = 105_000_000)]
    pub n_total: u64,
    #[arg(long, default_value_t = 0.4478)]
    pub q: f64,
    #[arg(long, default_value_t = 1.22)]
    pub f_ec: f64,
    #[arg(long, default_value_t = 10.0)]
    pub u_alpha: f64,
    #[arg(long, value_parser = parse_range, default_value = "0.05:1.0")]
    pub mu_range: (f64, f64),
    #[arg(long, value_parser = parse_range, default_value = "0.01:0.5")]
    pub nu_range: (f64, f64),
    #[arg(long, value_parser = parse_range, default_value = "0.01:0.5")]
    pub fraction_range: (f64, f64),
    #[arg(long, value_parser = parse_grid, default_value = "40x40x20")]
    pub grid: GridResolution,
    /// Write the table here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct FitArgs {
    /// Measurement CSV: label,mean_photons,n_sent,n_detected,n_error
    pub input: PathBuf,
    /// Fiber length the measurements were taken over
    #[arg(long)]
    pub distance_km: f64,
    /// Fiber attenuation used to split off the receiver efficiency
    #[arg(long, default_value_t = 0.21)]
    pub alpha_db_per_km: f64,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ProtocolArg {
    OneDecoy,
    NonDecoy,
    PerfectDecoy,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SweepModeArg {
    Fixed,
    Reoptimized,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|e| format!("bad lower end: {e}"))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|e| format!("bad upper end: {e}"))?;
    Ok((lo, hi))
}

fn parse_grid(s: &str) -> Result<GridResolution, String> {
    let parts: Vec<&str> = s.split('x').collect();
    let [mu, nu, fraction] = parts.as_slice() else {
        return Err(format!("expected MUxNUxFRACTION, got {s:?}"));
    };
    let parse = |v: &str, axis: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|e| format!("bad {axis} count: {e}"))
    };
    Ok(GridResolution {
        mu: parse(mu, "mu")?,
        nu: parse(nu, "nu")?,
        fraction: parse(fraction, "fraction")?,
    })
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Analyze(args) => commands::cmd_analyze(args),
        Command::Simulate(args) => commands::cmd_simulate(args),
        Command::Optimize(args) => commands::cmd_optimize(args),
        Command::Sweep(args) => commands::cmd_sweep(args),
        Command::Fit(args) => commands::cmd_fit(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    }
}

fn main() {
    std::process::exit(real_main());
}
