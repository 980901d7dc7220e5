//! `delay-duffing`: amplitude tables, series, simulations, lift checks and
//! stability probes for the delayed Duffing equation.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use delay_duffing::{Error, Parity};
use serde::{Deserialize, Serialize};

/// Exact lifted periodic orbits of x''(t) + x(t - T) + x(t)^3 = 0.
#[derive(Debug, Parser)]
#[command(name = "delay-duffing", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Table of A_n, m_n, omega_n, p_n, H_n for n = 1..n_max.
    Amplitudes(AmplitudesArgs),
    /// Truncated large-amplitude series next to the exact value.
    Series(SeriesArgs),
    /// Integrate the delay equation from an elliptic history; CSV t,x,xdot.
    Simulate(SimulateArgs),
    /// Check the lift identity x(t - T) = (-1)^n x(t) for x_n.
    VerifyLift(VerifyLiftArgs),
    /// Convergence, heteroclinic or Floquet probe; JSON verdict.
    Probe(ProbeArgs),
    /// Re-run the command recorded in a manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParityArg {
    Even,
    Odd,
}

impl From<ParityArg> for Parity {
    fn from(p: ParityArg) -> Parity {
        match p {
            ParityArg::Even => Parity::Even,
            ParityArg::Odd => Parity::Odd,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AmplitudesArgs {
    #[arg(long)]
    pub delay: f64,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub n_max: u32,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Output file; relative paths resolve against $DELAY_DUFFING_OUT_DIR.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SeriesArgs {
    /// Evaluate p(A) at this amplitude.
    #[arg(long, required_unless_present = "period", conflicts_with = "period")]
    pub amplitude: Option<f64>,
    /// Evaluate A(p) at this period.
    #[arg(long)]
    pub period: Option<f64>,
    #[arg(long, value_enum)]
    pub parity: ParityArg,
    /// Highest power kept (default: all terms).
    #[arg(long, allow_negative_numbers = true)]
    pub order: Option<i32>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub delay: f64,
    /// History amplitude; needs --parity.
    #[arg(long, required_unless_present = "n", conflicts_with = "n", requires = "parity")]
    pub amplitude: Option<f64>,
    #[arg(long, value_enum)]
    pub parity: Option<ParityArg>,
    /// Start on the exact orbit x_n.
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub t_end: f64,
    #[arg(long, default_value_t = delay_duffing::dde::DEFAULT_MAX_STEP)]
    pub max_step: f64,
    #[arg(long, default_value_t = delay_duffing::dde::DEFAULT_ATOL)]
    pub atol: f64,
    #[arg(long, default_value_t = delay_duffing::dde::DEFAULT_RTOL)]
    pub rtol: f64,
    /// Write every stride-th mesh point.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub stride: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct VerifyLiftArgs {
    #[arg(long)]
    pub delay: f64,
    #[arg(long)]
    pub n: u32,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ProbeArgs {
    #[arg(long)]
    pub delay: f64,
    /// Reference orbit x_n (the target for convergence and heteroclinic probes).
    #[arg(long)]
    pub n: u32,
    /// History amplitude: odd parity for a convergence probe, parity of
    /// near_n with --near-n.
    #[arg(long, conflicts_with_all = ["floquet", "offset"])]
    pub amplitude: Option<f64>,
    /// Start near the even orbit x_near_n (heteroclinic probe).
    #[arg(long, conflicts_with = "floquet")]
    pub near_n: Option<u32>,
    /// Amplitude offset from A_near_n.
    #[arg(long, allow_negative_numbers = true, requires = "near_n")]
    pub offset: Option<f64>,
    /// Estimate the leading Floquet exponent of x_n.
    #[arg(long)]
    pub floquet: bool,
    #[arg(long, default_value_t = delay_duffing::experiments::DEFAULT_PERTURBATION, allow_negative_numbers = true)]
    pub perturbation: f64,
    #[arg(long, default_value_t = 100.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = delay_duffing::dde::DEFAULT_MAX_STEP)]
    pub max_step: f64,
    /// Include the sampled distance series.
    #[arg(long)]
    pub full: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write to this path instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure classes with their exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Domain(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Domain(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Domain(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Domain(_) | Error::NoSolution(_) | Error::Range(_) | Error::Config(_) => Failure::Domain(msg),
            Error::Numerical(_) | Error::Diverged { .. } => Failure::Numerical(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(format!("i/o error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
