//! Batch front end: verification runs, cost tables, storage-sharing sweeps
//! and simulations, all written as CSV with a `# config:` comment line first.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lcsd_core::assignment::AssignmentRule;
use lcsd_core::Scheme;

pub mod commands;
pub mod config;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config field `{field}`: {message}")]
    Config {
        field: &'static str,
        message: String,
    },
    #[error("{0}")]
    Usage(String),
    #[error("verification failed:\n{0}")]
    Verification(String),
    #[error(transparent)]
    Core(#[from] lcsd_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for a failed verification, 2 for anything the user must fix.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "lcsd",
    version,
    about = "Coded matrix multiplication experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check decoded products against the plain product over a grid.
    Verify {
        #[command(flatten)]
        flags: Flags,
        /// Corrupt one worker result and report the affected group.
        #[arg(long)]
        inject_fault: bool,
    },
    /// Closed-form per-machine costs for every table row.
    Cost {
        #[command(flatten)]
        flags: Flags,
    },
    /// Storage-sharing trade-off curves.
    Sweep {
        #[command(flatten)]
        flags: Flags,
    },
    /// Monte-Carlo step times of cyclic vs heterogeneous assignment.
    Simulate {
        #[command(flatten)]
        flags: Flags,
    },
}

fn list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse().map_err(|_| format!("bad list item {x:?}")))
        .collect()
}

/// `a..=b`, `a..b` or a comma list.
fn range_or_list(s: &str) -> Result<Vec<usize>, String> {
    if let Some((a, b)) = s.split_once("..=") {
        let (a, b): (usize, usize) = (
            a.parse().map_err(|_| "bad start")?,
            b.parse().map_err(|_| "bad end")?,
        );
        return Ok((a..=b).collect());
    }
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (usize, usize) = (
            a.parse().map_err(|_| "bad start")?,
            b.parse().map_err(|_| "bad end")?,
        );
        return Ok((a..b).collect());
    }
    list(s)
}

fn strings(s: &str) -> Result<Vec<String>, String> {
    list(s)
}

fn parsed<T>(
    field: &'static str,
    raw: Option<&str>,
    f: impl Fn(&str) -> Result<T, String>,
) -> Result<Option<T>, CliError> {
    raw.map(|r| f(r).map_err(|message| CliError::Config { field, message }))
        .transpose()
}

/// Flags mirroring [`RunConfig`]; set flags override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iters: Option<u64>,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// 1, 2 or lcc.
    #[arg(long)]
    pub scheme: Option<Scheme>,
    /// Second scheme for storage-sharing.
    #[arg(long)]
    pub scheme_j: Option<Scheme>,
    #[arg(long)]
    pub assignment: Option<AssignmentRule>,
    /// Number of machines (N, or N_t for cost and sweep).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub prime: Option<u64>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub v: Option<usize>,
    #[arg(long)]
    pub r: Option<usize>,
    /// Comma-separated speeds such as `1,1,1.5,3/2`.
    #[arg(long)]
    pub speeds: Option<String>,
    /// `0..=10` or `0,2,4`.
    #[arg(long)]
    pub p_range: Option<String>,
    /// Comma-separated straggler counts.
    #[arg(long)]
    pub s_values: Option<String>,
    #[arg(long)]
    pub l_prime: Option<usize>,
    /// Comma-separated lambda values in [0, 1].
    #[arg(long)]
    pub lambda_grid: Option<String>,
    #[arg(long)]
    pub lambda_points: Option<usize>,
    #[arg(long)]
    pub max_l: Option<usize>,
    #[arg(long)]
    pub max_s: Option<usize>,
    #[arg(long)]
    pub max_n: Option<usize>,
    /// Seconds per unit load at speed 1.
    #[arg(long)]
    pub base_time: Option<String>,
    #[arg(long)]
    pub noise_shift: Option<f64>,
    #[arg(long)]
    pub noise_rate: Option<f64>,
    #[arg(long)]
    pub slowdown: Option<f64>,
}

impl Flags {
    /// Reads the config file, if any, and applies the flags on top.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let base = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let timing = config::timing_from_flags(
            self.base_time.as_deref(),
            self.noise_shift,
            self.noise_rate,
            self.slowdown,
            base.timing.clone(),
        )?;
        let top = RunConfig {
            n: self.n,
            l: self.l,
            s: self.s,
            p: self.p,
            prime: self.prime,
            q: self.q,
            v: self.v,
            r: self.r,
            speeds: parsed("speeds", self.speeds.as_deref(), strings)?,
            scheme: self.scheme,
            scheme_j: self.scheme_j,
            assignment: self.assignment,
            p_range: parsed("p_range", self.p_range.as_deref(), range_or_list)?,
            s_values: parsed("s_values", self.s_values.as_deref(), list::<usize>)?,
            iters: self.iters,
            seed: self.seed,
            timing,
            out: self.out.clone(),
            l_prime: self.l_prime,
            lambda_grid: parsed("lambda_grid", self.lambda_grid.as_deref(), strings)?,
            lambda_points: self.lambda_points,
            max_l: self.max_l,
            max_s: self.max_s,
            max_n: self.max_n,
        };
        Ok(base.overlay(top))
    }
}

/// Runs a command and writes its CSV to the configured output.
/// A failed verification still writes its CSV before returning the error.
pub fn run(command: &Command) -> Result<(), CliError> {
    let (flags, text, failures) = match command {
        Command::Verify {
            flags,
            inject_fault,
        } => {
            let cfg = flags.resolve()?;
            let out = commands::verify(&config::verify_settings(&cfg)?, *inject_fault)?;
            (cfg, out.csv, out.failures)
        }
        Command::Cost { flags } => {
            let cfg = flags.resolve()?;
            let csv = commands::cost(&config::cost_settings(&cfg)?)?;
            (cfg, csv, vec![])
        }
        Command::Sweep { flags } => {
            let cfg = flags.resolve()?;
            let csv = commands::sweep(&config::sweep_settings(&cfg)?)?;
            (cfg, csv, vec![])
        }
        Command::Simulate { flags } => {
            let cfg = flags.resolve()?;
            let csv = commands::simulate(&config::simulate_settings(&cfg)?)?;
            (cfg, csv, vec![])
        }
    };
    match &flags.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failures.join("\n")))
    }
}
