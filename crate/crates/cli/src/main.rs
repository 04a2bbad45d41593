//! `nesterov-lab`: runs the critical Nesterov flow and gradient flow on the
//! pathological potential, writes TSV tables and prints diagnostics.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "nesterov-lab", version, about = "Critical Nesterov flow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one configuration and write orbit, series and diag tables.
    Simulate(RunArgs),
    /// Run the canonical a=0.02, eps=50 configuration to t=1e5.
    #[command(name = "reproduce-fig2")]
    ReproduceFig2 {
        /// Directory for the output files.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Recompute diagnostics from a diag or series table.
    Diagnose {
        file: PathBuf,
        /// Events table; defaults to the `_events` sibling of a `_diag` file.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Tabulate the closed-form quadratic trajectory.
    Oracle(OracleArgs),
    /// Run independent configurations over lists of eps and a.
    Sweep(SweepArgs),
}

/// Flags shared by every run; unset flags fall back to `--config`, then to
/// the canonical values.
#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// pathological | radial | quadratic
    #[arg(long)]
    pub potential: Option<String>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Diagonal of a quadratic, e.g. `1,4`.
    #[arg(long)]
    pub lambda: Option<String>,
    /// Whitespace-separated row-major matrix file for a quadratic.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Start point, e.g. `0.04,0.02`; defaults to (2a, a).
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// nesterov | gradient
    #[arg(long)]
    pub flow: Option<String>,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long)]
    pub atol: Option<f64>,
    /// Time of the switch to the polar leg, or `none`.
    #[arg(long)]
    pub polar_handoff: Option<String>,
    /// Orbit averaging starts at the first pericentre after this time, or `none`.
    #[arg(long)]
    pub average_after: Option<String>,
    #[arg(long)]
    pub out_orbit: Option<PathBuf>,
    #[arg(long)]
    pub out_series: Option<PathBuf>,
    #[arg(long)]
    pub out_diag: Option<PathBuf>,
    /// key=value file; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct OracleArgs {
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    #[arg(long, default_value_t = 50.0)]
    pub t_end: f64,
    /// Rows per decade of the log-uniform grid (after the t=0 row).
    #[arg(long, default_value_t = 40)]
    pub per_decade: u32,
    /// First nonzero time of the grid.
    #[arg(long, default_value_t = 1e-3)]
    pub t_first: f64,
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated eps values (overrides --eps).
    #[arg(long = "eps-list")]
    pub eps_list: Option<String>,
    /// Comma-separated a values (overrides --a).
    #[arg(long = "a-list")]
    pub a_list: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Failures mapped to exit codes 2 (input), 3 (integration) and 4 (I/O).
#[derive(Debug)]
pub enum Failure {
    Parse(String),
    Schema(String),
    Integration { tag: &'static str, message: String },
    Io(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Parse(_) | Failure::Schema(_) => 2,
            Failure::Integration { .. } => 3,
            Failure::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Parse(m) => write!(f, "error[parse]: {m}"),
            Failure::Schema(m) => write!(f, "error[schema]: {m}"),
            Failure::Integration { tag, message } => write!(f, "error[{tag}]: {message}"),
            Failure::Io(m) => write!(f, "error[io]: {m}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(&args),
        Command::ReproduceFig2 { out_dir } => commands::reproduce_fig2(&out_dir),
        Command::Diagnose { file, events } => commands::diagnose(&file, events.as_deref()),
        Command::Oracle(args) => commands::oracle(&args),
        Command::Sweep(args) => commands::sweep(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code())
        }
    }
}
