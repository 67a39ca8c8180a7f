//! Command-line front end of `rtsched`.
//!
//! Every subcommand reads a JSON run configuration plus flag overrides and
//! writes CSV or JSON files that start with the effective configuration.
//! Exit status: 0 success, 1 check failed, 2 bad input or configuration,
//! 3 broken internal guarantee.

mod commands;
mod error;
mod inputs;
mod outputs;

use std::ffi::OsString;
use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use rtsched::ingest::parse_date;

pub use commands::{cmd_gen, cmd_metrics, cmd_oracle, cmd_simulate, cmd_validate, OracleSummary, ORACLE_TOLERANCE};
pub use error::{CliError, CliResult};
pub use inputs::{load_inputs, load_park, ConfigArgs, Inputs};
pub use outputs::Outputs;

#[derive(Debug, Parser)]
#[command(name = "rtsched", version, about = "Radiotherapy fraction scheduling")]
pub struct Cli {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic arrival stream and machine calendar.
    Gen(GenArgs),
    /// Replay the configured period day by day.
    Simulate(SimulateArgs),
    /// Audit a schedule against every patient and machine rule.
    Validate(ValidateArgs),
    /// Quality metrics and occupancy of a schedule.
    Metrics(MetricsArgs),
    /// Compare the batch heuristic with the exact solver on small random instances.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Generator settings in JSON. Defaults to the built-in ones.
    #[arg(long)]
    pub synthetic: Option<PathBuf>,
    /// Mean arrivals per working day.
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long, value_parser = parse_date)]
    pub start: Option<NaiveDate>,
    #[arg(long, value_parser = parse_date)]
    pub end: Option<NaiveDate>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Also replay the static-reservation baseline and report both.
    #[arg(long)]
    pub baseline: bool,
    /// Write the run state here after `--stop-after` instead of finishing.
    #[arg(long, requires = "stop_after")]
    pub snapshot: Option<PathBuf>,
    #[arg(long, value_parser = parse_date, requires = "snapshot")]
    pub stop_after: Option<NaiveDate>,
    /// Continue from a snapshot. Its stored configuration is used.
    #[arg(long, conflicts_with_all = ["snapshot", "baseline"])]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub schedule: PathBuf,
    /// Audit only this many random courses and one machine fortnight.
    #[arg(long)]
    pub sample: Option<usize>,
    /// Directory for violations.csv and validation.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub schedule: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Scheduler name written in the report rows.
    #[arg(long, default_value = "schedule")]
    pub label: String,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    /// Instances to draw. Instance i uses the run seed plus i.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = rtsched::scheduler::MAX_MACHINES)]
    pub machines: usize,
    #[arg(long, default_value_t = rtsched::scheduler::MAX_COURSES)]
    pub courses: usize,
    #[arg(long, default_value_t = rtsched::scheduler::MAX_DAYS)]
    pub days: usize,
    /// CSV with one row per instance.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&cli.config, &a),
        Command::Simulate(a) => cmd_simulate(&cli.config, &a),
        Command::Validate(a) => cmd_validate(&cli.config, &a),
        Command::Metrics(a) => cmd_metrics(&cli.config, &a),
        Command::Oracle(a) => cmd_oracle(&cli.config, &a).map(|_| ()),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status. Errors are reported on stderr.
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
