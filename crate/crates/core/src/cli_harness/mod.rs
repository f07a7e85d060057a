//! Command-line orchestration for the `hsmilne` binary.
//!
//! Subcommands: `operator-check`, `milne`, `milne-corrector`, `trace`,
//! `cycles`, `expand`. Common flags: `--config <path>` (JSON scenario),
//! `--out <dir>`, `--seed <u64>`, `--format {csv,json}`. The environment
//! variable [`THREADS_ENV`] caps the worker-thread count.
//!
//! Exit codes: [`EXIT_PASS`] when every check passed, [`EXIT_CHECK_FAILED`]
//! when a check failed, [`EXIT_USAGE`] for usage or configuration errors, and
//! [`EXIT_NUMERICAL`] for numerical failures.

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use commands::{cmd_cycles, cmd_expand, cmd_milne, cmd_milne_corrector, cmd_operator_check, cmd_trace};
pub use config::{OutputFormat, ScenarioConfig};
pub use report::{Cell, Check, RunReport, Table};

use crate::error::Error;

/// Every check passed.
pub const EXIT_PASS: i32 = 0;
/// At least one check failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Usage or configuration error.
pub const EXIT_USAGE: i32 = 2;
/// Numerical failure.
pub const EXIT_NUMERICAL: i32 = 3;
/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "HSMILNE_THREADS";

/// Command-line interface.
#[derive(Debug, Parser)]
#[command(name = "hsmilne", version, about = "Hard-sphere Boltzmann boundary-layer workbench")]
pub struct Cli {
    /// Scenario to run.
    #[command(subcommand)]
    pub command: Command,
    /// JSON scenario file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.directory`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// RNG seed (overrides `cycles.seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output format (overrides `output.formats`).
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
}

/// Subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Collision-operator invariants.
    OperatorCheck,
    /// One ε-Milne solve with profiles.
    Milne,
    /// Corrector and ‖𝓜 − I‖ over the ε sweep.
    MilneCorrector,
    /// One characteristic with conservation drifts.
    Trace,
    /// Stochastic-cycle exit-measure estimates.
    Cycles,
    /// Second-order Hilbert-expansion identities.
    Expand,
}

impl Command {
    /// Subcommand name as typed on the command line.
    pub fn name(self) -> &'static str {
        match self {
            Command::OperatorCheck => "operator-check",
            Command::Milne => "milne",
            Command::MilneCorrector => "milne-corrector",
            Command::Trace => "trace",
            Command::Cycles => "cycles",
            Command::Expand => "expand",
        }
    }
}

/// Exit code of an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::DimensionMismatch { .. } | Error::Precondition(_) | Error::Io(_) => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig, Error> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            ScenarioConfig::from_json(&text)
        }
        None => Ok(ScenarioConfig::default()),
    }
}

fn apply_thread_cap() -> Result<(), Error> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(Error::Config(format!("{THREADS_ENV} must be positive")));
        }
        // A second initialization in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Runs one validated scenario.
pub fn run_command(command: Command, cfg: &ScenarioConfig, seed: u64) -> Result<RunReport, Error> {
    match command {
        Command::OperatorCheck => cmd_operator_check(cfg, seed),
        Command::Milne => cmd_milne(cfg, seed),
        Command::MilneCorrector => cmd_milne_corrector(cfg, seed),
        Command::Trace => cmd_trace(cfg, seed),
        Command::Cycles => cmd_cycles(cfg, seed),
        Command::Expand => cmd_expand(cfg, seed),
    }
}

/// Writes the report files into `dir`.
pub fn write_outputs(report: &RunReport, dir: &Path, formats: &[OutputFormat]) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    let stem = report.command.replace('-', "_");
    for f in formats {
        match f {
            OutputFormat::Csv => {
                for t in &report.tables {
                    std::fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv())?;
                }
                let text = serde_json::to_string_pretty(&report.summary_json()).map_err(|e| Error::Config(e.to_string()))?;
                std::fs::write(dir.join(format!("{stem}_summary.json")), text + "\n")?;
            }
            OutputFormat::Json => {
                let text = serde_json::to_string_pretty(&report.full_json()).map_err(|e| Error::Config(e.to_string()))?;
                std::fs::write(dir.join(format!("{stem}.json")), text + "\n")?;
            }
        }
    }
    Ok(())
}

/// Parses arguments, runs the command, writes outputs, prints the summary
/// JSON to `stdout`, and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_PASS,
                _ => EXIT_USAGE,
            };
        }
    };
    let result = (|| -> Result<RunReport, Error> {
        apply_thread_cap()?;
        let cfg = load_config(cli.config.as_deref())?;
        let seed = cli.seed.unwrap_or(cfg.cycles.seed);
        let report = run_command(cli.command, &cfg, seed)?;
        let dir = cli.out.clone().or_else(|| cfg.output.directory.as_ref().map(PathBuf::from));
        if let Some(dir) = dir {
            let formats = cli.format.map_or_else(|| cfg.output.formats.clone(), |f| vec![f]);
            write_outputs(&report, &dir, &formats)?;
        }
        Ok(report)
    })();
    match result {
        Ok(report) => {
            let text = serde_json::to_string_pretty(&report.stdout_json()).unwrap_or_default();
            let _ = writeln!(stdout, "{text}");
            if report.passed {
                EXIT_PASS
            } else {
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
                let _ = writeln!(stderr, "{}: failed checks: {}", cli.command.name(), failed.join(", "));
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "{}: {e}", cli.command.name());
            exit_code(&e)
        }
    }
}
