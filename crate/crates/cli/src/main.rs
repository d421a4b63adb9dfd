use std::fs;
use std::io::Write;
use std::panic;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pcep_core::engine::{self, EngineError, Query};
use pcep_core::fuzz;
use pcep_core::oracle::DEFAULT_WORLD_CAP;

/// Probabilistic complex event processing over uncertain event streams.
#[derive(Parser)]
#[command(name = "pcep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest events and print occurrence probabilities.
    Run {
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        events: PathBuf,
        /// Only report EIDs of this type; may be repeated.
        #[arg(long, conflicts_with = "all")]
        query: Vec<String>,
        /// Report every EID, explicit ones included.
        #[arg(long)]
        all: bool,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Parse and validate a rule file.
    Check {
        #[arg(long)]
        rules: PathBuf,
    },
    /// Compare network marginals with possible-worlds enumeration.
    Oracle {
        #[arg(long, required_unless_present = "fuzz")]
        rules: Option<PathBuf>,
        #[arg(long, required_unless_present = "fuzz")]
        events: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Check this many random instances instead of the given files.
        #[arg(long, conflicts_with_all = ["rules", "events"])]
        fuzz: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Refuse instances with more worlds than this.
        #[arg(long, default_value_t = DEFAULT_WORLD_CAP)]
        cap: usize,
    },
    /// Print the final network in Graphviz format.
    ExportDot {
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        events: PathBuf,
    },
}

fn read(path: &Path) -> Result<String, EngineError> {
    fs::read_to_string(path).map_err(|e| EngineError::Io(format!("{}: {e}", path.display())))
}

/// Runs one command, returning the text for stdout and the exit status.
fn execute(command: Command) -> Result<(String, u8), EngineError> {
    match command {
        Command::Run {
            rules,
            events,
            query,
            all,
            format,
        } => {
            let query = if all {
                Query::All
            } else if !query.is_empty() {
                Query::Types(query)
            } else {
                Query::Inferred
            };
            let report = engine::run_batch(&read(&rules)?, &read(&events)?, &query)?;
            let out = match format {
                Format::Json => report.to_json(),
                Format::Table => report.to_table(),
            };
            Ok((out, 0))
        }
        Command::Check { rules } => {
            let rs = engine::run_check(&read(&rules)?)?;
            Ok((
                format!(
                    "ok: {} event types, {} rules\n",
                    rs.schemas.len(),
                    rs.rules.len()
                ),
                0,
            ))
        }
        Command::Oracle {
            rules,
            events,
            tol,
            fuzz: Some(count),
            seed,
            ..
        } => {
            debug_assert!(rules.is_none() && events.is_none());
            let summary = fuzz::run_suite(count, seed, tol).map_err(EngineError::from)?;
            Ok((summary.to_json(), if summary.pass() { 0 } else { 1 }))
        }
        Command::Oracle {
            rules,
            events,
            tol,
            cap,
            ..
        } => {
            let (rules, events) = (
                rules.expect("required by clap"),
                events.expect("required by clap"),
            );
            let cmp = engine::run_oracle_diff(&read(&rules)?, &read(&events)?, tol, cap)?;
            Ok((cmp.to_json(), if cmp.pass { 0 } else { 1 }))
        }
        Command::ExportDot { rules, events } => {
            Ok((engine::run_export(&read(&rules)?, &read(&events)?)?, 0))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = panic::catch_unwind(|| execute(cli.command));
    match outcome {
        Ok(Ok((out, code))) => {
            let mut stdout = std::io::stdout().lock();
            if stdout
                .write_all(out.as_bytes())
                .and_then(|_| stdout.flush())
                .is_err()
            {
                return ExitCode::from(2);
            }
            ExitCode::from(code)
        }
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(70),
    }
}
