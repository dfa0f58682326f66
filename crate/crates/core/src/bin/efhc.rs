use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use efhc::config::{load_config, template, TEMPLATE_NAMES};
use efhc::suite::{run_suite, verify};
use efhc::topology::{certify_b_connectivity, InfoFlowLog};
use efhc::Error;

#[derive(Parser)]
#[command(
    name = "efhc",
    version,
    about = "Event-triggered decentralized learning simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (policy, seed) pair of a config and write the artifact directory.
    Run {
        config: PathBuf,
        /// Output directory; defaults to `<config stem>.out` next to the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a completed suite directory; exits 3 if any criterion fails.
    Verify { dir: PathBuf },
    /// Print a config template to stdout.
    GenConfig {
        #[arg(long)]
        template: String,
    },
    /// Check that every window of an info-flow log has a connected union.
    Certify {
        infoflow: PathBuf,
        #[arg(long = "B")]
        b: usize,
    },
}

const OK: u8 = 0;
const VALIDATION: u8 = 1;
const RUNTIME: u8 = 2;
const ACCEPTANCE: u8 = 3;

fn error_code(err: &Error) -> u8 {
    match err {
        Error::Parse { .. }
        | Error::Validation { .. }
        | Error::InvalidArgument(_)
        | Error::MissingArtifacts(_)
        | Error::Format { .. } => VALIDATION,
        Error::NumericFailure(_) | Error::Unsupported(_) | Error::Io { .. } => RUNTIME,
    }
}

fn execute(cmd: Command) -> Result<u8, Error> {
    match cmd {
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let out = out.unwrap_or_else(|| config.with_extension("out"));
            let summary = run_suite(&cfg, &out)?;
            println!("{} runs written to {}", summary.runs.len(), out.display());
            Ok(OK)
        }
        Command::Verify { dir } => {
            let report = verify(&dir)?;
            print!("{}", report.to_text());
            Ok(if report.passed() { OK } else { ACCEPTANCE })
        }
        Command::GenConfig { template: name } => match template(&name) {
            Some(text) => {
                print!("{text}");
                Ok(OK)
            }
            None => Err(Error::InvalidArgument(format!(
                "unknown template `{name}` (available: {})",
                TEMPLATE_NAMES.join(", ")
            ))),
        },
        Command::Certify { infoflow, b } => {
            let text = std::fs::read_to_string(&infoflow).map_err(|e| Error::Io {
                path: infoflow.clone(),
                source: e,
            })?;
            let log = InfoFlowLog::from_text(&text)?;
            let report = certify_b_connectivity(&log, b)?;
            if report.is_certified() {
                println!(
                    "CERTIFIED: {} windows of length {b} are connected",
                    report.windows_checked
                );
                Ok(OK)
            } else {
                println!(
                    "NOT CERTIFIED: {} of {} windows disconnected; first at k = {}",
                    report.violations.len(),
                    report.windows_checked,
                    report.violations[0]
                );
                Ok(ACCEPTANCE)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(error_code(&err))
        }
    }
}
