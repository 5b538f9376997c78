//! Command-line front end: scenario files in, trajectories, controls and
//! JSON summaries out.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 infeasible input or
//! simulation, 3 verification failed. Errors are also written to stderr as a
//! one-line JSON document.

mod commands;
mod error;
pub mod output;
pub mod scenario_file;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::{CliError, EXIT_INFEASIBLE, EXIT_OK, EXIT_UNVERIFIED, EXIT_USAGE};
pub use scenario_file::{parse_scenario, parse_str, ScenarioFile};

#[derive(Debug, Parser)]
#[command(name = "crowdsweep", version, about = "Simulate, solve and verify controlled crowd sweeping scenarios")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}


#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the scenario under supplied (or zero) controls.
    Simulate(Invocation),
    /// Run the penalized direct bilevel solver.
    Solve(Invocation),
    /// Closed-form solution of the two-disk family, simulated and audited.
    Casestudy(Invocation),
    /// Search for maximum-principle multipliers certifying supplied controls.
    Verify(Invocation),
    /// Evaluate the truncation-cap bracket along a contact path.
    H5check(Invocation),
}

#[derive(Debug, Clone, Args)]
pub struct Invocation {
    /// Scenario file (TOML).
    pub scenario: PathBuf,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Time step; T/h must be an integer.
    #[arg(long)]
    pub h: Option<f64>,
    /// Number of grid cells.
    #[arg(long = "grid-K")]
    pub grid_k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Base verification tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Stiffness of the penalty integrator (simulate only).
    #[arg(long = "penalty-k")]
    pub penalty_k: Option<f64>,
    /// Directory for the artifacts; without it only the summary is printed.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Controls file in the `controls.csv` format.
    #[arg(long)]
    pub controls: Option<PathBuf>,
}

/// Captured result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Parses `args` (including the program name) and executes the command.
pub fn run<I, S>(args: I) -> Outcome
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    Outcome { code: EXIT_OK, stdout: e.to_string(), stderr: String::new() }
                }
                _ => {
                    let err = CliError::Usage(e.to_string().trim_end().to_string());
                    Outcome { code: err.exit_code(), stdout: String::new(), stderr: err.to_json() + "\n" }
                }
            };
        }
    };
    match commands::execute(&cli.command) {
        Ok(done) => Outcome {
            code: done.code,
            stdout: done.summary,
            stderr: done.diagnostic.map(|d| diagnostic_json(&d, done.code) + "\n").unwrap_or_default(),
        },
        Err(e) => Outcome { code: e.exit_code(), stdout: String::new(), stderr: e.to_json() + "\n" },
    }
}

fn diagnostic_json(e: &CliError, code: i32) -> String {
    serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string(), "exit_code": code } }).to_string()
}
