//! The `perdyn` command line.
//!
//! Report commands (`cluster`, `agreement`, `tasks`, `predict`) write a JSON
//! report carrying a manifest of the run, accumulated warnings, the results
//! and a checksum over the results. Data commands (`synth`, `traits`,
//! `init-params`) write their files plus a manifest sidecar.
//!
//! Failures print `{"error": {"class", "exit_code", "message"}}` on stderr
//! and exit with 2 for validation and i/o problems, 3 for numeric ones.

pub mod cmd;
pub mod error;
pub mod features;
pub mod report;

use std::ffi::OsString;

use clap::{Parser, Subcommand};

pub use error::{CliError, Result};
pub use report::{Format, Manifest, Report, Warning};

use cmd::{agreement, cluster, init_params, predict, synth, tasks, traits};

#[derive(Debug, Parser)]
#[command(name = "perdyn", version, about = "Perceived personality dynamics in small groups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic sessions, performance, self reports and ratings.
    Synth(synth::SynthArgs),
    /// Write freshly initialised model parameters.
    InitParams(init_params::InitParamsArgs),
    /// Windowed trait estimates from feature files.
    Traits(traits::TraitsArgs),
    /// PERMANOVA of group clustering in trait space.
    Cluster(cluster::ClusterArgs),
    /// Rater agreement (ICC) and model equivalence (TOST).
    Agreement(agreement::AgreementArgs),
    /// Repeated-measures task effects with post-hoc tests.
    Tasks(tasks::TasksArgs),
    /// Group performance prediction from perceived and self-reported traits.
    Predict(predict::PredictArgs),
}

/// Runs one parsed command.
pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => synth::run(a).map(drop),
        Command::InitParams(a) => init_params::run(a).map(drop),
        Command::Traits(a) => traits::run(a).map(drop),
        Command::Cluster(a) => report::emit(&cluster::run(a)?, a.output.as_deref(), a.format),
        Command::Agreement(a) => report::emit(&agreement::run(a)?, a.output.as_deref(), a.format),
        Command::Tasks(a) => report::emit(&tasks::run(a)?, a.output.as_deref(), a.format),
        Command::Predict(a) => report::emit(&predict::run(a)?, a.output.as_deref(), a.format),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                // help and version
                print!("{e}");
                return 0;
            }
            let err = CliError::validation(e.render().to_string().trim_end());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
