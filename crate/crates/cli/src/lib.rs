//! Experiment runner behind the `thermoshape` binary.
//!
//! Every command resolves its flags into a [`RunConfig`], writes it as
//! `run_manifest.json` and then produces its artifacts in the output
//! directory. [`run`] maps failures to exit codes 2 (configuration),
//! 3 (numerical) and 4 (I/O).

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{execute, Outcome};
pub use config::{Cli, CliCommand, Command, RunArgs, RunConfig};
pub use error::{CliError, CliResult, FailureKind};

/// Resolve a parsed command line into a configuration.
pub fn resolve(cmd: &CliCommand) -> CliResult<RunConfig> {
    match cmd {
        CliCommand::Forward(a) => RunConfig::from_args(Command::Forward, a),
        CliCommand::Reconstruct(a) => RunConfig::from_args(Command::Reconstruct, a),
        CliCommand::Sensitivity(a) => RunConfig::from_args(Command::Sensitivity, a),
        CliCommand::Estimate(a) => RunConfig::from_args(Command::Estimate, a),
        CliCommand::Sweep(a) => RunConfig::from_args(Command::Sweep, a),
        CliCommand::Replay { manifest, out } => RunConfig::read_manifest(manifest, out),
    }
}

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    execute(&resolve(&cli.command)?)
}
