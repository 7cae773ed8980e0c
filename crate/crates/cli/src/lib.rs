//! Command-line driver: attack, train, certify, landscape sweeps and toy-suite
//! emission. Every command reads an optional TOML config, applies flag
//! overrides, and writes its artifacts under an output directory.

pub mod args;
pub mod commands;
pub mod config;
pub mod output;

use std::fmt;

/// Failure classes with stable exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad config, bad flags or missing inputs (exit 2).
    Config(anyhow::Error),
    /// Anything that goes wrong after validation (exit 1).
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "config error: {e:#}"),
            Failure::Runtime(e) => write!(f, "error: {e:#}"),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

/// Tags a result with its failure class.
pub trait Classify<T> {
    fn config(self) -> CliResult<T>;
    fn runtime(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for std::result::Result<T, E> {
    fn config(self) -> CliResult<T> {
        self.map_err(|e| Failure::Config(e.into()))
    }

    fn runtime(self) -> CliResult<T> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

pub fn config_error(msg: impl fmt::Display) -> Failure {
    Failure::Config(anyhow::anyhow!("{msg}"))
}

/// Dispatches a parsed command line.
pub fn run(cli: args::Cli) -> CliResult<()> {
    match cli.command {
        args::Command::Attack(a) => commands::attack::run(&a),
        args::Command::Train(a) => commands::train::run(&a),
        args::Command::Certify(a) => commands::certify::run(&a),
        args::Command::Landscape(a) => commands::landscape::run(&a),
        args::Command::MakeToySuite(a) => commands::toy::run(&a),
    }
}
