//! Command-line front end for `ultradiff`.

mod args;
mod commands;
mod config;
mod output;

use clap::Parser;
use thiserror::Error;

pub use output::{manifest_path, Manifest};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or configuration.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] ultradiff::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use ultradiff::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(
                E::Domain(_) | E::Resource(_) | E::Singularity(_) | E::Unsupported(_),
            ) => 2,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}

/// Runs one invocation and returns the process exit code.
pub fn parse_and_dispatch(argv: Vec<String>) -> i32 {
    match run(argv) {
        Ok(()) => 0,
        Err(Outcome::Clap(e)) => {
            let code = e.exit_code();
            if code == 0 {
                let _ = e.print();
            } else {
                let first = e.render().to_string();
                let line = first.lines().next().unwrap_or("invalid arguments");
                eprintln!("{line}");
            }
            code
        }
        Err(Outcome::Failed(e)) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

enum Outcome {
    Clap(clap::Error),
    Failed(CliError),
}

impl From<CliError> for Outcome {
    fn from(e: CliError) -> Self {
        Outcome::Failed(e)
    }
}

fn run(argv: Vec<String>) -> Result<(), Outcome> {
    let argv = config::merge_config(argv)?;
    let cli = args::Cli::try_parse_from(&argv).map_err(Outcome::Clap)?;
    commands::execute(cli).map_err(Outcome::Failed)
}
