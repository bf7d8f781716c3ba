//! Binds JSON run files to the operations in `menuconnect-core`.
//!
//! Exit status: 0 on success, 1 on any config, input or precondition
//! error, 2 when an audit fails.

pub mod artifacts;
pub mod commands;
pub mod config;

use std::path::PathBuf;

use thiserror::Error;

pub use commands::dispatch;
pub use config::{Command, ConnectMode, RunConfig, TrainSection};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{}: error at `{field}`: {message}", path.display())]
    Input {
        path: PathBuf,
        field: String,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing input: {0}")]
    Missing(String),

    #[error(transparent)]
    Core(#[from] menuconnect_core::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// One invocation as given on the command line.
#[derive(Clone, Debug)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub mode: Option<ConnectMode>,
}

/// Loads the config, applies overrides, runs the command and writes its
/// artifacts. Returns the exit status.
pub fn run(inv: &Invocation) -> Result<i32, CliError> {
    let (mut cfg, bytes) = RunConfig::load(&inv.config)?;
    if let Some(c) = cfg.command {
        if c != inv.command {
            return Err(CliError::Config {
                field: "command".into(),
                message: format!(
                    "config is for `{}` but `{}` was requested",
                    c.name(),
                    inv.command.name()
                ),
            });
        }
    }
    if let Some(s) = inv.seed {
        cfg.seed = s;
    }
    if inv.mode.is_some() {
        cfg.mode = inv.mode;
    }
    let out = inv
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let (code, art) = dispatch(inv.command, &cfg)?;
    art.write_all(
        &out,
        inv.command.name(),
        cfg.seed,
        &artifacts::sha256_hex(&bytes),
        code,
    )?;
    Ok(code)
}
