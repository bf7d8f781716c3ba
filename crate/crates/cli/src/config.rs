//! The JSON run file. One file describes one run; the command line only
//! overrides the seed, the output directory and the connect mode.

use std::path::{Path, PathBuf};

use menuconnect_core::training::{InitScheme, Projection};
use menuconnect_core::{DensitySpec, MenuKind, ReductionSet, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Train,
    Connect,
    Audit,
    Reduce,
    Discretize,
    Eval,
    Gap,
    Landscape,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Connect => "connect",
            Command::Audit => "audit",
            Command::Reduce => "reduce",
            Command::Discretize => "discretize",
            Command::Eval => "eval",
            Command::Gap => "gap",
            Command::Landscape => "landscape",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ConnectMode {
    /// Both menus are exactly reducible.
    Zero,
    /// Both menus are reducible up to a small miss probability.
    Reducible,
    /// Menus large enough that discretization makes them reducible.
    Large,
}

/// Training hyperparameters; the seed comes from the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub mechanism: MenuKind,
    #[serde(default = "one")]
    pub buyers: usize,
    #[serde(default = "one")]
    pub items: usize,
    pub options: usize,
    pub temperature: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub init: InitScheme,
    #[serde(default)]
    pub projection: Projection,
    #[serde(default)]
    pub eval_every: usize,
    #[serde(default)]
    pub eval_samples: Option<usize>,
}

impl TrainSection {
    pub fn config(&self, seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig::new(
            self.options,
            self.temperature,
            self.steps,
            self.batch_size,
            self.learning_rate,
            seed,
        );
        cfg.init = self.init;
        cfg.projection = self.projection;
        cfg.eval_every = self.eval_every;
        if let Some(n) = self.eval_samples {
            cfg.eval_samples = n;
        }
        cfg
    }
}

fn one() -> usize {
    1
}

fn default_samples() -> usize {
    100_000
}

fn default_points() -> usize {
    21
}

fn default_temperatures() -> Vec<f64> {
    vec![1e2, 1e3, 1e4]
}

fn default_grid_points() -> usize {
    101
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// When present it must agree with the command given on the command line.
    #[serde(default)]
    pub command: Option<Command>,
    pub seed: u64,
    #[serde(default = "DensitySpec::uniform")]
    pub density: DensitySpec,
    /// Input menu for `reduce`, `discretize`, `eval` and `gap`.
    #[serde(default)]
    pub menu: Option<PathBuf>,
    /// Endpoint menus for `connect`, and for `audit` when no path is given.
    #[serde(default)]
    pub menus: Option<[PathBuf; 2]>,
    /// Path file for `audit`.
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub train: Option<TrainSection>,
    #[serde(default)]
    pub mode: Option<ConnectMode>,
    /// Reduction sets for `connect`; estimated from samples when absent.
    #[serde(default)]
    pub reduction_sets: Option<[ReductionSet; 2]>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub epsilon: f64,
    /// Softmax temperature for `eval`; argmax only when absent.
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default = "default_temperatures")]
    pub temperatures: Vec<f64>,
    #[serde(default)]
    pub xs: Option<Vec<f64>>,
    #[serde(default)]
    pub ps: Option<Vec<f64>>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

impl RunConfig {
    /// Parses `bytes`, reporting the offending field on failure.
    pub fn parse(bytes: &[u8]) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_slice(bytes);
        serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    /// Reads and parses a config file, resolving relative paths against its
    /// directory. Returns the raw bytes too, for hashing.
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path).map_err(|source| CliError::Io {
            path: path.into(),
            source,
        })?;
        let mut cfg = Self::parse(&bytes)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve(base);
        Ok((cfg, bytes))
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.menu.iter_mut().for_each(fix);
        self.path.iter_mut().for_each(fix);
        self.out.iter_mut().for_each(fix);
        if let Some(ms) = self.menus.as_mut() {
            ms.iter_mut().for_each(fix);
        }
    }

    /// Checks that the inputs `command` reads are named and exist.
    pub fn check_inputs(&self, command: Command) -> Result<(), CliError> {
        let need = |p: &Option<PathBuf>, field: &str| -> Result<(), CliError> {
            match p {
                None => Err(CliError::Missing(format!(
                    "`{field}` is required for `{}`",
                    command.name()
                ))),
                Some(p) if !p.is_file() => Err(CliError::Missing(format!(
                    "`{field}` file {} does not exist",
                    p.display()
                ))),
                Some(_) => Ok(()),
            }
        };
        let need_pair = || -> Result<(), CliError> {
            match &self.menus {
                None => Err(CliError::Missing(format!(
                    "`menus` is required for `{}`",
                    command.name()
                ))),
                Some([a, b]) => {
                    need(&Some(a.clone()), "menus[0]")?;
                    need(&Some(b.clone()), "menus[1]")
                }
            }
        };
        match command {
            Command::Train => {
                self.train.as_ref().map(|_| ()).ok_or_else(|| {
                    CliError::Missing("`train` section is required for `train`".into())
                })
            }
            Command::Connect => need_pair(),
            Command::Audit => match self.path {
                Some(_) => need(&self.path, "path"),
                None => need_pair(),
            },
            Command::Reduce | Command::Discretize | Command::Eval | Command::Gap => {
                need(&self.menu, "menu")
            }
            Command::Landscape => Ok(()),
        }
    }
}
