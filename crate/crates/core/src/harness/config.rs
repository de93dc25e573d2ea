use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dqn::AgentConfig;
use crate::error::{Error, Result};
use crate::lattice::CodeDistance;

pub const CONFIG_VERSION: u32 = 1;

/// Decoder used by sweeps and evaluation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecoderSpec {
    #[default]
    Mwpm,
    Dqn {
        checkpoint: PathBuf,
    },
}

impl DecoderSpec {
    pub fn label(&self) -> &'static str {
        match self {
            DecoderSpec::Mwpm => "mwpm",
            DecoderSpec::Dqn { .. } => "dqn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub distance: usize,
    /// Total episode count to reach; a resumed run continues towards it.
    pub episodes: u64,
    pub eval_every: u64,
    pub checkpoint_every: u64,
    pub validation_size: u64,
    pub validation_error_rate: f64,
    pub checkpoint: PathBuf,
    pub log: PathBuf,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            distance: 3,
            episodes: 10_000,
            eval_every: 1000,
            checkpoint_every: 1000,
            validation_size: 1000,
            validation_error_rate: 0.1,
            checkpoint: PathBuf::from("checkpoint.bin"),
            log: PathBuf::from("convergence.csv"),
        }
    }
}

/// Everything a run depends on besides its input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub distances: Vec<usize>,
    pub error_rates: Vec<f64>,
    pub samples: u64,
    pub seed: u64,
    pub workers: usize,
    pub decoder: DecoderSpec,
    /// Decode this dataset file instead of fresh samples.
    pub dataset: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub agent: AgentConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            distances: vec![3, 5, 7],
            error_rates: vec![0.05, 0.08, 0.1, 0.12, 0.15],
            samples: 10_000,
            seed: 1,
            workers: 1,
            decoder: DecoderSpec::Mwpm,
            dataset: None,
            csv: None,
            json: None,
            agent: AgentConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        for &d in self.distances.iter().chain(std::iter::once(&self.train.distance)) {
            CodeDistance::new(d).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(p) = self.error_rates.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Config(format!("error rate {p} outside [0, 1]")));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        let t = &self.train;
        if t.eval_every == 0 || t.checkpoint_every == 0 {
            return Err(Error::Config("eval_every and checkpoint_every must be positive".into()));
        }
        if !(0.0..=1.0).contains(&t.validation_error_rate) {
            return Err(Error::Config("validation_error_rate outside [0, 1]".into()));
        }
        self.agent.validate()
    }
}
