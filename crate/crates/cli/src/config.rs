use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use lcdr_adv::attack::AttackConfig;
use lcdr_adv::autodiff::TrainConfig;
use lcdr_adv::dataset::GenerationConfig;
use lcdr_adv::defense::DefenseConfig;
use lcdr_adv::Error;

/// Whole-pipeline configuration; every section is optional in the TOML file
/// and falls back to the desk-scale defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub test_fraction: f64,
    pub generation: GenerationConfig,
    pub train: TrainConfig,
    pub attack: AttackConfig,
    pub defense: DefenseConfig,
    pub sweep_epsilons: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            out: PathBuf::from("runs/default"),
            test_fraction: 0.2,
            generation: GenerationConfig::default(),
            train: TrainConfig::default(),
            attack: AttackConfig::default(),
            defense: DefenseConfig::default(),
            sweep_epsilons: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Io { path: path.into(), source: e })?;
        toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            .context("reading the experiment config")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction must be in (0, 1), got {}",
                self.test_fraction
            ))
            .into());
        }
        self.generation.validate()?;
        self.train.validate().map_err(config)?;
        self.attack.validate()?;
        self.defense.validate()?;
        for &e in &self.sweep_epsilons {
            AttackConfig::new(e, self.attack.max_iterations)?;
        }
        Ok(())
    }
}

fn config(e: Error) -> Error {
    match e {
        Error::Parameter(m) => Error::Config(m),
        other => other,
    }
}
