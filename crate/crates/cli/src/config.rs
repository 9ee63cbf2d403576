//! Experiment configuration files (TOML).

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use qfpt_core::config::{InitialSpec, SystemSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Echo,
    Qfi,
    FptMoments,
    Trajectories,
    SweepKappa,
    SweepRandom,
    Ancilla,
    ClassicalCheck,
    TurCheck,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Echo => "echo",
            Self::Qfi => "qfi",
            Self::FptMoments => "fpt-moments",
            Self::Trajectories => "trajectories",
            Self::SweepKappa => "sweep-kappa",
            Self::SweepRandom => "sweep-random",
            Self::Ancilla => "ancilla",
            Self::ClassicalCheck => "classical-check",
            Self::TurCheck => "tur-check",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Problems with the configuration itself, as opposed to runtime failures.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub delta: Option<f64>,
    pub omega: Option<f64>,
    pub kappa_min: Option<f64>,
    pub kappa_max: Option<f64>,
    pub points: Option<usize>,
    /// Explicit κ grid; overrides `kappa_min`/`kappa_max`/`points`.
    pub kappas: Option<Vec<f64>>,
    pub n: Option<usize>,
    pub delta_range: Option<[f64; 2]>,
    pub omega_range: Option<[f64; 2]>,
    pub kappa_range: Option<[f64; 2]>,
    pub k_range: Option<[usize; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Kind>,
    pub seed: Option<u64>,
    pub n_traj: Option<usize>,
    /// Single jump count.
    pub k: Option<usize>,
    /// Jump counts `1..=k_max`.
    pub k_max: Option<usize>,
    pub eps_fd: Option<f64>,
    /// Time-rescaling perturbation of `system`, used when `perturbed` is absent.
    pub epsilon: Option<f64>,
    /// Monte Carlo classical Fisher information in `tur-check`.
    pub fisher: Option<bool>,
    pub strict: Option<bool>,
    pub out: Option<PathBuf>,
    pub system: Option<SystemSpec>,
    pub perturbed: Option<SystemSpec>,
    pub initial: Option<InitialSpec>,
    pub sweep: Option<SweepSpec>,
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &str) -> anyhow::Result<Self> {
        toml::from_str(text).map_err(|e| config_error(format!("{origin}: {e}")))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }
}
