use std::path::PathBuf;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::CliError;
use crate::estimators::SupremumFamily;
use crate::geometry::{GroupElement, SpaceModel};
use crate::verifier::{BackInstances, SyntheticProcess};
use crate::walk::{Atom, StepDistribution, WalkConfig};

/// Either explicit atoms or a named preset.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum MuSpec {
    Atoms(Vec<Atom>),
    Preset(Preset),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preset {
    UniformGenerators,
    Polya { p: f64 },
    PointMass { element: GroupElement },
}

impl MuSpec {
    pub fn build(&self, model: &SpaceModel) -> Result<StepDistribution, CliError> {
        let mu = match self {
            MuSpec::Atoms(atoms) => StepDistribution::new(model, atoms.clone()),
            MuSpec::Preset(Preset::UniformGenerators) => StepDistribution::uniform_generators(model),
            MuSpec::Preset(Preset::Polya { p }) => StepDistribution::polya(*p),
            MuSpec::Preset(Preset::PointMass { element }) => StepDistribution::point_mass(model, element.clone()),
        };
        let mu = mu.map_err(|e| CliError::config("mu", e))?;
        for atom in mu.atoms() {
            model.validate(&atom.element).map_err(|e| CliError::config("mu", e))?;
        }
        Ok(mu)
    }
}

#[derive(Clone, Debug, Deserialize)]
pub struct NamedProcess {
    pub name: String,
    #[serde(flatten)]
    pub process: SyntheticProcess,
}

/// Everything a subcommand may read. Each subcommand requires its own
/// subset; unknown fields are rejected.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<SpaceModel>,
    pub mu: Option<MuSpec>,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub horizon: Option<usize>,
    pub iteration: Option<usize>,
    pub out: Option<PathBuf>,

    pub p: Option<f64>,
    pub c: Option<f64>,
    pub d: Option<f64>,
    pub k: Option<usize>,
    pub n: Option<usize>,
    pub a: Option<usize>,
    pub b: Option<f64>,
    pub lambda: Option<f64>,
    pub bin_width: Option<f64>,

    pub n_grid: Option<Vec<usize>>,
    pub d_grid: Option<Vec<f64>>,
    pub t_grid: Option<Vec<f64>>,
    pub k_grid: Option<Vec<usize>>,
    pub mgf_n_grid: Option<Vec<usize>>,
    pub decay_n_grid: Option<Vec<usize>>,

    pub family: Option<SupremumFamily>,
    pub instances: Option<BackInstances>,
    pub process: Option<SyntheticProcess>,
    pub processes: Option<Vec<NamedProcess>>,

    pub shadow_level: Option<f64>,
    pub uniform_level: Option<f64>,
    pub progress_steps: Option<usize>,
    pub state_cap: Option<usize>,
}

/// A parsed config with its source hash and command-line overrides applied.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub sha256: String,
}

pub fn parse_config(bytes: &[u8]) -> Result<LoadedConfig, CliError> {
    let sha256 = hex::encode(Sha256::digest(bytes));
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let config: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("at `{path}`: {}", e.into_inner()))
    })?;
    Ok(LoadedConfig { config, sha256 })
}

impl RunConfig {
    pub fn require<T: Clone>(value: &Option<T>, field: &str, command: &str) -> Result<T, CliError> {
        value
            .clone()
            .ok_or_else(|| CliError::Config(format!("at `{field}`: missing field required by `{command}`")))
    }

    pub fn seed(&self, command: &str) -> Result<u64, CliError> {
        Self::require(&self.seed, "seed", command)
    }

    pub fn trials(&self, command: &str) -> Result<u64, CliError> {
        Self::require(&self.trials, "trials", command)
    }

    pub fn model(&self, command: &str) -> Result<SpaceModel, CliError> {
        Self::require(&self.model, "model", command)
    }

    /// Model, step distribution and seed with the given horizon.
    pub fn walk(&self, command: &str, horizon: usize) -> Result<WalkConfig, CliError> {
        let model = self.model(command)?;
        let mu = Self::require(&self.mu, "mu", command)?.build(&model)?;
        let config = WalkConfig::new(model, mu, self.seed(command)?, horizon.max(1)).map_err(|e| CliError::config("horizon", e))?;
        config
            .with_iteration(self.iteration.unwrap_or(1))
            .map_err(|e| CliError::config("iteration", e))
    }
}
