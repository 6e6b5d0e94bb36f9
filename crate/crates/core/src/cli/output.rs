use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{CliError, LoadedConfig};

/// Writes artifacts stamped with the config hash and the effective seed.
#[derive(Clone, Debug)]
pub struct Output {
    dir: PathBuf,
    command: String,
    sha256: String,
    seed: Option<u64>,
    trials: Option<u64>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    config_sha256: &'a str,
    seed: Option<u64>,
    trials: Option<u64>,
    result: &'a T,
}

impl Output {
    pub fn new(dir: PathBuf, command: &str, loaded: &LoadedConfig) -> Self {
        Output {
            dir,
            command: command.to_string(),
            sha256: loaded.sha256.clone(),
            seed: loaded.config.seed,
            trials: loaded.config.trials,
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.dir).map_err(|source| CliError::Io { path: self.dir.clone(), source })?;
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Io { path, source })
    }

    pub fn json<T: Serialize>(&self, name: &str, result: &T) -> Result<(), CliError> {
        let envelope = Envelope {
            command: &self.command,
            config_sha256: &self.sha256,
            seed: self.seed,
            trials: self.trials,
            result,
        };
        let mut text = serde_json::to_string_pretty(&envelope).expect("reports serialize");
        text.push('\n');
        self.write(name, &text)
    }

    /// Prepends `# config_sha256=… seed=…` to `body`.
    pub fn csv(&self, name: &str, body: &str) -> Result<(), CliError> {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        self.write(name, &format!("# config_sha256={} seed={}\n{}", self.sha256, seed, body))
    }
}
