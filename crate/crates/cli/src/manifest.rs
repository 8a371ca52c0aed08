use std::fs;
use std::path::{Path, PathBuf};

use ltcache::scenario::ScenarioConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_err, CliError, Result};

/// Everything needed to repeat a run: the command, the fully resolved
/// scenario, seeds, the code version and a digest of every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: ScenarioConfig,
    pub seeds: Seeds,
    pub version: VersionInfo,
    pub outputs: Vec<OutputRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    pub rng: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionInfo {
    pub package: String,
    pub version: String,
    pub digest: String,
}

impl VersionInfo {
    pub fn current() -> Self {
        let package = env!("CARGO_PKG_NAME").to_string();
        let version = env!("CARGO_PKG_VERSION").to_string();
        let mut h = Sha256::new();
        h.update(package.as_bytes());
        h.update(version.as_bytes());
        h.update(ltcache::seed::RNG_ALGORITHM.as_bytes());
        Self {
            package,
            version,
            digest: hex::encode(h.finalize()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
}

/// Collects output files as they are written into the run directory.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<OutputRecord>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        self.written.push(OutputRecord {
            file: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    pub fn write_json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable output");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(self, command: &str, config: &ScenarioConfig) -> Result<PathBuf> {
        let manifest = RunManifest {
            command: command.to_string(),
            config: config.clone(),
            seeds: Seeds {
                master: config.seed,
                rng: ltcache::seed::RNG_ALGORITHM.to_string(),
            },
            version: VersionInfo::current(),
            outputs: self.written,
        };
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).expect("serializable manifest");
        text.push('\n');
        fs::write(&path, text).map_err(io_err(&path))?;
        Ok(path)
    }
}

/// Reads a scenario file, or the resolved scenario out of a run manifest.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
        CliError::Core(ltcache::Error::Config {
            path: ".".into(),
            message: e.to_string(),
        })
    })?;
    let is_manifest = value.get("command").is_some() && value.get("config").is_some();
    let text = if is_manifest {
        value["config"].to_string()
    } else {
        text
    };
    Ok(ScenarioConfig::from_json(&text)?)
}
