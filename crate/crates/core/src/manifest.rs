//! Run manifests: the fully resolved settings of a run, stored as TOML next
//! to its outputs. A manifest doubles as a configuration file, so feeding
//! it back reproduces the run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalOptions;
use crate::pipeline::DetectorConfig;
use crate::synth::SynthConfig;

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub input: Option<PathBuf>,
    pub pattern: Option<String>,
    pub ground_truth: Option<PathBuf>,
    pub seed: Option<u64>,
    pub detector: Option<DetectorConfig>,
    pub synth: Option<SynthConfig>,
    pub eval: Option<EvalOptions>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            tool: "stlfd".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            ..RunManifest::default()
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidData(format!("manifest encoding: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("manifest: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        fs::write(&path, self.to_toml()?).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut m = RunManifest::new("detect");
        m.input = Some("seq".into());
        m.detector = Some(DetectorConfig::default());
        m.synth = Some(SynthConfig::default());
        m.eval = Some(EvalOptions::default());
        let text = m.to_toml().unwrap();
        assert_eq!(RunManifest::from_toml(&text).unwrap(), m);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let m = RunManifest::from_toml("[detector.abs]\nenabled = false\n").unwrap();
        let d = m.detector.unwrap();
        assert!(!d.abs.enabled);
        assert_eq!(d.abs.kernel, 15);
        assert_eq!(d.temporal.gap, 5);
        assert!(RunManifest::from_toml("[detector]\nbogus = 1\n").is_err());
    }
}
