use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::protocol::Protocol;
use crate::classify::TrainParams;
use crate::error::{Error, Result};
use crate::metrics::Thresholds;
use crate::par::Parallelism;
use crate::stego::{EngineId, EngineParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticCorpus {
    pub n: usize,
    pub seed: u64,
}

/// Exactly one of `manifest` or `synthetic` must be set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub manifest: Option<PathBuf>,
    pub synthetic: Option<SyntheticCorpus>,
    /// Overrides the manifest's marker (or the bundled one).
    pub marker: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub seed: u64,
    pub train_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            train_fraction: 0.7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub train: EngineId,
    pub test: EngineId,
    pub protocol: Protocol,
}

impl ScenarioConfig {
    pub fn name(&self) -> String {
        format!("{}-{}-{}", self.train, self.test, self.protocol)
    }

    pub fn is_intra(&self) -> bool {
        self.train == self.test
    }

    /// Both protocols for every ordered engine pair.
    pub fn all() -> Vec<ScenarioConfig> {
        let mut out = Vec::new();
        for protocol in [Protocol::P8_8, Protocol::P6_8] {
            for train in EngineId::ALL {
                for test in EngineId::ALL {
                    out.push(ScenarioConfig { train, test, protocol });
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdConfig {
    #[serde(flatten)]
    pub default: Thresholds,
    /// Recalibrated values for individual engines.
    pub engine: BTreeMap<EngineId, Thresholds>,
}

impl ThresholdConfig {
    pub fn for_engine(&self, id: EngineId) -> Thresholds {
        self.engine.get(&id).copied().unwrap_or(self.default)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Cell ids replacing the default grid.
    pub cells: Option<Vec<String>>,
    /// Cells excluded from training under P6-8; default is the first and
    /// last listed cell of every class with more than two cells.
    pub held_out: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: CorpusConfig,
    pub key: u64,
    /// Root of the per-image manipulation seeds.
    pub seed: u64,
    pub split: SplitConfig,
    pub engines: EngineParams,
    pub scenarios: Vec<ScenarioConfig>,
    pub thresholds: ThresholdConfig,
    pub classifier: TrainParams,
    pub grid: GridConfig,
    pub cache_dir: Option<PathBuf>,
    pub parallelism: Parallelism,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            corpus: CorpusConfig {
                synthetic: Some(SyntheticCorpus { n: 50, seed: 7 }),
                ..Default::default()
            },
            key: 0x1ca0_2024,
            seed: 2024,
            split: SplitConfig::default(),
            engines: EngineParams::default(),
            scenarios: ScenarioConfig::all(),
            thresholds: ThresholdConfig::default(),
            classifier: TrainParams::default(),
            grid: GridConfig::default(),
            cache_dir: None,
            parallelism: Parallelism::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.corpus.manifest.as_mut().map(resolve);
        cfg.corpus.marker.as_mut().map(resolve);
        cfg.cache_dir.as_mut().map(resolve);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.corpus.manifest, &self.corpus.synthetic) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(Error::Config(
                    "corpus needs exactly one of `manifest` or `synthetic`".into(),
                ))
            }
            (None, Some(s)) if s.n == 0 => {
                return Err(Error::Config("synthetic corpus needs n >= 1".into()))
            }
            _ => {}
        }
        let f = self.split.train_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must be in (0, 1), got {f}"
            )));
        }
        if self.scenarios.is_empty() {
            return Err(Error::Config("no scenarios configured".into()));
        }
        if !(self.engines.dct_step > 0.0) {
            return Err(Error::Config("dct_step must be positive".into()));
        }
        Ok(())
    }
}
