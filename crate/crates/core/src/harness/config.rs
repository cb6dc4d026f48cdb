use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{DatasetConfig, EncodingSpec};
use crate::dqn::DqnConfig;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::gan::{GanTrainConfig, GeneratorSpec};
use crate::scene::SceneGenerator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSection {
    pub n_samples: usize,
    pub grid_size: usize,
    pub tx_min: usize,
    pub tx_max: usize,
    pub val_ratio: f64,
    pub include_rot180: bool,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            n_samples: 500,
            grid_size: 64,
            tx_min: 1,
            tx_max: 3,
            val_ratio: 0.1,
            include_rot180: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanSection {
    pub filters: usize,
    pub width_divisor: usize,
    pub train: GanTrainConfig,
}

impl Default for GanSection {
    fn default() -> Self {
        GanSection {
            filters: 256,
            width_divisor: 32,
            train: GanTrainConfig {
                epochs: 30,
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationSection {
    pub filters: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Also train the UNet regressor and the autoencoder at `gan.filters`.
    pub compare_models: bool,
}

impl Default for AblationSection {
    fn default() -> Self {
        AblationSection {
            filters: vec![32, 128, 256],
            seeds: vec![0, 1, 2],
            compare_models: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareSection {
    /// Held-out scene seeds; disjoint from dataset scene streams.
    pub scene_seeds: Vec<u64>,
    pub n_bs: Vec<usize>,
    pub random_trials: usize,
    pub bf_candidate_limit: usize,
    /// Lattice stride for two-station brute force; defaults to the env stride.
    pub bf_pair_stride: Option<usize>,
    /// Use this surrogate checkpoint instead of the oracle.
    pub gan_checkpoint: Option<PathBuf>,
}

impl Default for CompareSection {
    fn default() -> Self {
        CompareSection {
            scene_seeds: vec![1_000_001, 1_000_002, 1_000_003],
            n_bs: vec![1, 2],
            random_trials: 1,
            bf_candidate_limit: 3000,
            bf_pair_stride: None,
            gan_checkpoint: None,
        }
    }
}

/// Everything an experiment run depends on. Serialized form is hashed into
/// every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: DatasetSection,
    pub gan: GanSection,
    pub ablation: AblationSection,
    pub env: EnvConfig,
    pub dqn: DqnConfig,
    pub compare: CompareSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            dataset: DatasetSection::default(),
            gan: GanSection::default(),
            ablation: AblationSection::default(),
            env: EnvConfig {
                candidate_stride: 4,
                ..Default::default()
            },
            dqn: DqnConfig::default(),
            compare: CompareSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset_config().validate()?;
        self.gan.train.validate()?;
        self.generator_spec(self.gan.filters)
            .check_grid(self.dataset.grid_size)?;
        crate::dqn::QNetworkSpec::new(self.dataset.grid_size, 1).validate()?;
        self.env.validate()?;
        self.dqn.validate()?;
        if self.ablation.seeds.is_empty() || self.ablation.filters.is_empty() {
            return Err(Error::InvalidConfig(
                "ablation needs at least one seed and one filter count".into(),
            ));
        }
        if self.compare.random_trials == 0
            || self.compare.n_bs.iter().any(|&n| !(1..=2).contains(&n))
        {
            return Err(Error::InvalidConfig(
                "compare needs random_trials >= 1 and n_bs in {1, 2}".into(),
            ));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn scene_generator(&self) -> SceneGenerator {
        SceneGenerator::for_grid(self.dataset.grid_size)
    }

    pub fn dataset_config(&self) -> DatasetConfig {
        DatasetConfig {
            n_samples: self.dataset.n_samples,
            tx_min: self.dataset.tx_min,
            tx_max: self.dataset.tx_max,
            seed: self.seed,
            generator: self.scene_generator(),
            encoding: EncodingSpec::default(),
        }
    }

    pub fn generator_spec(&self, filters: usize) -> GeneratorSpec {
        GeneratorSpec {
            width_divisor: self.gan.width_divisor,
            ..GeneratorSpec::for_grid(self.dataset.grid_size, filters)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), cfg);
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig::from_toml_str("seed = 4\n[dqn]\nepisodes = 10\n").unwrap();
        assert_eq!(a.hash(), ExperimentConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(b.dqn.episodes, 10);
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_toml_str("[dataset]\ngrid_size = 24\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[compare]\nn_bs = [3]\n").is_err());
        assert!(ExperimentConfig::from_toml_str("bogus = 1\n").is_ok());
    }
}
