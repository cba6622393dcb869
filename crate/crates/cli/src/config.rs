//! Run configuration: a JSON file whose fields flags can override.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nmmhmm::features::{FeatureConfig, NoiseKind};
use nmmhmm::io::SyntheticSpec;
use nmmhmm::train::TrainConfig;
use nmmhmm::{EmissionKind, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub kinds: Vec<NoiseKind>,
    /// Recorded noise files, by condition name.
    pub recordings: BTreeMap<String, PathBuf>,
    pub snrs_db: Vec<f64>,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { kinds: Vec::new(), recordings: BTreeMap::new(), snrs_db: vec![25.0, 20.0, 15.0, 10.0], seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub dataset: SyntheticSpec,
    pub gmm: TrainConfig,
    pub nmm: TrainConfig,
    pub snrs_db: Vec<f64>,
    pub noise_seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            dataset: nmmhmm::io::synthetic::warped_benchmark_spec(),
            gmm: nmmhmm::io::synthetic::benchmark_gmm_config(),
            nmm: nmmhmm::io::synthetic::benchmark_nmm_config(),
            snrs_db: vec![25.0, 20.0, 15.0, 10.0],
            noise_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub features: FeatureConfig,
    pub train: TrainConfig,
    pub manifest: Option<PathBuf>,
    pub folding: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub models_dir: Option<PathBuf>,
    pub noise: NoiseConfig,
    pub bench: BenchConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Format { path: path.to_path_buf(), message: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.manifest, &mut cfg.folding, &mut cfg.cache_dir, &mut cfg.out_dir, &mut cfg.models_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        for p in cfg.noise.recordings.values_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        self.train.validate()?;
        self.bench.dataset.validate()?;
        self.bench.gmm.validate()?;
        self.bench.nmm.validate()?;
        if self.bench.gmm.emission_kind != EmissionKind::Gmm || self.bench.nmm.emission_kind != EmissionKind::Nmm {
            return Err(Error::Config("bench.gmm and bench.nmm must use the gmm and nmm emission kinds".into()));
        }
        if self.noise.snrs_db.iter().chain(&self.bench.snrs_db).any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR values must be finite".into()));
        }
        Ok(())
    }
}
