//! Run configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use boundary_core::data::{DatasetManifest, SynthConfig, DEFAULT_EXPAND};
use boundary_core::eval::{NormalizationKind, DEFAULT_THRESHOLD};
use boundary_core::geometry::BoundaryScheme;
use boundary_core::train::{Dataset, TrainConfig};
use boundary_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Everything a run needs. Loaded from `--config`, then overridden by flags,
/// then written beside the outputs as `resolved_config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub data: DataConfig,
    pub eval: EvalConfig,
    /// Variant labels for `ablate`.
    pub variants: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Manifests replace the synthetic corpus when given.
    pub train_manifest: Option<PathBuf>,
    pub val_manifest: Option<PathBuf>,
    pub expand: f64,
    pub synthetic: SyntheticData,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            train_manifest: None,
            val_manifest: None,
            expand: DEFAULT_EXPAND,
            synthetic: SyntheticData::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticData {
    pub n_train: usize,
    pub n_val: usize,
    pub occlusion_fraction: f64,
    pub max_rotation_deg: f64,
    pub scale_jitter: f64,
    pub noise: f64,
}

impl Default for SyntheticData {
    fn default() -> Self {
        let s = SynthConfig::default();
        Self {
            n_train: 200,
            n_val: 50,
            occlusion_fraction: s.occlusion_fraction,
            max_rotation_deg: s.max_rotation_deg,
            scale_jitter: s.scale_jitter,
            noise: s.noise,
        }
    }
}

impl SyntheticData {
    pub fn synth_config(&self, side: usize) -> SynthConfig {
        SynthConfig {
            side,
            occlusion_fraction: self.occlusion_fraction,
            max_rotation_deg: self.max_rotation_deg,
            scale_jitter: self.scale_jitter,
            noise: self.noise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub normalizations: Vec<NormalizationKind>,
    pub threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            normalizations: NormalizationKind::ALL.to_vec(),
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl RunConfig {
    /// Reads a config file; relative manifest paths are taken relative to it.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data.train_manifest, &mut cfg.data.val_manifest].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    /// Validates the training section, filling in derived sizes.
    pub fn resolve(mut self) -> Result<Self> {
        self.train = self.train.resolve()?;
        if self.eval.normalizations.is_empty() {
            return Err(Error::Config("at least one normalization is required".into()));
        }
        if !(self.eval.threshold > 0.0) {
            return Err(Error::Config("threshold must be positive".into()));
        }
        if self.data.train_manifest.is_some() != self.data.val_manifest.is_some() {
            return Err(Error::Config("give both train_manifest and val_manifest, or neither".into()));
        }
        Ok(self)
    }

    /// Training and validation sets: the manifests when configured,
    /// otherwise the synthetic corpus seeded from the training seed.
    pub fn datasets(&self) -> Result<(Dataset, Dataset)> {
        let scheme = self.train.load_scheme()?;
        let sigma = self.train.sigma();
        match (&self.data.train_manifest, &self.data.val_manifest) {
            (Some(tr), Some(va)) => Ok((self.manifest_dataset(tr, &scheme)?, self.manifest_dataset(va, &scheme)?)),
            _ => {
                let s = &self.data.synthetic;
                boundary_core::ablation::synthetic_split(
                    &scheme,
                    &s.synth_config(self.train.input_side),
                    s.n_train,
                    s.n_val,
                    self.train.seed,
                    sigma,
                )
            }
        }
    }

    pub fn manifest_dataset(&self, path: &Path, scheme: &BoundaryScheme) -> Result<Dataset> {
        let manifest = DatasetManifest::load(path)?;
        let samples = manifest.load_samples(scheme, self.train.input_side, self.data.expand)?;
        Dataset::prepare(&samples, scheme, self.train.sigma())
    }
}
