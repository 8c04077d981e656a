use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LabelRule;
use crate::geometry::{default_sigma, BoundaryScheme};
use crate::models::{DiscriminatorConfig, EstimatorConfig, RegressorConfig};
use crate::tensor::AdamConfig;
use crate::{Error, Result};

/// What the regressor receives as boundary heatmaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatmapSource {
    /// Estimator predictions, with the estimator trained alongside.
    Estimated,
    /// Ground-truth heatmaps.
    Oracle,
    /// All-zero heatmaps of the right shape.
    Zero,
    /// No heatmaps; the regressor must not fuse any.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    /// Built-in scheme id or scheme file path.
    pub scheme: String,
    pub input_side: usize,
    /// Heatmap σ; `None` picks the default for the heatmap side.
    pub sigma: Option<f64>,
    pub heatmap_source: HeatmapSource,
    /// Train the effectiveness discriminator and apply the adversarial term.
    pub adversarial: bool,
    pub lambda_adv: f64,
    /// Effectiveness distance threshold in heatmap pixels; `None` means σ.
    pub theta: Option<f64>,
    pub delta: f64,
    /// Feed ground truth instead of predictions to the regressor for this
    /// fraction of batches while the estimator is training.
    pub gt_mix: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub optimizer: AdamConfig,
    pub estimator: EstimatorConfig,
    pub regressor: RegressorConfig,
    pub discriminator: DiscriminatorConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scheme: "300w_68".into(),
            input_side: 64,
            sigma: None,
            heatmap_source: HeatmapSource::Estimated,
            adversarial: true,
            lambda_adv: 0.01,
            theta: None,
            delta: 0.8,
            gt_mix: 0.0,
            batch_size: 8,
            max_epochs: 40,
            patience: 5,
            optimizer: AdamConfig::default(),
            estimator: EstimatorConfig::default(),
            regressor: RegressorConfig::default(),
            discriminator: DiscriminatorConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load_scheme(&self) -> Result<BoundaryScheme> {
        BoundaryScheme::resolve(&self.scheme)
    }

    pub fn heatmap_side(&self) -> usize {
        self.input_side / 4
    }

    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or_else(|| default_sigma(self.heatmap_side()))
    }

    pub fn label_rule(&self) -> LabelRule {
        LabelRule {
            theta: self.theta.unwrap_or(self.sigma()),
            delta: self.delta,
        }
    }

    /// Whether the estimator exists and is trained.
    pub fn trains_estimator(&self) -> bool {
        self.heatmap_source == HeatmapSource::Estimated
    }

    /// Copies the shared sizes into the network configs, then validates.
    pub fn resolve(mut self) -> Result<Self> {
        let scheme = self.load_scheme()?;
        let k = scheme.num_boundaries();
        self.estimator.input_side = self.input_side;
        self.estimator.num_boundaries = k;
        self.regressor.input_side = self.input_side;
        self.regressor.landmark_count = scheme.landmark_count;
        self.regressor.num_boundaries = k;
        self.discriminator.heatmap_side = self.heatmap_side();
        self.discriminator.num_boundaries = k;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::config("batch_size and max_epochs must be positive"));
        }
        if !(self.sigma() > 0.0) {
            return Err(Error::config(format!("sigma must be positive, got {}", self.sigma())));
        }
        if !(0.0..=1.0).contains(&self.gt_mix) {
            return Err(Error::config(format!("gt_mix must lie in [0, 1], got {}", self.gt_mix)));
        }
        if !(self.lambda_adv >= 0.0) || !(self.optimizer.learning_rate > 0.0) {
            return Err(Error::config("lambda_adv must be >= 0 and the learning rate > 0"));
        }
        if self.adversarial && !self.trains_estimator() {
            return Err(Error::config("adversarial training needs heatmap_source `estimated`"));
        }
        if self.heatmap_source == HeatmapSource::None && self.regressor.uses_heatmaps() {
            return Err(Error::config("heatmap_source `none` with a regressor that fuses heatmaps"));
        }
        self.label_rule().validate()?;
        self.estimator.validate()?;
        self.regressor.validate()?;
        self.discriminator.validate()
    }
}
