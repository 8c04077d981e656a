//! Heatmaps from an estimator trained under one landmark scheme, consumed by
//! a regressor for another. The thirteen boundaries are shared, so no
//! landmark remapping takes place.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::BoundaryScheme;
use crate::models::{Checkpoint, Estimator, Regressor};
use crate::train::{Dataset, EpochRecord, HeatmapSource, Pipeline, TrainConfig, TrainReport, Trainer};
use crate::{Error, Result, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeConfig {
    /// Checkpoint holding an `estimator` network.
    pub estimator_checkpoint: PathBuf,
    /// Scheme the estimator was trained under.
    pub source_scheme: String,
    pub target_scheme: String,
    /// Trained target-scheme pipeline; required for inference only.
    #[serde(default)]
    pub regressor_checkpoint: Option<PathBuf>,
    /// Replace the heatmaps by zeros.
    #[serde(default)]
    pub without_boundary: bool,
}

impl BridgeConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.estimator_checkpoint = base.join(&cfg.estimator_checkpoint);
        cfg.regressor_checkpoint = cfg.regressor_checkpoint.map(|p| base.join(p));
        Ok(cfg)
    }
}

/// Both schemes must list the same boundaries in the same order.
pub fn check_compatible(source: &BoundaryScheme, target: &BoundaryScheme) -> Result<()> {
    let (s, t) = (source.boundary_names(), target.boundary_names());
    if s != t {
        let at = s.iter().zip(&t).position(|(a, b)| a != b).unwrap_or(s.len().min(t.len()));
        return Err(Error::config(format!(
            "schemes `{}` and `{}` disagree on boundary {at}: {:?} vs {:?}",
            source.scheme_id,
            target.scheme_id,
            s.get(at),
            t.get(at)
        )));
    }
    Ok(())
}

/// The estimator stored in a checkpoint, with the scheme it was trained on.
pub fn load_estimator(ck: &Checkpoint) -> Result<(Estimator, BoundaryScheme)> {
    if !ck.has("estimator") {
        return Err(Error::config("checkpoint holds no estimator"));
    }
    let cfg: TrainConfig =
        serde_json::from_value(ck.config.clone()).map_err(|e| Error::config(format!("checkpoint config: {e}")))?;
    let cfg = cfg.resolve()?;
    let mut est = Estimator::new(cfg.estimator.clone(), 0)?;
    ck.restore("estimator", est.store_mut())?;
    Ok((est, cfg.load_scheme()?))
}

/// Source estimator and target regressor joined at the heatmaps.
#[derive(Debug, Clone)]
pub struct Bridge {
    source: BoundaryScheme,
    target: BoundaryScheme,
    estimator: Estimator,
    regressor: Regressor,
    without_boundary: bool,
}

impl Bridge {
    pub fn new(
        source: BoundaryScheme,
        target: BoundaryScheme,
        estimator: Estimator,
        regressor: Regressor,
        without_boundary: bool,
    ) -> Result<Self> {
        check_compatible(&source, &target)?;
        if regressor.config().landmark_count != target.landmark_count {
            return Err(Error::config(format!(
                "regressor predicts {} landmarks, target scheme `{}` has {}",
                regressor.config().landmark_count,
                target.scheme_id,
                target.landmark_count
            )));
        }
        if estimator.config().input_side != regressor.config().input_side {
            return Err(Error::config("estimator and regressor input sides differ"));
        }
        Ok(Self {
            source,
            target,
            estimator,
            regressor,
            without_boundary,
        })
    }

    pub fn load(cfg: &BridgeConfig) -> Result<Self> {
        let (estimator, trained_on) = load_estimator(&Checkpoint::load(&cfg.estimator_checkpoint)?)?;
        let source = BoundaryScheme::resolve(&cfg.source_scheme)?;
        if trained_on.scheme_id != source.scheme_id {
            return Err(Error::config(format!(
                "estimator was trained on `{}`, config names `{}`",
                trained_on.scheme_id, source.scheme_id
            )));
        }
        let target = BoundaryScheme::resolve(&cfg.target_scheme)?;
        let path = cfg
            .regressor_checkpoint
            .as_ref()
            .ok_or_else(|| Error::config("bridge inference needs `regressor_checkpoint`"))?;
        let pipeline = Pipeline::from_checkpoint(&Checkpoint::load(path)?)?;
        Self::new(source, target, estimator, pipeline.regressor().clone(), cfg.without_boundary)
    }

    pub fn source(&self) -> &BoundaryScheme {
        &self.source
    }

    pub fn target(&self) -> &BoundaryScheme {
        &self.target
    }

    pub fn heatmaps(&self, images: &Tensor) -> Result<Tensor> {
        let maps = self.estimator.predict(images)?;
        Ok(if self.without_boundary { Tensor::zeros(maps.shape()) } else { maps })
    }

    /// `[B, 2 L_target]` normalised coordinates.
    pub fn forward(&self, images: &Tensor) -> Result<Tensor> {
        let maps = match self.regressor.config().uses_heatmaps() {
            true => Some(self.heatmaps(images)?),
            false => None,
        };
        self.regressor.predict(images, maps.as_ref())
    }
}

/// Trains a target-scheme regressor on heatmaps of a frozen source
/// estimator, or on zero heatmaps when `without_boundary` is set.
pub fn train_bridged(
    estimator: &Estimator,
    source: &BoundaryScheme,
    target_config: TrainConfig,
    without_boundary: bool,
    train: &Dataset,
    val: &Dataset,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<(Pipeline, TrainReport)> {
    check_compatible(source, &target_config.load_scheme()?)?;
    let pipeline = if without_boundary {
        let mut cfg = target_config;
        cfg.heatmap_source = HeatmapSource::Zero;
        cfg.adversarial = false;
        Pipeline::new(cfg)?
    } else {
        Pipeline::with_frozen_estimator(target_config, estimator.clone())?
    };
    let mut t = Trainer::from_pipeline(pipeline);
    let report = t.fit(train, val, on_epoch)?;
    Ok((t.into_pipeline(), report))
}
