//! Named component variants and their training runs.
//!
//! Labels: `BL` (no fusion), `BL+L1` .. `BL+L1&2&3&4` (fusion levels),
//! `BL+HG/B`, `BL+CL`, `BL+HG` (fusion subnet), `HBL`, `HBL+MP`,
//! `HBL+MP+AL` (estimator refinements) and `LAB+Oracle` (ground-truth
//! heatmaps). `HBL` is the plain estimator with full hourglass fusion, so
//! `BL+L1&2&3&4`, `BL+HG` and `HBL` name the same configuration; `LAB` is
//! an alias of `HBL+MP+AL` and `+Oracle` of `LAB+Oracle`.

use serde::{Deserialize, Serialize};

use crate::data::{synth_faces, SynthConfig};
use crate::eval::NormalizationKind;
use crate::geometry::BoundaryScheme;
use crate::models::{FusionKind, FusionLevel};
use crate::train::{train, Dataset, EpochRecord, HeatmapSource, TrainConfig, TrainReport};
use crate::{Error, Result};

pub const VARIANTS: [&str; 13] = [
    "BL",
    "BL+L1",
    "BL+L1&2",
    "BL+L1&2&3",
    "BL+L1&2&3&4",
    "BL+HG/B",
    "BL+CL",
    "BL+HG",
    "HBL",
    "HBL+MP",
    "HBL+MP+AL",
    "LAB",
    "LAB+Oracle",
];

/// Fusion level sets of the level sweep, from none to all.
pub fn level_sweep() -> [Vec<FusionLevel>; 5] {
    use FusionLevel::*;
    [vec![], vec![Input, S1], vec![Input, S1, S2], vec![Input, S1, S2, S3], FusionLevel::ALL.to_vec()]
}

fn plain(mut cfg: TrainConfig) -> TrainConfig {
    cfg.heatmap_source = HeatmapSource::Estimated;
    cfg.estimator.message_passing = false;
    cfg.adversarial = false;
    cfg.regressor.fusion_kind = FusionKind::Hourglass;
    cfg.regressor.fusion_levels = FusionLevel::ALL.to_vec();
    cfg
}

fn no_heatmaps(mut cfg: TrainConfig) -> TrainConfig {
    cfg.heatmap_source = HeatmapSource::None;
    cfg.adversarial = false;
    cfg
}

/// The configuration of a named variant on top of `base` (seed, sizes,
/// optimiser and schedule are kept).
pub fn variant_config(label: &str, base: &TrainConfig) -> Result<TrainConfig> {
    let b = base.clone();
    let [none, l1, l12, l123, _] = level_sweep();
    let cfg = match label {
        "BL" => {
            let mut c = no_heatmaps(plain(b));
            c.regressor.fusion_levels = none;
            c
        }
        "BL+L1" | "BL+L1&2" | "BL+L1&2&3" => {
            let mut c = plain(b);
            c.regressor.fusion_levels = match label {
                "BL+L1" => l1,
                "BL+L1&2" => l12,
                _ => l123,
            };
            c
        }
        "BL+L1&2&3&4" | "BL+HG" | "HBL" => plain(b),
        "BL+HG/B" => {
            let mut c = no_heatmaps(plain(b));
            c.regressor.fusion_kind = FusionKind::HourglassNoBoundary;
            c.regressor.fusion_levels.retain(|l| l.stage().is_some());
            c
        }
        "BL+CL" => {
            let mut c = plain(b);
            c.regressor.fusion_kind = FusionKind::Conv;
            c
        }
        "HBL+MP" => {
            let mut c = plain(b);
            c.estimator.message_passing = true;
            c
        }
        "HBL+MP+AL" | "LAB" => {
            let mut c = plain(b);
            c.estimator.message_passing = true;
            c.adversarial = true;
            c
        }
        "LAB+Oracle" | "+Oracle" => {
            let mut c = plain(b);
            c.heatmap_source = HeatmapSource::Oracle;
            c
        }
        other => return Err(Error::config(format!("unknown variant `{other}`; known: {}", VARIANTS.join(", ")))),
    };
    cfg.resolve()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub label: String,
    pub seed: u64,
    pub val_nme: f64,
    /// Mean absolute heatmap error of the estimator, when there is one.
    pub heatmap_error: Option<f64>,
    pub report: TrainReport,
}

/// Trains one variant and measures it on `val`.
pub fn run_variant(
    label: &str,
    base: &TrainConfig,
    train_set: &Dataset,
    val: &Dataset,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<VariantResult> {
    let cfg = variant_config(label, base)?;
    let seed = cfg.seed;
    let (pipeline, report) = train(cfg, train_set, val, on_epoch)?;
    Ok(VariantResult {
        label: label.to_string(),
        seed,
        val_nme: pipeline.mean_nme(val, NormalizationKind::InterOcular)?,
        heatmap_error: pipeline.heatmap_error(val)?,
        report,
    })
}

/// Procedural train and validation sets with disjoint seeds.
pub fn synthetic_split(
    scheme: &BoundaryScheme,
    synth: &SynthConfig,
    n_train: usize,
    n_val: usize,
    seed: u64,
    sigma: f64,
) -> Result<(Dataset, Dataset)> {
    let tr = synth_faces(n_train, seed.wrapping_mul(2), scheme, synth)?;
    let va = synth_faces(n_val, seed.wrapping_mul(2) + 1, scheme, synth)?;
    Ok((Dataset::prepare(&tr, scheme, sigma)?, Dataset::prepare(&va, scheme, sigma)?))
}
