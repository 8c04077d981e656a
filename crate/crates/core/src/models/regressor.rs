//! Boundary-aware landmark regressor: a four-stage strided residual network
//! with optional heatmap fusion at the input and after each stage.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Conv, Hourglass, Init, Linear, ResBlock};
use crate::geometry::NUM_BOUNDARIES;
use crate::tensor::{Bound, Graph, ParamStore, Var};
use crate::{Error, Result, Tensor};

/// Where boundary heatmaps are fused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionLevel {
    Input,
    S1,
    S2,
    S3,
    S4,
}

impl FusionLevel {
    pub const ALL: [FusionLevel; 5] = [Self::Input, Self::S1, Self::S2, Self::S3, Self::S4];

    pub fn stage(self) -> Option<usize> {
        match self {
            Self::Input => None,
            Self::S1 => Some(0),
            Self::S2 => Some(1),
            Self::S3 => Some(2),
            Self::S4 => Some(3),
        }
    }
}

/// The mask-producing transform used for feature-level fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionKind {
    /// Hourglass over heatmaps concatenated with features.
    Hourglass,
    /// Stride-1 convolution chain over heatmaps concatenated with features.
    Conv,
    /// Hourglass over the features alone; heatmaps are not used.
    HourglassNoBoundary,
    /// No feature-level fusion.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressorHead {
    /// Global average pooling, then a linear layer.
    Gap,
    /// Linear layer over the flattened final feature map.
    Flatten,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressorConfig {
    pub input_side: usize,
    pub landmark_count: usize,
    pub num_boundaries: usize,
    pub widths: [usize; 4],
    pub fusion_levels: Vec<FusionLevel>,
    pub fusion_kind: FusionKind,
    pub fusion_depth: usize,
    pub head: RegressorHead,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        Self {
            input_side: 64,
            landmark_count: 68,
            num_boundaries: NUM_BOUNDARIES,
            widths: [8, 16, 24, 32],
            fusion_levels: FusionLevel::ALL.to_vec(),
            fusion_kind: FusionKind::Hourglass,
            fusion_depth: 2,
            head: RegressorHead::Flatten,
        }
    }
}

impl RegressorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_side % 16 != 0 {
            return Err(Error::config(format!("regressor input side {} must be a multiple of 16", self.input_side)));
        }
        if self.landmark_count == 0 || self.num_boundaries == 0 || self.widths.contains(&0) {
            return Err(Error::config("regressor sizes must be positive"));
        }
        let stage_levels = self.fusion_levels.iter().any(|l| l.stage().is_some());
        if self.fusion_kind == FusionKind::None && stage_levels {
            return Err(Error::config("fusion kind `none` cannot fuse at stage levels"));
        }
        Ok(())
    }

    pub fn fuses(&self, level: FusionLevel) -> bool {
        self.fusion_levels.contains(&level)
    }

    /// Whether any fusion consumes heatmaps.
    pub fn uses_heatmaps(&self) -> bool {
        self.fuses(FusionLevel::Input)
            || (self.fusion_kind != FusionKind::HourglassNoBoundary
                && self.fusion_kind != FusionKind::None
                && self.fusion_levels.iter().any(|l| l.stage().is_some()))
    }
}

/// `T` of the feature fusion: maps `[M ⊕ F]` (or `F`) to a `C`-channel logit map.
#[derive(Debug, Clone)]
struct FusionTransform {
    enter: Conv,
    body: Option<Hourglass>,
    mid: Option<Conv>,
    exit: Conv,
    with_heatmaps: bool,
}

#[derive(Debug, Clone)]
struct Stage {
    down: Conv,
    block: ResBlock,
    fusion: Option<FusionTransform>,
}

#[derive(Debug, Clone)]
pub struct Regressor {
    cfg: RegressorConfig,
    store: ParamStore,
    stages: Vec<Stage>,
    head: Linear,
}

/// Input fusion: `I ⊕ (M_1 ⊗ I) ⊕ ... ⊕ (M_K ⊗ I)` with each single-channel
/// `M_k` broadcast over the image channels.
pub fn input_fusion(g: &mut Graph, image: Var, heatmaps: Var) -> Result<Var> {
    let k = g.shape(heatmaps)[1];
    let maps = g.split_channels(heatmaps, &vec![1; k])?;
    let mut parts = Vec::with_capacity(k + 1);
    parts.push(image);
    for m in maps {
        parts.push(g.mul(image, m)?);
    }
    g.concat(&parts)
}

/// Resizes by repeated nearest up-sampling or max-pooling by powers of two.
pub fn resize_pow2(g: &mut Graph, x: Var, side: usize) -> Result<Var> {
    let mut cur = g.shape(x)[2];
    let mut x = x;
    while cur < side {
        x = g.upsample2(x)?;
        cur *= 2;
    }
    while cur > side {
        x = g.maxpool2(x)?;
        cur /= 2;
    }
    if g.shape(x)[2] != side || g.shape(x)[3] != side {
        return Err(Error::dim(format!("cannot resize {:?} to side {side}", g.shape(x))));
    }
    Ok(x)
}

/// Feature fusion `F ⊕ (F ⊗ sigmoid(T(...)))` given the transform's logits.
pub fn gate_features(g: &mut Graph, features: Var, logits: Var) -> Result<Var> {
    let mask = g.sigmoid(logits)?;
    let gated = g.mul(features, mask)?;
    g.concat(&[features, gated])
}

impl Regressor {
    pub fn new(cfg: RegressorConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let k = cfg.num_boundaries;
        let mut in_c = if cfg.fuses(FusionLevel::Input) { 3 * (k + 1) } else { 3 };
        let mut side = cfg.input_side;
        let mut stages = Vec::with_capacity(4);
        for (i, &c) in cfg.widths.iter().enumerate() {
            side /= 2;
            let name = format!("s{}", i + 1);
            let down = Conv::new(&mut store, &format!("{name}.down"), in_c, c, 3, 2, Init::He(1.0), &mut rng);
            let block = ResBlock::new(&mut store, &format!("{name}.res"), c, &mut rng);
            let level = FusionLevel::ALL[i + 1];
            let fusion = (cfg.fuses(level) && cfg.fusion_kind != FusionKind::None).then(|| {
                let with_heatmaps = cfg.fusion_kind != FusionKind::HourglassNoBoundary;
                let t_in = if with_heatmaps { k + c } else { c };
                let hourglass = matches!(cfg.fusion_kind, FusionKind::Hourglass | FusionKind::HourglassNoBoundary);
                let depth = Hourglass::max_depth(side, cfg.fusion_depth);
                FusionTransform {
                    enter: Conv::new(&mut store, &format!("{name}.t.enter"), t_in, c, 3, 1, Init::He(1.0), &mut rng),
                    body: hourglass.then(|| Hourglass::new(&mut store, &format!("{name}.t.hg"), c, depth, &mut rng)),
                    mid: (!hourglass)
                        .then(|| Conv::new(&mut store, &format!("{name}.t.mid"), c, c, 3, 1, Init::He(1.0), &mut rng)),
                    exit: Conv::new(&mut store, &format!("{name}.t.exit"), c, c, 3, 1, Init::He(0.5), &mut rng),
                    with_heatmaps,
                }
            });
            in_c = if fusion.is_some() { 2 * c } else { c };
            stages.push(Stage { down, block, fusion });
        }
        let features = match cfg.head {
            RegressorHead::Gap => in_c,
            RegressorHead::Flatten => in_c * side * side,
        };
        let head = Linear::new(&mut store, "head", features, 2 * cfg.landmark_count, Init::He(0.1), &mut rng);
        // Start every prediction at the crop centre.
        head.0.set_bias(&mut store, 0.5);
        Ok(Self { cfg, store, stages, head })
    }

    pub fn config(&self) -> &RegressorConfig {
        &self.cfg
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// `[N, 3, S, S]` image and `[N, K, S/4, S/4]` heatmaps to `[N, 2L]`
    /// normalised coordinates.
    pub fn forward(&self, g: &mut Graph, p: &Bound, image: Var, heatmaps: Option<Var>) -> Result<Var> {
        let s = self.cfg.input_side;
        let ishape = g.shape(image).to_vec();
        if ishape.len() != 4 || ishape[1] != 3 || ishape[2] != s || ishape[3] != s {
            return Err(Error::dim(format!("regressor expects [N, 3, {s}, {s}], got {ishape:?}")));
        }
        let n = ishape[0];
        let heatmaps = match heatmaps {
            Some(m) => {
                let ms = g.shape(m);
                if ms.len() != 4 || ms[0] != n || ms[1] != self.cfg.num_boundaries || ms[2] != s / 4 || ms[3] != s / 4 {
                    return Err(Error::dim(format!(
                        "regressor expects heatmaps [{n}, {}, {q}, {q}], got {ms:?}",
                        self.cfg.num_boundaries,
                        q = s / 4
                    )));
                }
                Some(m)
            }
            None if self.cfg.uses_heatmaps() => {
                return Err(Error::Usage("this regressor fuses heatmaps but none were given".into()))
            }
            None => None,
        };
        let mut x = if self.cfg.fuses(FusionLevel::Input) {
            let m = resize_pow2(g, heatmaps.expect("checked above"), s)?;
            input_fusion(g, image, m)?
        } else {
            image
        };
        for stage in &self.stages {
            x = stage.down.forward_relu(g, p, x)?;
            x = stage.block.forward(g, p, x)?;
            if let Some(t) = &stage.fusion {
                let side = g.shape(x)[2];
                let t_in = if t.with_heatmaps {
                    let m = resize_pow2(g, heatmaps.expect("checked above"), side)?;
                    g.concat(&[m, x])?
                } else {
                    x
                };
                let mut h = t.enter.forward_relu(g, p, t_in)?;
                if let Some(hg) = &t.body {
                    h = hg.forward(g, p, h)?;
                }
                if let Some(mid) = &t.mid {
                    h = mid.forward_relu(g, p, h)?;
                }
                let logits = t.exit.forward(g, p, h)?;
                x = gate_features(g, x, logits)?;
            }
        }
        if self.cfg.head == RegressorHead::Gap {
            x = g.global_avg_pool(x)?;
        }
        let y = self.head.forward(g, p, x)?;
        g.reshape(y, &[n, 2 * self.cfg.landmark_count])
    }

    pub fn predict(&self, images: &Tensor, heatmaps: Option<&Tensor>) -> Result<Tensor> {
        let mut g = Graph::new();
        let p = self.store.bind(&mut g, false)?;
        let x = g.constant(images.clone())?;
        let m = heatmaps.map(|m| g.constant(m.clone())).transpose()?;
        let y = self.forward(&mut g, &p, x, m)?;
        Ok(g.value(y).clone())
    }
}
