//! Landmark-based boundary effectiveness discriminator.
//!
//! A convolutional trunk, shared across boundaries, reads each heatmap
//! channel on its own; a head per boundary (or one shared head) turns the
//! trunk features into a score in `(0, 1)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Conv, Init, Linear};
use crate::geometry::NUM_BOUNDARIES;
use crate::tensor::{Bound, Graph, ParamStore, Var};
use crate::{Error, Result, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscriminatorConfig {
    pub heatmap_side: usize,
    pub num_boundaries: usize,
    pub channels: usize,
    /// One head for every boundary instead of one head per boundary.
    pub shared_head: bool,
    /// A single score for the whole stack instead of one per boundary.
    pub global_score: bool,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            heatmap_side: 16,
            num_boundaries: NUM_BOUNDARIES,
            channels: 8,
            shared_head: false,
            global_score: false,
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.heatmap_side % 4 != 0 || self.heatmap_side < 4 {
            return Err(Error::config(format!("discriminator side {} must be a multiple of 4", self.heatmap_side)));
        }
        if self.channels == 0 || self.num_boundaries == 0 {
            return Err(Error::config("discriminator sizes must be positive"));
        }
        Ok(())
    }

    /// Scores per sample.
    pub fn outputs(&self) -> usize {
        if self.global_score {
            1
        } else {
            self.num_boundaries
        }
    }
}

#[derive(Debug, Clone)]
pub struct Discriminator {
    cfg: DiscriminatorConfig,
    store: ParamStore,
    trunk: [Conv; 3],
    heads: Vec<Linear>,
}

impl Discriminator {
    pub fn new(cfg: DiscriminatorConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let c = cfg.channels;
        let trunk = [
            Conv::new(&mut store, "trunk.0", 1, c, 3, 1, Init::He(1.0), &mut rng),
            Conv::new(&mut store, "trunk.1", c, c, 3, 2, Init::He(1.0), &mut rng),
            Conv::new(&mut store, "trunk.2", c, c, 3, 2, Init::He(1.0), &mut rng),
        ];
        let q = cfg.heatmap_side / 4;
        let features = c * q * q;
        let heads = if cfg.global_score {
            vec![Linear::new(&mut store, "head", features * cfg.num_boundaries, 1, Init::He(0.5), &mut rng)]
        } else if cfg.shared_head {
            vec![Linear::new(&mut store, "head", features, 1, Init::He(0.5), &mut rng)]
        } else {
            (0..cfg.num_boundaries)
                .map(|k| Linear::new(&mut store, &format!("head.{k}"), features, 1, Init::He(0.5), &mut rng))
                .collect()
        };
        Ok(Self { cfg, store, trunk, heads })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.cfg
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn zero_heads(&mut self) {
        for h in &self.heads {
            h.0.zero(&mut self.store);
        }
    }

    /// `[N, K, s, s]` heatmaps to `[N, K]` scores (`[N, 1]` in global mode).
    pub fn forward(&self, g: &mut Graph, p: &Bound, heatmaps: Var) -> Result<Var> {
        let shape = g.shape(heatmaps).to_vec();
        let (k, s) = (self.cfg.num_boundaries, self.cfg.heatmap_side);
        if shape.len() != 4 || shape[1] != k || shape[2] != s || shape[3] != s {
            return Err(Error::dim(format!("discriminator expects [N, {k}, {s}, {s}], got {shape:?}")));
        }
        let n = shape[0];
        let mut x = g.reshape(heatmaps, &[n * k, 1, s, s])?;
        for conv in &self.trunk {
            x = conv.forward_relu(g, p, x)?;
        }
        let q = s / 4;
        let f = self.cfg.channels * q * q;
        let per_boundary = g.reshape(x, &[n, k * f, 1, 1])?;
        let logits = if self.cfg.global_score {
            self.heads[0].forward(g, p, per_boundary)?
        } else {
            let parts = (0..k)
                .map(|i| {
                    let fi = g.slice_channels(per_boundary, i * f, f)?;
                    let head = &self.heads[if self.cfg.shared_head { 0 } else { i }];
                    head.forward(g, p, fi)
                })
                .collect::<Result<Vec<_>>>()?;
            g.concat(&parts)?
        };
        let scores = g.sigmoid(logits)?;
        g.reshape(scores, &[n, self.cfg.outputs()])
    }

    pub fn predict(&self, heatmaps: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let p = self.store.bind(&mut g, false)?;
        let x = g.constant(heatmaps.clone())?;
        let y = self.forward(&mut g, &p, x)?;
        Ok(g.value(y).clone())
    }
}
