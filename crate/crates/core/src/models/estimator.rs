//! Stacked-hourglass boundary heatmap estimator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Conv, Hourglass, Init};
use super::message::{MessagePassing, MessageTree};
use crate::geometry::NUM_BOUNDARIES;
use crate::tensor::{Bound, Graph, ParamStore, Var};
use crate::{Error, Result, Tensor};

const HEAD_BIAS: f64 = -2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    pub input_side: usize,
    pub stacks: usize,
    pub base_channels: usize,
    /// Channels per boundary branch at the end of each stack.
    pub branch_channels: usize,
    pub num_boundaries: usize,
    pub hourglass_depth: usize,
    pub message_passing: bool,
    pub message_tree: MessageTree,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            input_side: 64,
            stacks: 2,
            base_channels: 16,
            branch_channels: 2,
            num_boundaries: NUM_BOUNDARIES,
            hourglass_depth: 2,
            message_passing: true,
            message_tree: MessageTree::default(),
        }
    }
}

impl EstimatorConfig {
    pub fn heatmap_side(&self) -> usize {
        self.input_side / 4
    }

    pub fn validate(&self) -> Result<()> {
        if self.stacks == 0 {
            return Err(Error::config("estimator needs at least one stack"));
        }
        if self.input_side % 4 != 0 || self.input_side < 8 {
            return Err(Error::config(format!("input side {} must be a multiple of 4 and >= 8", self.input_side)));
        }
        if self.base_channels == 0 || self.branch_channels == 0 || self.num_boundaries == 0 {
            return Err(Error::config("estimator widths must be positive"));
        }
        if self.message_passing {
            self.message_tree.order(self.num_boundaries)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Stack {
    hourglass: Hourglass,
    to_branches: Conv,
    messages: Option<MessagePassing>,
    heads: Vec<Conv>,
    /// Feedback into the next stack's input: from branch features and heatmaps.
    feedback: Option<(Conv, Conv)>,
}

/// Heatmaps of every stack plus the final branch features.
#[derive(Debug, Clone)]
pub struct EstimatorOutput {
    /// `[N, K, S/4, S/4]` per stack, sigmoid-activated.
    pub heatmaps: Vec<Var>,
}

impl EstimatorOutput {
    pub fn last(&self) -> Var {
        *self.heatmaps.last().expect("at least one stack")
    }
}

#[derive(Debug, Clone)]
pub struct Estimator {
    cfg: EstimatorConfig,
    store: ParamStore,
    stem: [Conv; 2],
    stacks: Vec<Stack>,
}

impl Estimator {
    pub fn new(cfg: EstimatorConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let (c, k, b) = (cfg.base_channels, cfg.num_boundaries, cfg.branch_channels);
        let stem = [
            Conv::new(&mut store, "stem.0", 3, c, 3, 2, Init::He(1.0), &mut rng),
            Conv::new(&mut store, "stem.1", c, c, 3, 2, Init::He(1.0), &mut rng),
        ];
        let depth = Hourglass::max_depth(cfg.heatmap_side(), cfg.hourglass_depth);
        let mut stacks = Vec::with_capacity(cfg.stacks);
        for s in 0..cfg.stacks {
            let name = format!("stack{s}");
            let hourglass = Hourglass::new(&mut store, &format!("{name}.hg"), c, depth, &mut rng);
            let to_branches = Conv::new(&mut store, &format!("{name}.branches"), c, k * b, 1, 1, Init::He(1.0), &mut rng);
            let messages = if cfg.message_passing {
                Some(MessagePassing::new(
                    &mut store,
                    &format!("{name}.mp"),
                    &cfg.message_tree,
                    k,
                    b,
                    s > 0,
                    &mut rng,
                )?)
            } else {
                None
            };
            let heads = (0..k)
                .map(|i| Conv::new(&mut store, &format!("{name}.head.{i}"), b, 1, 1, 1, Init::He(1.0), &mut rng))
                .collect();
            let feedback = (s + 1 < cfg.stacks).then(|| {
                (
                    Conv::new(&mut store, &format!("{name}.fb.features"), k * b, c, 1, 1, Init::He(0.5), &mut rng),
                    Conv::new(&mut store, &format!("{name}.fb.heatmaps"), k, c, 1, 1, Init::He(0.5), &mut rng),
                )
            });
            stacks.push(Stack {
                hourglass,
                to_branches,
                messages,
                heads,
                feedback,
            });
        }
        // Most heatmap pixels are background; start the heads near zero output.
        for s in &stacks {
            for h in &s.heads {
                h.set_bias(&mut store, HEAD_BIAS);
            }
        }
        Ok(Self { cfg, store, stem, stacks })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Zeroes every heatmap head so each output is exactly `sigmoid(0)`.
    pub fn zero_heads(&mut self) {
        for s in &self.stacks {
            for h in &s.heads {
                h.zero(&mut self.store);
            }
        }
    }

    pub fn zero_messages(&mut self) {
        for m in self.stacks.iter().filter_map(|s| s.messages.as_ref()) {
            m.zero(&mut self.store);
        }
    }

    /// Forward pass on `[N, 3, S, S]`.
    pub fn forward(&self, g: &mut Graph, p: &Bound, image: Var) -> Result<EstimatorOutput> {
        let shape = g.shape(image).to_vec();
        if shape.len() != 4 || shape[1] != 3 || shape[2] != self.cfg.input_side || shape[3] != self.cfg.input_side {
            return Err(Error::dim(format!(
                "estimator expects [N, 3, {s}, {s}], got {shape:?}",
                s = self.cfg.input_side
            )));
        }
        let (k, b) = (self.cfg.num_boundaries, self.cfg.branch_channels);
        let mut x = self.stem[0].forward_relu(g, p, image)?;
        x = self.stem[1].forward_relu(g, p, x)?;
        let mut heatmaps = Vec::with_capacity(self.stacks.len());
        let mut prev: Option<Vec<Var>> = None;
        for stack in &self.stacks {
            let h = stack.hourglass.forward(g, p, x)?;
            let branches = stack.to_branches.forward(g, p, h)?;
            let mut groups = g.split_channels(branches, &vec![b; k])?;
            if let Some(mp) = &stack.messages {
                groups = mp.forward(g, p, &groups, prev.as_deref())?;
            }
            let logits = groups
                .iter()
                .zip(&stack.heads)
                .map(|(&grp, head)| head.forward(g, p, grp))
                .collect::<Result<Vec<_>>>()?;
            let logits = g.concat(&logits)?;
            let hm = g.sigmoid(logits)?;
            heatmaps.push(hm);
            if let Some((from_features, from_heatmaps)) = &stack.feedback {
                let features = g.concat(&groups)?;
                let f = from_features.forward(g, p, features)?;
                let m = from_heatmaps.forward(g, p, hm)?;
                let fb = g.add(f, m)?;
                x = g.add(x, fb)?;
            }
            prev = Some(groups);
        }
        Ok(EstimatorOutput { heatmaps })
    }

    /// Final-stack heatmaps for a batch, without recording gradients.
    pub fn predict(&self, images: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let p = self.store.bind(&mut g, false)?;
        let x = g.constant(images.clone())?;
        let out = self.forward(&mut g, &p, x)?;
        Ok(g.value(out.last()).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(side: usize, stacks: usize, c: usize) -> EstimatorConfig {
        EstimatorConfig {
            input_side: side,
            stacks,
            base_channels: c,
            ..Default::default()
        }
    }

    #[test]
    fn output_shapes_over_the_test_matrix() {
        for side in [64, 128] {
            for stacks in [1, 2] {
                for c in [4, 8] {
                    let est = Estimator::new(cfg(side, stacks, c), 0).unwrap();
                    let mut g = Graph::new();
                    let p = est.store().bind(&mut g, false).unwrap();
                    let x = g.constant(Tensor::full(&[1, 3, side, side], 0.5)).unwrap();
                    let out = est.forward(&mut g, &p, x).unwrap();
                    assert_eq!(out.heatmaps.len(), stacks);
                    for h in &out.heatmaps {
                        assert_eq!(g.shape(*h), &[1, 13, side / 4, side / 4]);
                        assert!(g.value(*h).data().iter().all(|&v| v > 0.0 && v < 1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn zero_heads_give_one_half() {
        let mut est = Estimator::new(cfg(64, 2, 4), 3).unwrap();
        est.zero_heads();
        let out = est.predict(&Tensor::from_fn(&[2, 3, 64, 64], |i| (i % 11) as f64 / 10.0)).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn wrong_input_side_is_a_dimension_error() {
        let est = Estimator::new(cfg(64, 1, 4), 0).unwrap();
        assert!(matches!(est.predict(&Tensor::zeros(&[1, 3, 32, 32])), Err(Error::Dimension(_))));
    }

    #[test]
    fn broken_tree_is_a_config_error() {
        let mut c = cfg(64, 1, 4);
        c.message_tree = MessageTree::new(vec![(0, 1)]);
        assert!(matches!(Estimator::new(c, 0), Err(Error::Config(_))));
    }
}
