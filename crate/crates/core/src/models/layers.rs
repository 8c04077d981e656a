//! Parameterised building blocks shared by the three networks.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::tensor::{Bound, Graph, ParamId, ParamStore, Var};
use crate::{Error, Result, Tensor};

/// How a layer's kernel is initialised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// He-normal scaled by the factor.
    He(f64),
    Zero,
}

/// Square convolution with bias.
#[derive(Debug, Clone)]
pub struct Conv {
    pub kernel: ParamId,
    pub bias: ParamId,
    pub stride: usize,
    pub padding: usize,
}

impl Conv {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_c: usize,
        out_c: usize,
        k: usize,
        stride: usize,
        init: Init,
        rng: &mut impl Rng,
    ) -> Self {
        let kernel = match init {
            Init::Zero => Tensor::zeros(&[out_c, in_c, k, k]),
            Init::He(gain) => {
                let std = gain * (2.0 / (in_c * k * k) as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("finite std");
                Tensor::from_fn(&[out_c, in_c, k, k], |_| normal.sample(rng))
            }
        };
        Self {
            kernel: store.add(format!("{name}.weight"), kernel),
            bias: store.add(format!("{name}.bias"), Tensor::zeros(&[out_c])),
            stride,
            padding: k / 2,
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Result<Var> {
        g.conv2d(x, p[self.kernel], Some(p[self.bias]), self.stride, self.padding)
    }

    pub fn forward_relu(&self, g: &mut Graph, p: &Bound, x: Var) -> Result<Var> {
        let y = self.forward(g, p, x)?;
        g.relu(y)
    }

    /// Zeroes kernel and bias.
    pub fn zero(&self, store: &mut ParamStore) {
        store.value_mut(self.kernel).data_mut().fill(0.0);
        store.value_mut(self.bias).data_mut().fill(0.0);
    }

    pub fn set_bias(&self, store: &mut ParamStore, value: f64) {
        store.value_mut(self.bias).data_mut().fill(value);
    }
}

/// `relu(x + conv(relu(conv(x))))`, channel count preserved.
#[derive(Debug, Clone)]
pub struct ResBlock {
    a: Conv,
    b: Conv,
}

impl ResBlock {
    pub fn new(store: &mut ParamStore, name: &str, c: usize, rng: &mut impl Rng) -> Self {
        Self {
            a: Conv::new(store, &format!("{name}.a"), c, c, 3, 1, Init::He(1.0), rng),
            b: Conv::new(store, &format!("{name}.b"), c, c, 3, 1, Init::He(0.5), rng),
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Result<Var> {
        let h = self.a.forward_relu(g, p, x)?;
        let h = self.b.forward(g, p, h)?;
        let s = g.add(x, h)?;
        g.relu(s)
    }
}

#[derive(Debug, Clone)]
struct HourglassLevel {
    skip: Conv,
    down: Conv,
    up: Conv,
}

/// Symmetric max-pool / nearest-upsample network with a skip branch at
/// every resolution.
#[derive(Debug, Clone)]
pub struct Hourglass {
    levels: Vec<HourglassLevel>,
    bottom: Conv,
}

impl Hourglass {
    pub fn new(store: &mut ParamStore, name: &str, c: usize, depth: usize, rng: &mut impl Rng) -> Self {
        let levels = (0..depth)
            .map(|d| HourglassLevel {
                skip: Conv::new(store, &format!("{name}.l{d}.skip"), c, c, 3, 1, Init::He(1.0), rng),
                down: Conv::new(store, &format!("{name}.l{d}.down"), c, c, 3, 1, Init::He(1.0), rng),
                up: Conv::new(store, &format!("{name}.l{d}.up"), c, c, 3, 1, Init::He(1.0), rng),
            })
            .collect();
        Self {
            levels,
            bottom: Conv::new(store, &format!("{name}.bottom"), c, c, 3, 1, Init::He(1.0), rng),
        }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Largest depth whose repeated halving keeps `side` even at every pool.
    pub fn max_depth(side: usize, wanted: usize) -> usize {
        let (mut d, mut s) = (0, side);
        while d < wanted && s % 2 == 0 && s >= 2 {
            s /= 2;
            d += 1;
        }
        d
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Result<Var> {
        self.level(g, p, x, 0)
    }

    fn level(&self, g: &mut Graph, p: &Bound, x: Var, d: usize) -> Result<Var> {
        let Some(lvl) = self.levels.get(d) else {
            return self.bottom.forward_relu(g, p, x);
        };
        let shape = g.shape(x);
        if shape[2] % 2 != 0 || shape[3] % 2 != 0 {
            return Err(Error::dim(format!("hourglass level {d} needs even extents, got {shape:?}")));
        }
        let skip = lvl.skip.forward_relu(g, p, x)?;
        let low = g.maxpool2(x)?;
        let low = lvl.down.forward_relu(g, p, low)?;
        let low = self.level(g, p, low, d + 1)?;
        let low = lvl.up.forward_relu(g, p, low)?;
        let up = g.upsample2(low)?;
        g.add(skip, up)
    }
}

/// Fully connected layer on `[N, F, 1, 1]` implemented as a 1x1 convolution.
#[derive(Debug, Clone)]
pub struct Linear(pub Conv);

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, outputs: usize, init: Init, rng: &mut impl Rng) -> Self {
        Self(Conv::new(store, name, inputs, outputs, 1, 1, init, rng))
    }

    /// Flattens any `[N, ...]` input before the product.
    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Result<Var> {
        let shape = g.shape(x).to_vec();
        let n = shape[0];
        let f: usize = shape[1..].iter().product();
        let flat = if shape.len() == 4 && shape[2] == 1 && shape[3] == 1 {
            x
        } else {
            g.reshape(x, &[n, f, 1, 1])?
        };
        self.0.forward(g, p, flat)
    }
}
