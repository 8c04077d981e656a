use super::conv::{self, ConvGeom, ConvGrads};
use super::Tensor;
use crate::{Error, Result};

/// Clamp applied to probabilities before every logarithm.
pub const LOG_EPS: f64 = 1e-7;

/// Handle to a node recorded in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryKind {
    Add,
    Mul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resample {
    MaxPool2,
    NearestUpsample2,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d {
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        geom: ConvGeom,
    },
    Binary {
        a: Var,
        b: Var,
        kind: BinaryKind,
        broadcast: bool,
    },
    Concat {
        inputs: Vec<Var>,
    },
    SliceChannels {
        input: Var,
        start: usize,
    },
    Activation {
        input: Var,
        kind: Activation,
    },
    MaxPool2 {
        input: Var,
        argmax: Vec<usize>,
    },
    Upsample2 {
        input: Var,
    },
    GlobalAvgPool {
        input: Var,
    },
    Reshape {
        input: Var,
    },
    Scale {
        input: Var,
        factor: f64,
    },
    Sum {
        input: Var,
    },
    Mean {
        input: Var,
    },
    MeanSquaredError {
        input: Var,
        target: Tensor,
    },
    LogClamped {
        input: Var,
        complement: bool,
    },
    EffectivenessLog {
        input: Var,
        labels: Vec<bool>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Computation record for one forward pass.
///
/// Nodes are appended in execution order, so the node list is already a
/// topological order and backward is a single reverse sweep.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to the `requires_grad` leaves of a graph.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }
}

fn check_finite(name: &str, data: &[f64]) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name.to_string()))
    }
}

fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

fn clamp_prob(x: f64) -> f64 {
    x.clamp(LOG_EPS, 1.0 - LOG_EPS)
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    fn push(&mut self, name: &str, value: Tensor, op: Op, needs_grad: bool) -> Result<Var> {
        check_finite(name, value.data())?;
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn needs(&self, var: Var) -> bool {
        self.nodes[var.0].needs_grad
    }

    /// Records a leaf. Leaves with `requires_grad` receive gradients in [`Graph::backward`].
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Result<Var> {
        self.push("leaf", value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.leaf(value, false)
    }

    /// 2-d cross-correlation over `[N, C, H, W]` with a `[O, C, kh, kw]` kernel.
    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Option<Var>, stride: usize, padding: usize) -> Result<Var> {
        let [n, c, h, w] = self.value(input).dims4()?;
        let [o, kc, kh, kw] = self.value(kernel).dims4()?;
        if c != kc {
            return Err(Error::dim(format!("conv2d: input has {c} channels, kernel expects {kc}")));
        }
        if stride == 0 {
            return Err(Error::dim("conv2d: stride must be >= 1"));
        }
        if kh > h + 2 * padding || kw > w + 2 * padding {
            return Err(Error::dim(format!(
                "conv2d: kernel {kh}x{kw} larger than padded input {}x{}",
                h + 2 * padding,
                w + 2 * padding
            )));
        }
        if let Some(b) = bias {
            if self.value(b).len() != o {
                return Err(Error::dim(format!("conv2d: bias has {} entries, expected {o}", self.value(b).len())));
            }
        }
        let geom = ConvGeom {
            n,
            c,
            h,
            w,
            o,
            kh,
            kw,
            stride,
            pad: padding,
            oh: (h + 2 * padding - kh) / stride + 1,
            ow: (w + 2 * padding - kw) / stride + 1,
        };
        let data = conv::forward(
            self.value(input).data(),
            self.value(kernel).data(),
            bias.map(|b| self.nodes[b.0].value.data()),
            &geom,
        );
        let value = Tensor::new(&[n, o, geom.oh, geom.ow], data)?;
        let needs = self.needs(input) || self.needs(kernel) || bias.is_some_and(|b| self.needs(b));
        self.push(
            "conv2d",
            value,
            Op::Conv2d {
                input,
                kernel,
                bias,
                geom,
            },
            needs,
        )
    }

    /// Pointwise add/multiply. `b` may also be single-channel `[N, 1, H, W]`,
    /// in which case it is broadcast across every channel of `a`.
    pub fn elementwise(&mut self, a: Var, b: Var, kind: BinaryKind) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        let broadcast = if sa == sb {
            false
        } else if sa.len() == 4 && sb.len() == 4 && sb[1] == 1 && sa[0] == sb[0] && sa[2..] == sb[2..] {
            true
        } else {
            return Err(Error::dim(format!("elementwise: incompatible shapes {sa:?} and {sb:?}")));
        };
        let va = self.value(a).data();
        let vb = self.value(b).data();
        let f = |x: f64, y: f64| match kind {
            BinaryKind::Add => x + y,
            BinaryKind::Mul => x * y,
        };
        let data: Vec<f64> = if broadcast {
            let (c, plane) = (sa[1], sa[2] * sa[3]);
            let mut out = Vec::with_capacity(va.len());
            for n in 0..sa[0] {
                let bplane = &vb[n * plane..(n + 1) * plane];
                for ch in 0..c {
                    let start = (n * c + ch) * plane;
                    out.extend(va[start..start + plane].iter().zip(bplane).map(|(&x, &y)| f(x, y)));
                }
            }
            out
        } else {
            va.iter().zip(vb).map(|(&x, &y)| f(x, y)).collect()
        };
        let value = Tensor::new(&sa, data)?;
        let needs = self.needs(a) || self.needs(b);
        self.push("elementwise", value, Op::Binary { a, b, kind, broadcast }, needs)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, BinaryKind::Add)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, BinaryKind::Mul)
    }

    /// Channel-axis concatenation, order preserved.
    pub fn concat(&mut self, inputs: &[Var]) -> Result<Var> {
        let first = *inputs.first().ok_or_else(|| Error::dim("concat of no tensors"))?;
        let [n, _, h, w] = self.value(first).dims4()?;
        let mut channels = 0;
        for &v in inputs {
            let [vn, vc, vh, vw] = self.value(v).dims4()?;
            if (vn, vh, vw) != (n, h, w) {
                return Err(Error::dim(format!(
                    "concat: extents {:?} do not match {:?}",
                    [vn, vh, vw],
                    [n, h, w]
                )));
            }
            channels += vc;
        }
        let plane = h * w;
        let mut data = Vec::with_capacity(n * channels * plane);
        for b in 0..n {
            for &v in inputs {
                let t = self.value(v);
                let vc = t.shape()[1];
                data.extend_from_slice(&t.data()[b * vc * plane..(b + 1) * vc * plane]);
            }
        }
        let value = Tensor::new(&[n, channels, h, w], data)?;
        let needs = inputs.iter().any(|&v| self.needs(v));
        self.push(
            "concat",
            value,
            Op::Concat {
                inputs: inputs.to_vec(),
            },
            needs,
        )
    }

    /// Channels `start..start + len` of a 4-d tensor.
    pub fn slice_channels(&mut self, input: Var, start: usize, len: usize) -> Result<Var> {
        let [n, c, h, w] = self.value(input).dims4()?;
        if len == 0 || start + len > c {
            return Err(Error::dim(format!("slice_channels {start}..{} of {c}", start + len)));
        }
        let plane = h * w;
        let src = self.value(input).data();
        let mut data = Vec::with_capacity(n * len * plane);
        for b in 0..n {
            let off = (b * c + start) * plane;
            data.extend_from_slice(&src[off..off + len * plane]);
        }
        let value = Tensor::new(&[n, len, h, w], data)?;
        let needs = self.needs(input);
        self.push("slice_channels", value, Op::SliceChannels { input, start }, needs)
    }

    /// Splits the channel axis into consecutive groups of the given sizes.
    pub fn split_channels(&mut self, input: Var, sizes: &[usize]) -> Result<Vec<Var>> {
        let mut start = 0;
        let mut out = Vec::with_capacity(sizes.len());
        for &len in sizes {
            out.push(self.slice_channels(input, start, len)?);
            start += len;
        }
        if start != self.value(input).dims4()?[1] {
            return Err(Error::dim("split_channels: sizes do not cover the channel axis"));
        }
        Ok(out)
    }

    pub fn activation(&mut self, input: Var, kind: Activation) -> Result<Var> {
        let value = match kind {
            Activation::Relu => self.value(input).map(|v| v.max(0.0)),
            Activation::Sigmoid => self.value(input).map(sigmoid),
        };
        let needs = self.needs(input);
        self.push("activation", value, Op::Activation { input, kind }, needs)
    }

    pub fn relu(&mut self, input: Var) -> Result<Var> {
        self.activation(input, Activation::Relu)
    }

    pub fn sigmoid(&mut self, input: Var) -> Result<Var> {
        self.activation(input, Activation::Sigmoid)
    }

    pub fn resample(&mut self, input: Var, kind: Resample) -> Result<Var> {
        match kind {
            Resample::MaxPool2 => self.maxpool2(input),
            Resample::NearestUpsample2 => self.upsample2(input),
        }
    }

    pub fn maxpool2(&mut self, input: Var) -> Result<Var> {
        let [n, c, h, w] = self.value(input).dims4()?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::dim(format!("maxpool2 needs even extents, got {h}x{w}")));
        }
        let (oh, ow) = (h / 2, w / 2);
        let src = self.value(input).data();
        let mut data = Vec::with_capacity(n * c * oh * ow);
        let mut argmax = Vec::with_capacity(n * c * oh * ow);
        for p in 0..n * c {
            let base = p * h * w;
            for y in 0..oh {
                for x in 0..ow {
                    let mut best = base + 2 * y * w + 2 * x;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base + (2 * y + dy) * w + 2 * x + dx;
                        if src[idx] > src[best] {
                            best = idx;
                        }
                    }
                    data.push(src[best]);
                    argmax.push(best);
                }
            }
        }
        let value = Tensor::new(&[n, c, oh, ow], data)?;
        let needs = self.needs(input);
        self.push("maxpool2", value, Op::MaxPool2 { input, argmax }, needs)
    }

    pub fn upsample2(&mut self, input: Var) -> Result<Var> {
        let [n, c, h, w] = self.value(input).dims4()?;
        let (oh, ow) = (2 * h, 2 * w);
        let src = self.value(input).data();
        let mut data = vec![0.0; n * c * oh * ow];
        for p in 0..n * c {
            for y in 0..oh {
                for x in 0..ow {
                    data[(p * oh + y) * ow + x] = src[(p * h + y / 2) * w + x / 2];
                }
            }
        }
        let value = Tensor::new(&[n, c, oh, ow], data)?;
        let needs = self.needs(input);
        self.push("upsample2", value, Op::Upsample2 { input }, needs)
    }

    /// `[N, C, H, W] -> [N, C, 1, 1]` spatial mean.
    pub fn global_avg_pool(&mut self, input: Var) -> Result<Var> {
        let [n, c, h, w] = self.value(input).dims4()?;
        let plane = (h * w) as f64;
        let data = self
            .value(input)
            .data()
            .chunks(h * w)
            .map(|ch| ch.iter().sum::<f64>() / plane)
            .collect();
        let value = Tensor::new(&[n, c, 1, 1], data)?;
        let needs = self.needs(input);
        self.push("global_avg_pool", value, Op::GlobalAvgPool { input }, needs)
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(input).clone().reshape(shape)?;
        let needs = self.needs(input);
        self.push("reshape", value, Op::Reshape { input }, needs)
    }

    pub fn scale(&mut self, input: Var, factor: f64) -> Result<Var> {
        let value = self.value(input).map(|v| v * factor);
        let needs = self.needs(input);
        self.push("scale", value, Op::Scale { input, factor }, needs)
    }

    pub fn sum(&mut self, input: Var) -> Result<Var> {
        let value = Tensor::scalar(self.value(input).sum());
        let needs = self.needs(input);
        self.push("sum", value, Op::Sum { input }, needs)
    }

    pub fn mean(&mut self, input: Var) -> Result<Var> {
        let t = self.value(input);
        let value = Tensor::scalar(t.sum() / t.len() as f64);
        let needs = self.needs(input);
        self.push("mean", value, Op::Mean { input }, needs)
    }

    /// Mean of squared differences against a constant target of equal shape.
    pub fn mse(&mut self, input: Var, target: &Tensor) -> Result<Var> {
        let t = self.value(input);
        if t.shape() != target.shape() {
            return Err(Error::dim(format!(
                "mse: prediction {:?} vs target {:?}",
                t.shape(),
                target.shape()
            )));
        }
        let sq: f64 = t.data().iter().zip(target.data()).map(|(a, b)| (a - b) * (a - b)).sum();
        let value = Tensor::scalar(sq / t.len() as f64);
        let needs = self.needs(input);
        self.push(
            "mse",
            value,
            Op::MeanSquaredError {
                input,
                target: target.clone(),
            },
            needs,
        )
    }

    /// Elementwise `log(p)` (or `log(1 - p)` when `complement`), with `p`
    /// clamped to `[LOG_EPS, 1 - LOG_EPS]` first.
    pub fn log_clamped(&mut self, input: Var, complement: bool) -> Result<Var> {
        let value = self.value(input).map(|v| {
            let p = clamp_prob(v);
            if complement {
                (1.0 - p).ln()
            } else {
                p.ln()
            }
        });
        let needs = self.needs(input);
        self.push("log_clamped", value, Op::LogClamped { input, complement }, needs)
    }

    /// Elementwise `log(1 - |p - d|)` for binary labels `d`, evaluated as
    /// `log p` when `d = 1` and `log(1 - p)` when `d = 0`; `p` is clamped as
    /// in [`Graph::log_clamped`].
    pub fn effectiveness_log(&mut self, input: Var, labels: &[bool]) -> Result<Var> {
        let t = self.value(input);
        if t.len() != labels.len() {
            return Err(Error::dim(format!(
                "effectiveness_log: {} scores, {} labels",
                t.len(),
                labels.len()
            )));
        }
        let data = t
            .data()
            .iter()
            .zip(labels)
            .map(|(&v, &d)| {
                let p = clamp_prob(v);
                if d {
                    p.ln()
                } else {
                    (1.0 - p).ln()
                }
            })
            .collect();
        let value = Tensor::new(t.shape(), data)?;
        let needs = self.needs(input);
        self.push(
            "effectiveness_log",
            value,
            Op::EffectivenessLog {
                input,
                labels: labels.to_vec(),
            },
            needs,
        )
    }

    /// Reverse sweep from a single-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let count = loss.0 + 1;
        let mut grads: Vec<Option<Vec<f64>>> = (0..count).map(|_| None).collect();
        let mut leaf_grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..count).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            self.propagate(i, g, &mut grads, &mut leaf_grads)?;
        }
        for g in leaf_grads.iter().flatten() {
            check_finite("backward", g.data())?;
        }
        Ok(Gradients { grads: leaf_grads })
    }

    fn propagate(
        &self,
        i: usize,
        g: Vec<f64>,
        grads: &mut [Option<Vec<f64>>],
        leaf_grads: &mut [Option<Tensor>],
    ) -> Result<()> {
        let node = &self.nodes[i];
        // Gradient buffer of `v`, zero-initialised on first touch; None if `v` is inert.
        macro_rules! slot {
            ($v:expr) => {{
                let v: Var = $v;
                if self.nodes[v.0].needs_grad {
                    let len = self.nodes[v.0].value.len();
                    Some(grads[v.0].get_or_insert_with(|| vec![0.0; len]))
                } else {
                    None
                }
            }};
        }
        match &node.op {
            Op::Leaf => {
                leaf_grads[i] = Some(Tensor::new(node.value.shape(), g)?);
            }
            Op::Conv2d {
                input,
                kernel,
                bias,
                geom,
            } => {
                let x = self.value(*input).data();
                let k = self.value(*kernel).data();
                // Take the three buffers out so they can be borrowed simultaneously.
                let mut gi = slot!(*input).map(std::mem::take);
                let mut gk = slot!(*kernel).map(std::mem::take);
                let mut gb = bias.and_then(|b| slot!(b).map(std::mem::take));
                conv::backward(
                    x,
                    k,
                    &g,
                    geom,
                    ConvGrads {
                        input: gi.as_deref_mut(),
                        kernel: gk.as_deref_mut(),
                        bias: gb.as_deref_mut(),
                    },
                );
                if let Some(buf) = gi {
                    grads[input.0] = Some(buf);
                }
                if let Some(buf) = gk {
                    grads[kernel.0] = Some(buf);
                }
                if let (Some(b), Some(buf)) = (bias, gb) {
                    grads[b.0] = Some(buf);
                }
            }
            Op::Binary { a, b, kind, broadcast } => {
                let va = self.value(*a).data();
                let vb = self.value(*b).data();
                let shape = node.value.shape();
                let (c, plane) = if *broadcast { (shape[1], shape[2] * shape[3]) } else { (1, 0) };
                // Index into b for output element j.
                let bidx = |j: usize| -> usize {
                    if *broadcast {
                        let n = j / (c * plane);
                        n * plane + j % plane
                    } else {
                        j
                    }
                };
                if let Some(ga) = slot!(*a) {
                    match kind {
                        BinaryKind::Add => ga.iter_mut().zip(&g).for_each(|(d, s)| *d += s),
                        BinaryKind::Mul => {
                            for (j, d) in ga.iter_mut().enumerate() {
                                *d += g[j] * vb[bidx(j)];
                            }
                        }
                    }
                }
                if let Some(gb) = slot!(*b) {
                    for j in 0..g.len() {
                        let contrib = match kind {
                            BinaryKind::Add => g[j],
                            BinaryKind::Mul => g[j] * va[j],
                        };
                        gb[bidx(j)] += contrib;
                    }
                }
            }
            Op::Concat { inputs } => {
                let [n, channels, h, w] = node.value.dims4()?;
                let plane = h * w;
                let mut offset = 0;
                for &v in inputs {
                    let vc = self.value(v).shape()[1];
                    if let Some(gv) = slot!(v) {
                        for b in 0..n {
                            let src = &g[(b * channels + offset) * plane..(b * channels + offset + vc) * plane];
                            gv[b * vc * plane..(b + 1) * vc * plane]
                                .iter_mut()
                                .zip(src)
                                .for_each(|(d, s)| *d += s);
                        }
                    }
                    offset += vc;
                }
            }
            Op::SliceChannels { input, start } => {
                let [n, len, h, w] = node.value.dims4()?;
                let c = self.value(*input).shape()[1];
                let plane = h * w;
                if let Some(gi) = slot!(*input) {
                    for b in 0..n {
                        let dst = &mut gi[(b * c + start) * plane..(b * c + start + len) * plane];
                        let src = &g[b * len * plane..(b + 1) * len * plane];
                        dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
                    }
                }
            }
            Op::Activation { input, kind } => {
                let x = self.value(*input).data();
                let y = node.value.data();
                if let Some(gi) = slot!(*input) {
                    for j in 0..g.len() {
                        gi[j] += match kind {
                            Activation::Relu => {
                                if x[j] > 0.0 {
                                    g[j]
                                } else {
                                    0.0
                                }
                            }
                            Activation::Sigmoid => g[j] * y[j] * (1.0 - y[j]),
                        };
                    }
                }
            }
            Op::MaxPool2 { input, argmax } => {
                if let Some(gi) = slot!(*input) {
                    for (j, &src) in argmax.iter().enumerate() {
                        gi[src] += g[j];
                    }
                }
            }
            Op::Upsample2 { input } => {
                let [n, c, oh, ow] = node.value.dims4()?;
                let (h, w) = (oh / 2, ow / 2);
                if let Some(gi) = slot!(*input) {
                    for p in 0..n * c {
                        for y in 0..oh {
                            for x in 0..ow {
                                gi[(p * h + y / 2) * w + x / 2] += g[(p * oh + y) * ow + x];
                            }
                        }
                    }
                }
            }
            Op::GlobalAvgPool { input } => {
                let [_, _, h, w] = self.value(*input).dims4()?;
                let plane = h * w;
                if let Some(gi) = slot!(*input) {
                    for (p, chunk) in gi.chunks_mut(plane).enumerate() {
                        let share = g[p] / plane as f64;
                        chunk.iter_mut().for_each(|d| *d += share);
                    }
                }
            }
            Op::Reshape { input } => {
                if let Some(gi) = slot!(*input) {
                    gi.iter_mut().zip(&g).for_each(|(d, s)| *d += s);
                }
            }
            Op::Scale { input, factor } => {
                if let Some(gi) = slot!(*input) {
                    gi.iter_mut().zip(&g).for_each(|(d, s)| *d += s * factor);
                }
            }
            Op::Sum { input } => {
                if let Some(gi) = slot!(*input) {
                    gi.iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::Mean { input } => {
                if let Some(gi) = slot!(*input) {
                    let share = g[0] / gi.len() as f64;
                    gi.iter_mut().for_each(|d| *d += share);
                }
            }
            Op::MeanSquaredError { input, target } => {
                let x = self.value(*input).data();
                if let Some(gi) = slot!(*input) {
                    let k = 2.0 * g[0] / x.len() as f64;
                    for (j, d) in gi.iter_mut().enumerate() {
                        *d += k * (x[j] - target.data()[j]);
                    }
                }
            }
            Op::LogClamped { input, complement } => {
                let x = self.value(*input).data();
                if let Some(gi) = slot!(*input) {
                    for j in 0..g.len() {
                        if x[j] > LOG_EPS && x[j] < 1.0 - LOG_EPS {
                            gi[j] += if *complement { -g[j] / (1.0 - x[j]) } else { g[j] / x[j] };
                        }
                    }
                }
            }
            Op::EffectivenessLog { input, labels } => {
                let x = self.value(*input).data();
                if let Some(gi) = slot!(*input) {
                    for j in 0..g.len() {
                        if x[j] > LOG_EPS && x[j] < 1.0 - LOG_EPS {
                            gi[j] += if labels[j] { g[j] / x[j] } else { -g[j] / (1.0 - x[j]) };
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
