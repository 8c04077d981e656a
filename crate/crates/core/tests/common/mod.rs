//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use boundary_core::geometry::{interpolate_boundary, rasterize, BinaryMap, BoundaryScheme, LandmarkSet, DEFAULT_DENSITY};
use boundary_core::tensor::{Graph, ParamStore, Var};
use boundary_core::{Result, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Nearest set pixel by exhaustive scan.
pub fn brute_distance(map: &BinaryMap) -> Vec<f64> {
    let set: Vec<(usize, usize)> = map.set_pixels().collect();
    let mut out = Vec::with_capacity(map.height() * map.width());
    for y in 0..map.height() {
        for x in 0..map.width() {
            let best = set
                .iter()
                .map(|&(u, v)| {
                    let (dx, dy) = (u as f64 - x as f64, v as f64 - y as f64);
                    dx * dx + dy * dy
                })
                .fold(f64::INFINITY, f64::min);
            out.push(best.sqrt());
        }
    }
    out
}

/// Truncated Gaussian written out directly.
pub fn gaussian_cutoff(d: f64, sigma: f64) -> f64 {
    if d < 3.0 * sigma {
        (-(d * d) / (2.0 * sigma * sigma)).exp()
    } else {
        0.0
    }
}

/// Heatmaps by spline samples, rasterisation, exhaustive distance and the
/// truncated Gaussian.
pub fn brute_heatmaps(lm: &LandmarkSet, scheme: &BoundaryScheme, input_side: usize, sigma: f64) -> Vec<Vec<f64>> {
    let side = input_side / 4;
    let quarter = lm.scaled(0.25);
    scheme
        .boundaries
        .iter()
        .map(|b| {
            let line = interpolate_boundary(&quarter, b, DEFAULT_DENSITY).unwrap();
            let map = rasterize(&line, side, side).unwrap();
            brute_distance(&map).into_iter().map(|d| gaussian_cutoff(d, sigma)).collect()
        })
        .collect()
}

/// Direct nested-loop convolution with zero padding.
pub fn conv_direct(input: &Tensor, kernel: &Tensor, bias: Option<&Tensor>, stride: usize, pad: usize) -> Tensor {
    let [n, c, h, w] = input.dims4().unwrap();
    let [o, kc, kh, kw] = kernel.dims4().unwrap();
    assert_eq!(c, kc);
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (w + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0; n * o * oh * ow];
    for b in 0..n {
        for oc in 0..o {
            for y in 0..oh {
                for x in 0..ow {
                    let mut acc = bias.map_or(0.0, |t| t.data()[oc]);
                    for ic in 0..c {
                        for dy in 0..kh {
                            for dx in 0..kw {
                                let iy = (y * stride + dy) as isize - pad as isize;
                                let ix = (x * stride + dx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                acc += input.at4(b, ic, iy as usize, ix as usize) * kernel.at4(oc, ic, dy, dx);
                            }
                        }
                    }
                    out[((b * o + oc) * oh + y) * ow + x] = acc;
                }
            }
        }
    }
    Tensor::new(&[n, o, oh, ow], out).unwrap()
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

/// Values bounded away from zero, for inputs that pass through a ReLU.
pub fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let m = rng.random_range(0.1..1.0);
        if rng.random::<bool>() {
            m
        } else {
            -m
        }
    })
}

pub const FD_STEP: f64 = 1e-5;

/// `|a - n| / max(|a|, |n|, floor)`; the floor keeps exact zeros comparable
/// with finite differences at round-off level.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Worst relative error between backward and central differences over every
/// element of every input.
pub fn check_inputs(inputs: &[Tensor], build: impl Fn(&mut Graph, &[Var]) -> Result<Var>) -> f64 {
    let eval = |vals: &[Tensor]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = vals.iter().map(|t| g.leaf(t.clone(), true).unwrap()).collect();
        let l = build(&mut g, &vars).unwrap();
        g.value(l).item().unwrap()
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone(), true).unwrap()).collect();
    let loss = build(&mut g, &vars).unwrap();
    let grads = g.backward(loss).unwrap();
    let mut worst = 0.0f64;
    for (k, v) in vars.iter().enumerate() {
        let analytic = grads.get(*v).expect("input gradient").clone();
        for j in 0..inputs[k].len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[j] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[j] -= FD_STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
            worst = worst.max(rel_error(analytic.data()[j], numeric));
        }
    }
    worst
}

/// Result of a parameter gradient check.
#[derive(Debug, Default)]
pub struct ParamCheck {
    pub worst: f64,
    pub checked: usize,
    /// Parameters whose perturbation crossed a ReLU or max-pool switch and
    /// were re-checked with a smaller step.
    pub retried: usize,
    pub worst_param: String,
}

/// Gradient check over every scalar of a parameter store. `loss` evaluates
/// the network on the store, binding it to the graph it is given.
pub fn check_params(store: &mut ParamStore, loss: impl Fn(&ParamStore, &mut Graph) -> Result<(Var, boundary_core::tensor::Bound)>) -> ParamCheck {
    let value = |s: &ParamStore| -> f64 {
        let mut g = Graph::new();
        let (l, _) = loss(s, &mut g).unwrap();
        g.value(l).item().unwrap()
    };
    let mut g = Graph::new();
    let (l, bound) = loss(store, &mut g).unwrap();
    let grads = g.backward(l).unwrap();
    store.zero_grad();
    store.accumulate(&bound, &grads);
    let ids: Vec<_> = store.ids().collect();
    let mut out = ParamCheck::default();
    for id in ids {
        let analytic = store.grad(id).clone();
        for j in 0..analytic.len() {
            let central = |s: &mut ParamStore, h: f64| {
                let orig = s.value(id).data()[j];
                s.value_mut(id).data_mut()[j] = orig + h;
                let up = value(s);
                s.value_mut(id).data_mut()[j] = orig - h;
                let down = value(s);
                s.value_mut(id).data_mut()[j] = orig;
                (up - down) / (2.0 * h)
            };
            let a = analytic.data()[j];
            let mut err = rel_error(a, central(store, FD_STEP));
            if err > 1e-4 {
                out.retried += 1;
                err = rel_error(a, central(store, FD_STEP / 100.0));
            }
            if err > out.worst {
                out.worst = err;
                out.worst_param = format!("{}[{j}] analytic {a:e}", store.name(id));
            }
            out.checked += 1;
        }
    }
    store.zero_grad();
    out
}

/// `sum(out * w)` for a fixed random weighting `w`, so every output element
/// carries a distinct gradient.
pub fn weighted_sum(g: &mut Graph, out: Var, seed: u64) -> Result<Var> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = g.shape(out).to_vec();
    let w = g.constant(random_tensor(&mut rng, &shape, -1.0, 1.0))?;
    let p = g.mul(out, w)?;
    g.sum(p)
}

/// Worst relative gradient error of every graph operation.
pub fn op_checks() -> Vec<(&'static str, f64)> {
    use boundary_core::tensor::Resample;
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut out = Vec::new();
    let x = random_tensor(&mut rng, &[2, 3, 4, 4], -1.0, 1.0);
    let y = random_tensor(&mut rng, &[2, 3, 4, 4], -1.0, 1.0);
    let single = random_tensor(&mut rng, &[2, 1, 4, 4], -1.0, 1.0);
    let kernel = random_tensor(&mut rng, &[2, 3, 3, 3], -1.0, 1.0);
    let pointwise = random_tensor(&mut rng, &[4, 3, 1, 1], -1.0, 1.0);
    let bias = random_tensor(&mut rng, &[2], -1.0, 1.0);
    let probs = random_tensor(&mut rng, &[2, 5], 0.05, 0.95);
    let labels: Vec<bool> = (0..10).map(|i| i % 3 == 0).collect();

    out.push(("conv2d", check_inputs(&[x.clone(), kernel.clone(), bias.clone()], |g, v| {
        let c = g.conv2d(v[0], v[1], Some(v[2]), 1, 1)?;
        weighted_sum(g, c, 1)
    })));
    out.push(("conv2d_stride2", check_inputs(&[x.clone(), kernel.clone()], |g, v| {
        let c = g.conv2d(v[0], v[1], None, 2, 1)?;
        weighted_sum(g, c, 2)
    })));
    out.push(("conv2d_1x1", check_inputs(&[x.clone(), pointwise], |g, v| {
        let c = g.conv2d(v[0], v[1], None, 1, 0)?;
        weighted_sum(g, c, 3)
    })));
    out.push(("add", check_inputs(&[x.clone(), y.clone()], |g, v| {
        let c = g.add(v[0], v[1])?;
        weighted_sum(g, c, 4)
    })));
    out.push(("mul", check_inputs(&[x.clone(), y.clone()], |g, v| {
        let c = g.mul(v[0], v[1])?;
        weighted_sum(g, c, 5)
    })));
    out.push(("mul_broadcast", check_inputs(&[x.clone(), single.clone()], |g, v| {
        let c = g.mul(v[0], v[1])?;
        weighted_sum(g, c, 6)
    })));
    out.push(("add_broadcast", check_inputs(&[x.clone(), single], |g, v| {
        let c = g.add(v[0], v[1])?;
        weighted_sum(g, c, 7)
    })));
    out.push(("concat", check_inputs(&[x.clone(), y.clone()], |g, v| {
        let c = g.concat(&[v[0], v[1]])?;
        weighted_sum(g, c, 8)
    })));
    out.push(("slice_channels", check_inputs(&[x.clone()], |g, v| {
        let c = g.slice_channels(v[0], 1, 2)?;
        weighted_sum(g, c, 9)
    })));
    out.push(("split_channels", check_inputs(&[x.clone()], |g, v| {
        let parts = g.split_channels(v[0], &[1, 2])?;
        let a = weighted_sum(g, parts[0], 10)?;
        let b = weighted_sum(g, parts[1], 11)?;
        g.add(a, b)
    })));
    out.push(("relu", check_inputs(&[away_from_zero(&mut rng, &[2, 3, 4, 4])], |g, v| {
        let c = g.relu(v[0])?;
        weighted_sum(g, c, 12)
    })));
    out.push(("sigmoid", check_inputs(&[x.clone()], |g, v| {
        let c = g.sigmoid(v[0])?;
        weighted_sum(g, c, 13)
    })));
    // Distinct values, so the pooling argmax is stable under perturbation.
    let ranked = Tensor::from_fn(&[2, 3, 4, 4], |i| ((i * 37) % 96) as f64 * 0.01);
    out.push(("maxpool2", check_inputs(&[ranked], |g, v| {
        let c = g.resample(v[0], Resample::MaxPool2)?;
        weighted_sum(g, c, 14)
    })));
    out.push(("upsample2", check_inputs(&[x.clone()], |g, v| {
        let c = g.resample(v[0], Resample::NearestUpsample2)?;
        weighted_sum(g, c, 15)
    })));
    out.push(("global_avg_pool", check_inputs(&[x.clone()], |g, v| {
        let c = g.global_avg_pool(v[0])?;
        weighted_sum(g, c, 16)
    })));
    out.push(("reshape", check_inputs(&[x.clone()], |g, v| {
        let c = g.reshape(v[0], &[2, 48])?;
        weighted_sum(g, c, 17)
    })));
    out.push(("scale", check_inputs(&[x.clone()], |g, v| {
        let c = g.scale(v[0], -2.5)?;
        weighted_sum(g, c, 18)
    })));
    out.push(("sum", check_inputs(&[x.clone()], |g, v| {
        let s = g.sum(v[0])?;
        g.mul(s, s)
    })));
    out.push(("mean", check_inputs(&[x.clone()], |g, v| {
        let s = g.mean(v[0])?;
        g.mul(s, s)
    })));
    out.push(("mse", check_inputs(&[x], |g, v| g.mse(v[0], &y))));
    out.push(("log", check_inputs(&[probs.clone()], |g, v| {
        let c = g.log_clamped(v[0], false)?;
        weighted_sum(g, c, 19)
    })));
    out.push(("log_complement", check_inputs(&[probs.clone()], |g, v| {
        let c = g.log_clamped(v[0], true)?;
        weighted_sum(g, c, 20)
    })));
    out.push(("effectiveness_log", check_inputs(&[probs], |g, v| {
        let c = g.effectiveness_log(v[0], &labels)?;
        weighted_sum(g, c, 21)
    })));
    out
}

/// Moves every parameter by a small random amount, so zero-initialised
/// biases do not leave pre-activations exactly on a ReLU kink.
pub fn jitter(store: &ParamStore, rng: &mut ChaCha8Rng) -> ParamStore {
    let mut s = store.clone();
    let ids: Vec<_> = s.ids().collect();
    for id in ids {
        for v in s.value_mut(id).data_mut() {
            *v += rng.random_range(-0.05..0.05);
        }
    }
    s
}

/// Parameter gradient checks of small estimator, regressor and discriminator
/// networks at a random parameter point.
pub fn micro_net_checks() -> Vec<(&'static str, ParamCheck)> {
    use boundary_core::models::{
        Discriminator, DiscriminatorConfig, Estimator, EstimatorConfig, Regressor, RegressorConfig,
    };
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let image = random_tensor(&mut rng, &[1, 3, 16, 16], 0.0, 1.0);
    let maps = random_tensor(&mut rng, &[1, 13, 4, 4], 0.0, 1.0);
    let mut out = Vec::new();

    let est = Estimator::new(
        EstimatorConfig {
            input_side: 16,
            stacks: 2,
            base_channels: 2,
            branch_channels: 1,
            hourglass_depth: 1,
            ..Default::default()
        },
        3,
    )
    .unwrap();
    let target = random_tensor(&mut rng, &[1, 13, 4, 4], 0.0, 1.0);
    let mut store = jitter(est.store(), &mut rng);
    out.push(("estimator", check_params(&mut store, |s, g| {
        let p = s.bind(g, true)?;
        let x = g.constant(image.clone())?;
        let o = est.forward(g, &p, x)?;
        let a = g.mse(o.heatmaps[0], &target)?;
        let b = g.mse(o.last(), &target)?;
        Ok((g.add(a, b)?, p))
    })));

    let reg = Regressor::new(
        RegressorConfig {
            input_side: 16,
            landmark_count: 4,
            widths: [2, 2, 2, 2],
            fusion_depth: 1,
            ..Default::default()
        },
        4,
    )
    .unwrap();
    let coords = random_tensor(&mut rng, &[1, 8], 0.0, 1.0);
    let mut store = jitter(reg.store(), &mut rng);
    out.push(("regressor", check_params(&mut store, |s, g| {
        let p = s.bind(g, true)?;
        let x = g.constant(image.clone())?;
        let m = g.constant(maps.clone())?;
        let y = reg.forward(g, &p, x, Some(m))?;
        Ok((g.mse(y, &coords)?, p))
    })));

    let disc = Discriminator::new(
        DiscriminatorConfig {
            heatmap_side: 4,
            channels: 2,
            ..Default::default()
        },
        6,
    )
    .unwrap();
    let labels: Vec<bool> = (0..13).map(|i| i % 2 == 0).collect();
    let mut store = jitter(disc.store(), &mut rng);
    out.push(("discriminator", check_params(&mut store, |s, g| {
        let p = s.bind(g, true)?;
        let m = g.constant(maps.clone())?;
        let d = disc.forward(g, &p, m)?;
        let l = g.effectiveness_log(d, &labels)?;
        Ok((g.mean(l)?, p))
    })));
    out
}

/// Distance maps of every boundary by exhaustive scan.
pub fn brute_distance_maps(lm: &LandmarkSet, scheme: &BoundaryScheme, input_side: usize) -> Vec<Vec<f64>> {
    let side = input_side / 4;
    let quarter = lm.scaled(0.25);
    scheme
        .boundaries
        .iter()
        .map(|b| {
            let line = interpolate_boundary(&quarter, b, DEFAULT_DENSITY).unwrap();
            brute_distance(&rasterize(&line, side, side).unwrap())
        })
        .collect()
}

/// Bilinear read of a row-major square map, clamped to its extent.
pub fn bilinear(map: &[f64], side: usize, x: f64, y: f64) -> f64 {
    let top = (side - 1) as f64;
    let (x, y) = (x.clamp(0.0, top), y.clamp(0.0, top));
    let (x0, y0) = (x.floor(), y.floor());
    let (x1, y1) = ((x0 + 1.0).min(top), (y0 + 1.0).min(top));
    let at = |xx: f64, yy: f64| map[yy as usize * side + xx as usize];
    let (fx, fy) = (x - x0, y - y0);
    (at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx) * (1.0 - fy) + (at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx) * fy
}
