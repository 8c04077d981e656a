//! Alternating training of estimator, discriminator and regressor.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    fake_label, loss_adversarial, loss_discriminator_fake, loss_discriminator_real, loss_heatmap, loss_regression,
    Batch, Dataset, HeatmapSource, TrainConfig,
};
use crate::eval::{heatmap_error, nme, NormalizationKind};
use crate::geometry::{BoundaryScheme, LandmarkSet};
use crate::models::{Checkpoint, Discriminator, Estimator, Regressor};
use crate::tensor::{Adam, Graph, Var};
use crate::{Error, Result, Tensor};

const EVAL_BATCH: usize = 16;

/// The networks of one trained configuration.
#[derive(Debug, Clone)]
pub struct Pipeline {
    config: TrainConfig,
    scheme: BoundaryScheme,
    estimator: Option<Estimator>,
    regressor: Regressor,
    discriminator: Option<Discriminator>,
    estimator_frozen: bool,
}

impl Pipeline {
    /// Fresh networks; every network gets its own stream of the seed.
    pub fn new(config: TrainConfig) -> Result<Self> {
        let config = config.resolve()?;
        let scheme = config.load_scheme()?;
        let base = config.seed.wrapping_mul(4);
        let estimator = match config.trains_estimator() {
            true => Some(Estimator::new(config.estimator.clone(), base + 1)?),
            false => None,
        };
        let discriminator = match config.adversarial {
            true => Some(Discriminator::new(config.discriminator.clone(), base + 3)?),
            false => None,
        };
        Ok(Self {
            regressor: Regressor::new(config.regressor.clone(), base + 2)?,
            config,
            scheme,
            estimator,
            discriminator,
            estimator_frozen: false,
        })
    }

    /// A pipeline whose heatmaps come from an already trained estimator that
    /// is never updated. Adversarial training is switched off.
    pub fn with_frozen_estimator(mut config: TrainConfig, estimator: Estimator) -> Result<Self> {
        config.heatmap_source = HeatmapSource::Estimated;
        config.adversarial = false;
        config.estimator = estimator.config().clone();
        let mut p = Self::new(config)?;
        if estimator.config().num_boundaries != p.scheme.num_boundaries() {
            return Err(Error::config("estimator boundary count does not match the scheme"));
        }
        p.estimator = Some(estimator);
        p.estimator_frozen = true;
        Ok(p)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn scheme(&self) -> &BoundaryScheme {
        &self.scheme
    }

    pub fn estimator(&self) -> Option<&Estimator> {
        self.estimator.as_ref()
    }

    pub fn regressor(&self) -> &Regressor {
        &self.regressor
    }

    pub fn discriminator(&self) -> Option<&Discriminator> {
        self.discriminator.as_ref()
    }

    pub fn estimator_frozen(&self) -> bool {
        self.estimator_frozen
    }

    /// Heatmaps fed to the regressor at evaluation time.
    pub fn regressor_heatmaps(&self, batch: &Batch) -> Result<Option<Tensor>> {
        if !self.regressor.config().uses_heatmaps() {
            return Ok(None);
        }
        Ok(Some(match self.config.heatmap_source {
            HeatmapSource::Estimated => self.estimator_ref()?.predict(&batch.images)?,
            HeatmapSource::Oracle => batch.heatmaps.clone(),
            HeatmapSource::Zero => Tensor::zeros(batch.heatmaps.shape()),
            HeatmapSource::None => return Err(Error::config("regressor fuses heatmaps but the source is `none`")),
        }))
    }

    fn estimator_ref(&self) -> Result<&Estimator> {
        self.estimator.as_ref().ok_or_else(|| Error::Usage("pipeline has no estimator".into()))
    }

    /// `[B, 2L]` normalised predictions.
    pub fn predict_batch(&self, batch: &Batch) -> Result<Tensor> {
        let maps = self.regressor_heatmaps(batch)?;
        self.regressor.predict(&batch.images, maps.as_ref())
    }

    /// Predicted landmarks for every sample, in crop pixels.
    pub fn predict(&self, data: &Dataset) -> Result<Vec<LandmarkSet>> {
        let side = data.input_side as f64;
        let mut out = Vec::with_capacity(data.len());
        for idx in data.sequential_batches(EVAL_BATCH) {
            let batch = data.batch(&idx)?;
            let pred = self.predict_batch(&batch)?;
            let width = 2 * data.scheme.landmark_count;
            for (row, &i) in pred.data().chunks(width).zip(&idx) {
                out.push(LandmarkSet::from_normalized(row, side, &data.samples[i].landmarks));
            }
        }
        Ok(out)
    }

    /// Per-sample NME.
    pub fn errors(&self, data: &Dataset, kind: NormalizationKind) -> Result<Vec<f64>> {
        self.predict(data)?
            .iter()
            .zip(&data.samples)
            .map(|(p, s)| nme(p, &s.landmarks, &data.scheme, kind))
            .collect()
    }

    pub fn mean_nme(&self, data: &Dataset, kind: NormalizationKind) -> Result<f64> {
        let e = self.errors(data, kind)?;
        if e.is_empty() {
            return Err(Error::Data("mean NME of an empty dataset".into()));
        }
        Ok(e.iter().sum::<f64>() / e.len() as f64)
    }

    /// Mean absolute difference between estimated and ground-truth heatmaps,
    /// or `None` without an estimator.
    pub fn heatmap_error(&self, data: &Dataset) -> Result<Option<f64>> {
        let Some(est) = &self.estimator else { return Ok(None) };
        let (mut total, mut n) = (0.0, 0usize);
        for idx in data.sequential_batches(EVAL_BATCH) {
            let batch = data.batch(&idx)?;
            let pred = est.predict(&batch.images)?;
            total += heatmap_error(&pred, &batch.heatmaps)? * idx.len() as f64;
            n += idx.len();
        }
        Ok((n > 0).then(|| total / n as f64))
    }

    pub fn to_checkpoint(&self, step: u64) -> Result<Checkpoint> {
        let mut ck = Checkpoint::new(step, serde_json::to_value(&self.config)?);
        ck.insert("regressor", self.regressor.store());
        if let Some(e) = &self.estimator {
            ck.insert("estimator", e.store());
        }
        if let Some(d) = &self.discriminator {
            ck.insert("discriminator", d.store());
        }
        Ok(ck)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let config: TrainConfig =
            serde_json::from_value(ck.config.clone()).map_err(|e| Error::config(format!("checkpoint config: {e}")))?;
        let mut p = Self::new(config)?;
        if !ck.has("estimator") && p.config.heatmap_source == HeatmapSource::Estimated {
            return Err(Error::config("checkpoint lacks the estimator its config requires"));
        }
        ck.restore("regressor", p.regressor.store_mut())?;
        if let Some(e) = &mut p.estimator {
            ck.restore("estimator", e.store_mut())?;
        }
        if let Some(d) = &mut p.discriminator {
            if ck.has("discriminator") {
                ck.restore("discriminator", d.store_mut())?;
            }
        }
        Ok(p)
    }
}

/// Losses of one alternating update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub loss_g: Option<f64>,
    pub loss_d: Option<f64>,
    pub loss_r: f64,
    /// Fraction of generated boundaries labelled effective.
    pub effective: Option<f64>,
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub step: u64,
    #[serde(rename = "loss_G")]
    pub loss_g: Option<f64>,
    #[serde(rename = "loss_D")]
    pub loss_d: Option<f64>,
    #[serde(rename = "loss_R")]
    pub loss_r: f64,
    pub val_nme: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_val_nme: f64,
    pub best_val_nme: f64,
    /// 0 when no epoch improved on the initial networks.
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub steps: u64,
    pub stopped_early: bool,
    pub history: Vec<EpochRecord>,
}

pub struct Trainer {
    pipeline: Pipeline,
    adam_g: Option<Adam>,
    adam_r: Adam,
    adam_d: Option<Adam>,
    rng: ChaCha8Rng,
    step: u64,
}

fn finite(v: f64, what: &str, step: u64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical(format!("{what} is {v} at step {step}")))
    }
}

fn numerical(step: u64) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite(m) => Error::Numerical(format!("step {step}: {m}")),
        other => other,
    }
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        Ok(Self::from_pipeline(Pipeline::new(config)?))
    }

    pub fn from_pipeline(pipeline: Pipeline) -> Self {
        let opt = pipeline.config.optimizer;
        let adam_g = match pipeline.estimator_frozen {
            true => None,
            false => pipeline.estimator.as_ref().map(|e| Adam::new(e.store(), opt)),
        };
        Self {
            adam_g,
            adam_r: Adam::new(pipeline.regressor.store(), opt),
            adam_d: pipeline.discriminator.as_ref().map(|d| Adam::new(d.store(), opt)),
            rng: ChaCha8Rng::seed_from_u64(pipeline.config.seed ^ 0x5348_5546),
            step: 0,
            pipeline,
        }
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn into_pipeline(self) -> Pipeline {
        self.pipeline
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Estimator update; returns its loss and the detached final-stack heatmaps.
    fn estimator_step(&mut self, batch: &Batch) -> Result<(f64, Tensor)> {
        let cfg = &self.pipeline.config;
        let est = self.pipeline.estimator.as_mut().expect("trained estimator");
        let mut g = Graph::new();
        let pe = est.store().bind(&mut g, true)?;
        let x = g.constant(batch.images.clone())?;
        let out = est.forward(&mut g, &pe, x)?;
        let mut loss = loss_heatmap(&mut g, &out.heatmaps, &batch.heatmaps)?;
        if let Some(d) = &self.pipeline.discriminator {
            let pd = d.store().bind(&mut g, false)?;
            let scores = d.forward(&mut g, &pd, out.last())?;
            let adv = loss_adversarial(&mut g, scores)?;
            let weighted = g.scale(adv, cfg.lambda_adv)?;
            loss = g.add(loss, weighted)?;
        }
        let value = finite(g.value(loss).item()?, "estimator loss", self.step)?;
        let grads = g.backward(loss)?;
        est.store_mut().accumulate(&pe, &grads);
        self.adam_g.as_mut().expect("estimator optimiser").step(est.store_mut());
        Ok((value, g.value(out.last()).clone()))
    }

    fn discriminator_step(&mut self, maps: &Tensor, labels: Option<&[bool]>) -> Result<f64> {
        let d = self.pipeline.discriminator.as_mut().expect("discriminator");
        let mut g = Graph::new();
        let pd = d.store().bind(&mut g, true)?;
        let m = g.constant(maps.clone())?;
        let scores = d.forward(&mut g, &pd, m)?;
        let loss = match labels {
            None => loss_discriminator_real(&mut g, scores)?,
            Some(l) => loss_discriminator_fake(&mut g, scores, l)?,
        };
        let value = finite(g.value(loss).item()?, "discriminator loss", self.step)?;
        let grads = g.backward(loss)?;
        d.store_mut().accumulate(&pd, &grads);
        self.adam_d.as_mut().expect("discriminator optimiser").step(d.store_mut());
        Ok(value)
    }

    fn labels(&self, data: &Dataset, batch: &Batch, pred: &Tensor) -> Result<Vec<bool>> {
        let cfg = &self.pipeline.config;
        let width = 2 * data.scheme.landmark_count;
        let global = cfg.discriminator.global_score;
        let mut labels = Vec::new();
        for (row, &i) in pred.data().chunks(width).zip(&batch.indices) {
            let per = fake_label(row, &data.samples[i].distances, &data.scheme, data.input_side, cfg.label_rule())?;
            if global {
                labels.push(per.iter().all(|&b| b));
            } else {
                labels.extend(per);
            }
        }
        Ok(labels)
    }

    /// One alternating update over the given samples.
    pub fn train_step(&mut self, data: &Dataset, indices: &[usize]) -> Result<StepLosses> {
        if indices.is_empty() {
            return Err(Error::Data("empty batch".into()));
        }
        let batch = data.batch(indices)?;
        let step = self.step;
        let mut out = StepLosses {
            loss_g: None,
            loss_d: None,
            loss_r: 0.0,
            effective: None,
        };
        let mut generated = None;
        if self.adam_g.is_some() {
            let (l, maps) = self.estimator_step(&batch).map_err(numerical(step))?;
            out.loss_g = Some(l);
            generated = Some(maps);
        }
        if generated.is_some() && self.adam_d.is_some() {
            out.loss_d = Some(self.discriminator_step(&batch.heatmaps, None).map_err(numerical(step))?);
        }

        let reg_maps = if !self.pipeline.regressor.config().uses_heatmaps() {
            None
        } else if let Some(m) = &generated {
            let cfg = &self.pipeline.config;
            let mix = cfg.gt_mix > 0.0 && self.rng.random::<f64>() < cfg.gt_mix;
            Some(if mix { batch.heatmaps.clone() } else { m.clone() })
        } else {
            self.pipeline.regressor_heatmaps(&batch)?
        };

        let reg = &self.pipeline.regressor;
        let mut g = Graph::new();
        let pr = reg.store().bind(&mut g, true)?;
        let x = g.constant(batch.images.clone())?;
        let m: Option<Var> = reg_maps.map(|t| g.constant(t)).transpose()?;
        let pred = reg.forward(&mut g, &pr, x, m).map_err(numerical(step))?;
        let loss = loss_regression(&mut g, pred, &batch.targets)?;
        out.loss_r = finite(g.value(loss).item()?, "regressor loss", step)?;

        if let (Some(maps), true) = (&generated, self.adam_d.is_some()) {
            let labels = self.labels(data, &batch, g.value(pred))?;
            out.effective = Some(labels.iter().filter(|&&b| b).count() as f64 / labels.len() as f64);
            let fake = self.discriminator_step(maps, Some(&labels)).map_err(numerical(step))?;
            *out.loss_d.as_mut().expect("real half") += fake;
        }

        let grads = g.backward(loss).map_err(numerical(step))?;
        let reg = &mut self.pipeline.regressor;
        reg.store_mut().accumulate(&pr, &grads);
        self.adam_r.step(reg.store_mut());
        self.step += 1;
        Ok(out)
    }

    /// One shuffled pass; returns the mean losses.
    pub fn run_epoch(&mut self, data: &Dataset) -> Result<StepLosses> {
        if data.is_empty() {
            return Err(Error::Data("training set is empty".into()));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        let size = self.pipeline.config.batch_size;
        let mut sums = [0.0; 3];
        let mut n = 0.0;
        let mut last = None;
        for chunk in order.chunks(size) {
            let l = self.train_step(data, chunk)?;
            sums[0] += l.loss_g.unwrap_or(0.0);
            sums[1] += l.loss_d.unwrap_or(0.0);
            sums[2] += l.loss_r;
            n += 1.0;
            last = Some(l);
        }
        let last = last.expect("at least one batch");
        Ok(StepLosses {
            loss_g: last.loss_g.map(|_| sums[0] / n),
            loss_d: last.loss_d.map(|_| sums[1] / n),
            loss_r: sums[2] / n,
            effective: last.effective,
        })
    }

    /// Trains until validation NME stops improving for `patience` epochs or
    /// `max_epochs` is reached, then restores the best networks.
    pub fn fit(&mut self, train: &Dataset, val: &Dataset, mut on_epoch: impl FnMut(&EpochRecord)) -> Result<TrainReport> {
        if train.is_empty() || val.is_empty() {
            return Err(Error::Data("training and validation sets must be non-empty".into()));
        }
        let kind = NormalizationKind::InterOcular;
        let initial = self.pipeline.mean_nme(val, kind)?;
        let (mut best, mut best_epoch) = (initial, 0);
        let mut best_pipeline = self.pipeline.clone();
        let mut history = Vec::new();
        let mut stale = 0;
        let cfg = self.pipeline.config.clone();
        for epoch in 1..=cfg.max_epochs {
            let losses = self.run_epoch(train)?;
            let val_nme = finite(self.pipeline.mean_nme(val, kind)?, "validation NME", self.step)?;
            let rec = EpochRecord {
                epoch,
                step: self.step,
                loss_g: losses.loss_g,
                loss_d: losses.loss_d,
                loss_r: losses.loss_r,
                val_nme,
            };
            on_epoch(&rec);
            history.push(rec);
            if val_nme < best {
                best = val_nme;
                best_epoch = epoch;
                best_pipeline = self.pipeline.clone();
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    log::debug!("early stop at epoch {epoch}, best {best:.5} at epoch {best_epoch}");
                    break;
                }
            }
        }
        self.pipeline = best_pipeline;
        Ok(TrainReport {
            initial_val_nme: initial,
            best_val_nme: best,
            best_epoch,
            epochs_run: history.len(),
            steps: self.step,
            stopped_early: history.len() < cfg.max_epochs,
            history,
        })
    }
}

/// Builds a pipeline from `config` and fits it.
pub fn train(config: TrainConfig, train: &Dataset, val: &Dataset, on_epoch: impl FnMut(&EpochRecord)) -> Result<(Pipeline, TrainReport)> {
    let mut t = Trainer::new(config)?;
    let report = t.fit(train, val, on_epoch)?;
    Ok((t.into_pipeline(), report))
}
