//! Samples with precomputed training targets, and batching.

use rayon::prelude::*;

use crate::data::Sample;
use crate::geometry::{boundary_distance_maps, heatmap_from_distance, BoundaryScheme, DistanceMap, LandmarkSet};
use crate::{Error, Result, Tensor};

/// One sample with its ground-truth heatmaps, distance maps and targets.
#[derive(Debug, Clone)]
pub struct PreparedSample {
    pub source_id: String,
    /// `[1, 3, S, S]`.
    pub image: Tensor,
    /// `[1, K, S/4, S/4]`.
    pub heatmaps: Tensor,
    pub distances: Vec<DistanceMap>,
    /// Interleaved normalised coordinates, length `2L`.
    pub target: Vec<f64>,
    pub landmarks: LandmarkSet,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub scheme: BoundaryScheme,
    pub input_side: usize,
    pub sigma: f64,
    pub samples: Vec<PreparedSample>,
}

/// Stacked tensors for a set of sample indices.
#[derive(Debug, Clone)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub images: Tensor,
    pub heatmaps: Tensor,
    pub targets: Tensor,
}

impl Dataset {
    pub fn prepare(samples: &[Sample], scheme: &BoundaryScheme, sigma: f64) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::Data("empty sample list".into()))?;
        let side = first.side();
        let prepared = samples
            .par_iter()
            .map(|s| {
                if s.image.shape() != [3, side, side] {
                    return Err(Error::Data(format!("{}: image shape {:?}", s.source_id, s.image.shape())));
                }
                let distances = boundary_distance_maps(&s.landmarks, scheme, side).map_err(|e| {
                    Error::Data(format!("{}: {e}", s.source_id))
                })?;
                let q = side / 4;
                let mut maps = Vec::with_capacity(distances.len() * q * q);
                for d in &distances {
                    maps.extend(heatmap_from_distance(d, sigma)?);
                }
                Ok(PreparedSample {
                    source_id: s.source_id.clone(),
                    image: s.image.clone().reshape(&[1, 3, side, side])?,
                    heatmaps: Tensor::new(&[1, distances.len(), q, q], maps)?,
                    distances,
                    target: s.landmarks.to_normalized(side as f64),
                    landmarks: s.landmarks.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scheme: scheme.clone(),
            input_side: side,
            sigma,
            samples: prepared,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn batch(&self, indices: &[usize]) -> Result<Batch> {
        let pick = |f: fn(&PreparedSample) -> &Tensor| -> Result<Tensor> {
            Tensor::stack(&indices.iter().map(|&i| f(&self.samples[i])).collect::<Vec<_>>())
        };
        let targets: Vec<f64> = indices.iter().flat_map(|&i| self.samples[i].target.iter().copied()).collect();
        let width = self.scheme.landmark_count * 2;
        Ok(Batch {
            indices: indices.to_vec(),
            images: pick(|s| &s.image)?,
            heatmaps: pick(|s| &s.heatmaps)?,
            targets: Tensor::new(&[indices.len(), width], targets)?,
        })
    }

    /// Consecutive batches covering every sample once, in order.
    pub fn sequential_batches(&self, size: usize) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.len()).step_by(size.max(1)).map(move |s| (s..(s + size.max(1)).min(self.len())).collect())
    }
}
