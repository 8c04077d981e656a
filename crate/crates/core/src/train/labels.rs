//! Effectiveness labels for generated heatmaps.

use serde::{Deserialize, Serialize};

use crate::geometry::{BoundaryScheme, DistanceMap};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelRule {
    /// Distance threshold in heatmap pixels.
    pub theta: f64,
    /// Required fraction of close landmarks, in `(0, 1]`.
    pub delta: f64,
}

impl LabelRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0) || !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::config(format!("invalid label rule theta={} delta={}", self.theta, self.delta)));
        }
        Ok(())
    }
}

/// Per-boundary `d_fake`: boundary `i` is effective (true) iff at least a
/// `delta` fraction of its landmarks lie within `theta` of the ground-truth
/// boundary, measured on its distance map by bilinear sampling.
///
/// `pred` holds interleaved normalised coordinates; `input_side` converts
/// them to input pixels, and a further factor 1/4 to heatmap pixels.
pub fn fake_label(
    pred: &[f64],
    distances: &[DistanceMap],
    scheme: &BoundaryScheme,
    input_side: usize,
    rule: LabelRule,
) -> Result<Vec<bool>> {
    if pred.len() != 2 * scheme.landmark_count {
        return Err(Error::dim(format!(
            "{} coordinates for a {}-landmark scheme",
            pred.len(),
            scheme.landmark_count
        )));
    }
    if distances.len() != scheme.boundaries.len() {
        return Err(Error::dim(format!("{} distance maps for {} boundaries", distances.len(), scheme.boundaries.len())));
    }
    let to_heatmap = input_side as f64 / 4.0;
    scheme
        .boundaries
        .iter()
        .zip(distances)
        .map(|(b, dist)| {
            let mut idx = b.indices.clone();
            idx.sort_unstable();
            idx.dedup();
            if idx.is_empty() {
                return Err(Error::config(format!("boundary `{}` has no landmarks", b.name)));
            }
            let close = idx
                .iter()
                .filter(|&&i| dist.sample_bilinear(pred[2 * i] * to_heatmap, pred[2 * i + 1] * to_heatmap) < rule.theta)
                .count();
            Ok(close as f64 / idx.len() as f64 >= rule.delta)
        })
        .collect()
}
