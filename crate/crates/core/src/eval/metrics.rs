//! Normalised mean error and its summaries.

use serde::{Deserialize, Serialize};

use crate::geometry::{BoundaryScheme, LandmarkSet};
use crate::{Error, Result, Tensor};

/// Default cut-off for AUC and failure rate.
pub const DEFAULT_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationKind {
    /// Outer eye corner distance.
    InterOcular,
    /// Distance between eye-landmark centroids.
    InterPupil,
    /// `sqrt(w * h)` of the face box.
    FaceSize,
}

impl NormalizationKind {
    pub const ALL: [NormalizationKind; 3] = [Self::InterOcular, Self::InterPupil, Self::FaceSize];

    pub fn name(self) -> &'static str {
        match self {
            Self::InterOcular => "inter_ocular",
            Self::InterPupil => "inter_pupil",
            Self::FaceSize => "face_size",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown normalisation `{s}`")))
    }
}

fn centroid(points: &[[f64; 2]], idx: &[usize]) -> [f64; 2] {
    let n = idx.len() as f64;
    let (sx, sy) = idx.iter().fold((0.0, 0.0), |(x, y), &i| (x + points[i][0], y + points[i][1]));
    [sx / n, sy / n]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// The normalising length of a ground-truth face.
pub fn normalizer(gt: &LandmarkSet, scheme: &BoundaryScheme, kind: NormalizationKind) -> Result<f64> {
    gt.validate_for(scheme)?;
    let n = &scheme.normalization;
    let d = match kind {
        NormalizationKind::InterOcular => dist(gt.points[n.inter_ocular[0]], gt.points[n.inter_ocular[1]]),
        NormalizationKind::InterPupil => dist(centroid(&gt.points, &n.left_pupil), centroid(&gt.points, &n.right_pupil)),
        NormalizationKind::FaceSize => (gt.bbox.w * gt.bbox.h).sqrt(),
    };
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::Data(format!("{} normaliser is {d}", kind.name())));
    }
    Ok(d)
}

/// Mean point-to-point error over the landmarks, divided by `norm`.
pub fn nme_with(pred: &[[f64; 2]], gt: &[[f64; 2]], norm: f64) -> Result<f64> {
    if pred.len() != gt.len() || gt.is_empty() {
        return Err(Error::dim(format!("{} predicted vs {} ground-truth landmarks", pred.len(), gt.len())));
    }
    if !(norm > 0.0) {
        return Err(Error::Data(format!("normaliser must be positive, got {norm}")));
    }
    let total: f64 = pred.iter().zip(gt).map(|(&p, &g)| dist(p, g)).sum();
    Ok(total / gt.len() as f64 / norm)
}

pub fn nme(pred: &LandmarkSet, gt: &LandmarkSet, scheme: &BoundaryScheme, kind: NormalizationKind) -> Result<f64> {
    if pred.scheme_id != gt.scheme_id {
        return Err(Error::config(format!("scheme `{}` vs `{}`", pred.scheme_id, gt.scheme_id)));
    }
    nme_with(&pred.points, &gt.points, normalizer(gt, scheme, kind)?)
}

fn check(errors: &[f64]) -> Result<()> {
    if errors.is_empty() {
        return Err(Error::Usage("empty error list".into()));
    }
    if errors.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
        return Err(Error::Usage("errors must be finite and non-negative".into()));
    }
    Ok(())
}

/// Fraction of errors `<= t`.
pub fn ced_at(errors: &[f64], t: f64) -> Result<f64> {
    check(errors)?;
    Ok(errors.iter().filter(|&&e| e <= t).count() as f64 / errors.len() as f64)
}

/// CED evaluated on a threshold grid: `(t, fraction <= t)`.
pub fn ced(errors: &[f64], thresholds: &[f64]) -> Result<Vec<(f64, f64)>> {
    check(errors)?;
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&t| (t, sorted.partition_point(|&e| e <= t) as f64 / n))
        .collect())
}

/// `steps + 1` evenly spaced thresholds on `[0, max_t]`.
pub fn threshold_grid(max_t: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| max_t * i as f64 / steps as f64).collect()
}

/// Exact area under the CED step function on `[0, max_t]`, over `max_t`.
/// Each error `e` contributes the rectangle `max(0, max_t - e)`.
pub fn auc(errors: &[f64], max_t: f64) -> Result<f64> {
    check(errors)?;
    if !(max_t > 0.0) {
        return Err(Error::Usage(format!("AUC cut-off must be positive, got {max_t}")));
    }
    let area: f64 = errors.iter().map(|&e| (max_t - e).max(0.0)).sum();
    Ok(area / (errors.len() as f64 * max_t))
}

/// Fraction of errors strictly above `t`.
pub fn failure_rate(errors: &[f64], t: f64) -> Result<f64> {
    check(errors)?;
    if !(t > 0.0) {
        return Err(Error::Usage(format!("failure threshold must be positive, got {t}")));
    }
    Ok(1.0 - ced_at(errors, t)?)
}

/// Mean absolute pixel difference between heatmap stacks (unit dynamic range).
pub fn heatmap_error(pred: &Tensor, gt: &Tensor) -> Result<f64> {
    if pred.shape() != gt.shape() {
        return Err(Error::dim(format!("heatmaps {:?} vs {:?}", pred.shape(), gt.shape())));
    }
    let total: f64 = pred.data().iter().zip(gt.data()).map(|(a, b)| (a - b).abs()).sum();
    Ok(total / gt.len() as f64)
}
