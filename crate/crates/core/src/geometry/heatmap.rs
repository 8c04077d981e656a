use super::{distance_transform, interpolate_boundary, rasterize, BoundaryScheme, DistanceMap, LandmarkSet, DEFAULT_DENSITY};
use crate::{Error, Result, Tensor};

/// σ (heatmap pixels) for a heatmap side: 1.0 at 64 and proportional above.
///
/// Smaller maps keep σ = 1.0: proportional scaling would push 3σ below one
/// pixel and collapse every map to its bare raster line.
pub fn default_sigma(heatmap_side: usize) -> f64 {
    (heatmap_side as f64 / 64.0).max(1.0)
}

/// Truncated Gaussian of a distance map: `exp(-d² / 2σ²)` where `d < 3σ`, else 0.
pub fn heatmap_from_distance(distance: &DistanceMap, sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::Usage(format!("sigma must be positive, got {sigma}")));
    }
    let cutoff = 3.0 * sigma;
    let denom = 2.0 * sigma * sigma;
    Ok(distance
        .data()
        .iter()
        .map(|&d| if d < cutoff { (-d * d / denom).exp() } else { 0.0 })
        .collect())
}

/// K boundary heatmaps of one face, `maps[k]` row-major `side x side`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapStack {
    pub side: usize,
    pub sigma: f64,
    pub maps: Vec<Vec<f64>>,
}

impl HeatmapStack {
    pub fn num_boundaries(&self) -> usize {
        self.maps.len()
    }

    pub fn get(&self, k: usize, x: usize, y: usize) -> f64 {
        self.maps[k][y * self.side + x]
    }

    /// `[1, K, side, side]` tensor.
    pub fn to_tensor(&self) -> Tensor {
        let data = self.maps.iter().flatten().copied().collect();
        Tensor::new(&[1, self.maps.len(), self.side, self.side], data).expect("consistent heatmap stack")
    }

    /// Inverse of [`HeatmapStack::to_tensor`] for one batch item.
    pub fn from_tensor(t: &Tensor, sigma: f64) -> Result<Self> {
        let [n, k, h, w] = t.dims4()?;
        if n != 1 || h != w {
            return Err(Error::dim(format!("expected [1, K, S, S], got {:?}", t.shape())));
        }
        Ok(Self {
            side: h,
            sigma,
            maps: t.data().chunks(h * w).take(k).map(<[f64]>::to_vec).collect(),
        })
    }
}

fn heatmap_side(input_side: usize) -> Result<usize> {
    if input_side % 4 != 0 || input_side < 8 {
        return Err(Error::Usage(format!("input side {input_side} must be a multiple of 4 and >= 8")));
    }
    Ok(input_side / 4)
}

fn annotate(err: Error, name: &str) -> Error {
    match err {
        Error::EmptyBoundary(m) => Error::EmptyBoundary(format!("{name}: {m}")),
        Error::DegenerateBoundary { reason, .. } => Error::DegenerateBoundary {
            name: name.to_string(),
            reason,
        },
        other => other,
    }
}

/// Dense polylines of every boundary in heatmap coordinates (landmarks scaled by 1/4).
pub fn boundary_polylines(landmarks: &LandmarkSet, scheme: &BoundaryScheme) -> Result<Vec<Vec<[f64; 2]>>> {
    landmarks.validate_for(scheme)?;
    let quarter = landmarks.scaled(0.25);
    scheme
        .boundaries
        .iter()
        .map(|b| interpolate_boundary(&quarter, b, DEFAULT_DENSITY))
        .collect()
}

/// Distance maps of every boundary at heatmap resolution.
pub fn boundary_distance_maps(landmarks: &LandmarkSet, scheme: &BoundaryScheme, input_side: usize) -> Result<Vec<DistanceMap>> {
    let side = heatmap_side(input_side)?;
    let lines = boundary_polylines(landmarks, scheme)?;
    lines
        .iter()
        .zip(&scheme.boundaries)
        .map(|(line, b)| {
            rasterize(line, side, side)
                .and_then(|m| distance_transform(&m))
                .map_err(|e| annotate(e, &b.name))
        })
        .collect()
}

/// Ground-truth heatmaps at a quarter of the input side.
pub fn generate_heatmaps(landmarks: &LandmarkSet, scheme: &BoundaryScheme, input_side: usize, sigma: f64) -> Result<HeatmapStack> {
    let side = heatmap_side(input_side)?;
    let maps = boundary_distance_maps(landmarks, scheme, input_side)?
        .iter()
        .map(|d| heatmap_from_distance(d, sigma))
        .collect::<Result<_>>()?;
    Ok(HeatmapStack { side, sigma, maps })
}
