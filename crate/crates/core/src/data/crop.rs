//! Square face crops driven by a bounding box.

use serde::{Deserialize, Serialize};

use super::Sample;
use crate::geometry::{BBox, LandmarkSet};
use crate::{Error, Result, Tensor};

/// Default enlargement of the face box before cropping.
pub const DEFAULT_EXPAND: f64 = 1.25;

/// The crop's affine map from source to output pixels: `q = (p - origin) * scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropTransform {
    pub origin: [f64; 2],
    pub scale: f64,
}

impl CropTransform {
    /// Square window of side `expand * max(w, h)` centred on the box, mapped
    /// onto `out_side` pixels.
    pub fn from_bbox(bbox: BBox, out_side: usize, expand: f64) -> Result<Self> {
        if !(bbox.w > 0.0 && bbox.h > 0.0 && bbox.w.is_finite() && bbox.h.is_finite()) {
            return Err(Error::Data(format!("degenerate bounding box {}x{}", bbox.w, bbox.h)));
        }
        if !(expand > 0.0) || out_side == 0 {
            return Err(Error::config("crop needs expand > 0 and a positive output side"));
        }
        let side = expand * bbox.w.max(bbox.h);
        let c = bbox.center();
        Ok(Self {
            origin: [c[0] - side / 2.0, c[1] - side / 2.0],
            scale: out_side as f64 / side,
        })
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        [(p[0] - self.origin[0]) * self.scale, (p[1] - self.origin[1]) * self.scale]
    }

    pub fn invert(&self, q: [f64; 2]) -> [f64; 2] {
        [q[0] / self.scale + self.origin[0], q[1] / self.scale + self.origin[1]]
    }

    pub fn apply_landmarks(&self, lm: &LandmarkSet) -> LandmarkSet {
        let corner = self.apply([lm.bbox.x, lm.bbox.y]);
        LandmarkSet::new(
            lm.scheme_id.clone(),
            lm.points.iter().map(|&p| self.apply(p)).collect(),
            BBox::new(corner[0], corner[1], lm.bbox.w * self.scale, lm.bbox.h * self.scale),
        )
    }

    pub fn invert_landmarks(&self, lm: &LandmarkSet) -> LandmarkSet {
        let corner = self.invert([lm.bbox.x, lm.bbox.y]);
        LandmarkSet::new(
            lm.scheme_id.clone(),
            lm.points.iter().map(|&q| self.invert(q)).collect(),
            BBox::new(corner[0], corner[1], lm.bbox.w / self.scale, lm.bbox.h / self.scale),
        )
    }
}

/// Bilinear lookup with zero padding outside the image.
fn sample_plane(plane: &[f64], h: usize, w: usize, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let at = |xi: f64, yi: f64| -> f64 {
        if xi < 0.0 || yi < 0.0 || xi >= w as f64 || yi >= h as f64 {
            0.0
        } else {
            plane[yi as usize * w + xi as usize]
        }
    };
    let top = at(x0, y0) * (1.0 - fx) + at(x0 + 1.0, y0) * fx;
    let bottom = at(x0, y0 + 1.0) * (1.0 - fx) + at(x0 + 1.0, y0 + 1.0) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Resamples an RGB image `[3, H, W]` through `t` into `[3, out, out]`.
pub fn warp_image(image: &Tensor, t: &CropTransform, out_side: usize) -> Result<Tensor> {
    let [c, h, w] = match image.shape() {
        &[c, h, w] => [c, h, w],
        s => return Err(Error::dim(format!("expected an image [C, H, W], got {s:?}"))),
    };
    let mut out = vec![0.0; c * out_side * out_side];
    for ch in 0..c {
        let plane = &image.data()[ch * h * w..(ch + 1) * h * w];
        for v in 0..out_side {
            for u in 0..out_side {
                let p = t.invert([u as f64, v as f64]);
                out[(ch * out_side + v) * out_side + u] = sample_plane(plane, h, w, p[0], p[1]);
            }
        }
    }
    Tensor::new(&[c, out_side, out_side], out)
}

/// Clamps points into `[0, side - 1]` and returns the indices that moved.
pub fn clamp_landmarks(points: &mut [[f64; 2]], side: usize) -> Vec<usize> {
    let hi = side as f64 - 1.0;
    let mut moved = Vec::new();
    for (i, p) in points.iter_mut().enumerate() {
        let q = [p[0].clamp(0.0, hi), p[1].clamp(0.0, hi)];
        if q != *p {
            moved.push(i);
            *p = q;
        }
    }
    moved
}

/// Crops, resizes and re-expresses landmarks in the crop frame.
pub fn crop_sample(
    image: &Tensor,
    landmarks: &LandmarkSet,
    bbox: BBox,
    out_side: usize,
    expand: f64,
    source_id: impl Into<String>,
) -> Result<(Sample, CropTransform)> {
    let t = CropTransform::from_bbox(bbox, out_side, expand)?;
    let image = warp_image(image, &t, out_side)?;
    let mut lm = t.apply_landmarks(&LandmarkSet::new(landmarks.scheme_id.clone(), landmarks.points.clone(), bbox));
    let clamped = clamp_landmarks(&mut lm.points, out_side);
    Ok((
        Sample {
            image,
            landmarks: lm,
            source_id: source_id.into(),
            clamped,
        },
        t,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lm(points: Vec<[f64; 2]>) -> LandmarkSet {
        LandmarkSet::with_tight_bbox("t", points)
    }

    #[test]
    fn whole_image_box_is_identity() {
        let img = Tensor::from_fn(&[3, 8, 8], |i| i as f64 / 192.0);
        let pts = vec![[1.0, 2.0], [6.5, 3.25]];
        let (s, t) = crop_sample(&img, &lm(pts.clone()), BBox::new(0.0, 0.0, 8.0, 8.0), 8, 1.0, "a").unwrap();
        assert_eq!(t.scale, 1.0);
        assert_eq!(s.landmarks.points, pts);
        assert!(s.image.max_abs_diff(&img) < 1e-12);
    }

    #[test]
    fn box_centre_maps_to_output_centre() {
        let img = Tensor::zeros(&[3, 100, 80]);
        let bbox = BBox::new(13.0, 20.0, 30.0, 42.0);
        let (s, _) = crop_sample(&img, &lm(vec![bbox.center()]), bbox, 64, 1.25, "a").unwrap();
        assert!((s.landmarks.points[0][0] - 32.0).abs() < 1e-12);
        assert!((s.landmarks.points[0][1] - 32.0).abs() < 1e-12);
    }

    #[test]
    fn transform_round_trip() {
        let t = CropTransform::from_bbox(BBox::new(3.7, -2.0, 41.0, 17.5), 48, 1.3).unwrap();
        for p in [[0.0, 0.0], [12.5, -7.25], [99.0, 31.0]] {
            let back = t.invert(t.apply(p));
            assert!((back[0] - p[0]).abs() < 1e-9 && (back[1] - p[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_box_is_rejected() {
        assert!(CropTransform::from_bbox(BBox::new(0.0, 0.0, 0.0, 5.0), 8, 1.0).is_err());
    }

    #[test]
    fn outside_is_zero_padded_and_landmarks_clamped() {
        let img = Tensor::ones(&[3, 4, 4]);
        let (s, _) = crop_sample(&img, &lm(vec![[-3.0, 1.0]]), BBox::new(0.0, 0.0, 4.0, 4.0), 8, 2.0, "a").unwrap();
        assert_eq!(s.image.data()[0], 0.0);
        assert_eq!(s.clamped, vec![0]);
        assert_eq!(s.landmarks.points[0][0], 0.0);
    }
}
