//! Exact Euclidean distance transform (separable lower-envelope method).

use super::BinaryMap;
use crate::{Error, Result};

/// Distance in pixels from each pixel centre to the nearest set pixel centre.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl DistanceMap {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Bilinear interpolation at a real-valued position, clamped to the map.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Squared distance along one line: `d[q] = min_p (q - p)^2 + f[p]` over
/// finite `f[p]`; all-infinite input stays infinite.
fn lower_envelope(f: &[f64], d: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    v.clear();
    z.clear();
    let intersect = |q: usize, p: usize| -> f64 {
        let (qf, pf) = (q as f64, p as f64);
        ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf)
    };
    for q in (0..f.len()).filter(|&q| f[q].is_finite()) {
        if v.is_empty() {
            v.push(q);
            z.push(f64::NEG_INFINITY);
            continue;
        }
        let mut s = intersect(q, *v.last().unwrap());
        while s <= *z.last().unwrap() {
            v.pop();
            z.pop();
            s = intersect(q, *v.last().unwrap());
        }
        v.push(q);
        z.push(s);
    }
    if v.is_empty() {
        d.fill(f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while k + 1 < v.len() && z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        *out = dq * dq + f[v[k]];
    }
}

/// Exact Euclidean distance transform of a binary map.
pub fn distance_transform(map: &BinaryMap) -> Result<DistanceMap> {
    let (h, w) = (map.height(), map.width());
    if map.count() == 0 {
        return Err(Error::EmptyBoundary("distance transform of an empty map".into()));
    }
    let mut sq = vec![0.0; h * w];
    let (mut v, mut z) = (Vec::new(), Vec::new());
    let mut col = vec![0.0; h];
    let mut out = vec![0.0; h];
    for x in 0..w {
        for (y, c) in col.iter_mut().enumerate() {
            *c = if map.get(x, y) { 0.0 } else { f64::INFINITY };
        }
        lower_envelope(&col, &mut out, &mut v, &mut z);
        for y in 0..h {
            sq[y * w + x] = out[y];
        }
    }
    let mut row_out = vec![0.0; w];
    for y in 0..h {
        let row = &sq[y * w..(y + 1) * w];
        lower_envelope(row, &mut row_out, &mut v, &mut z);
        sq[y * w..(y + 1) * w].copy_from_slice(&row_out);
    }
    Ok(DistanceMap {
        height: h,
        width: w,
        data: sq.into_iter().map(f64::sqrt).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_corner_pixel() {
        let m = BinaryMap::from_fn(3, 3, |x, y| x == 0 && y == 0);
        let d = distance_transform(&m).unwrap();
        let s2 = 2f64.sqrt();
        let s5 = 5f64.sqrt();
        let s8 = 8f64.sqrt();
        let expected = [[0.0, 1.0, 2.0], [1.0, s2, s5], [2.0, s5, s8]];
        for y in 0..3 {
            for x in 0..3 {
                assert_eq!(d.get(x, y), expected[y][x]);
            }
        }
    }

    #[test]
    fn full_map_is_zero() {
        let d = distance_transform(&BinaryMap::from_fn(4, 5, |_, _| true)).unwrap();
        assert!(d.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_map_is_an_error() {
        assert!(matches!(
            distance_transform(&BinaryMap::new(4, 4)),
            Err(Error::EmptyBoundary(_))
        ));
    }

    #[test]
    fn bilinear_hits_grid_values() {
        let d = distance_transform(&BinaryMap::from_fn(5, 5, |x, y| x == 2 && y == 2)).unwrap();
        assert_eq!(d.sample_bilinear(0.0, 2.0), 2.0);
        assert!((d.sample_bilinear(0.5, 2.0) - 1.5).abs() < 1e-12);
    }
}
