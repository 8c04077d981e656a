use crate::{Error, Result};

/// Binary boundary map, row-major, pixel `(x, y)` centred at integer coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMap {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl BinaryMap {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![false; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::new(height, width);
        for y in 0..height {
            for x in 0..width {
                m.data[y * width + x] = f(x, y);
            }
        }
        m
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize) {
        self.data[y * self.width + x] = true;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn set_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.data.len())
            .filter(|&i| self.data[i])
            .map(|i| (i % self.width, i / self.width))
    }
}

/// Liang-Barsky clip of `a -> b` against `[lo, hi_x] x [lo, hi_y]`.
fn clip(a: [f64; 2], b: [f64; 2], hi_x: f64, hi_y: f64) -> Option<([f64; 2], [f64; 2])> {
    let lo = -0.5;
    let d = [b[0] - a[0], b[1] - a[1]];
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, q) in [
        (-d[0], a[0] - lo),
        (d[0], hi_x - a[0]),
        (-d[1], a[1] - lo),
        (d[1], hi_y - a[1]),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    (t0 <= t1).then(|| {
        (
            [a[0] + t0 * d[0], a[1] + t0 * d[1]],
            [a[0] + t1 * d[0], a[1] + t1 * d[1]],
        )
    })
}

/// Marks every pixel visited by a polyline.
///
/// Each segment is clipped to the map and walked in steps of at most half a
/// pixel (an even number of steps, so the segment midpoint is always a
/// sample); the pixel containing each sample is set. Consecutive samples
/// land in the same or 8-adjacent pixels, so every segment yields an
/// 8-connected chain.
pub fn rasterize(polyline: &[[f64; 2]], height: usize, width: usize) -> Result<BinaryMap> {
    if height < 2 || width < 2 {
        return Err(Error::dim(format!("raster map must be at least 2x2, got {height}x{width}")));
    }
    if polyline.is_empty() {
        return Err(Error::EmptyBoundary("empty polyline".into()));
    }
    let mut map = BinaryMap::new(height, width);
    let (hi_x, hi_y) = (width as f64 - 0.5, height as f64 - 0.5);
    let cell = |v: f64, n: usize| ((v + 0.5).floor().max(0.0) as usize).min(n - 1);
    let pairs: Vec<([f64; 2], [f64; 2])> = if polyline.len() == 1 {
        vec![(polyline[0], polyline[0])]
    } else {
        polyline.windows(2).map(|w| (w[0], w[1])).collect()
    };
    for (a, b) in pairs {
        let Some((a, b)) = clip(a, b, hi_x, hi_y) else { continue };
        let span = (b[0] - a[0]).abs().max((b[1] - a[1]).abs());
        let mut steps = (2.0 * span).ceil() as usize;
        steps += steps % 2;
        for k in 0..=steps {
            let t = if steps == 0 { 0.0 } else { k as f64 / steps as f64 };
            let x = a[0] + t * (b[0] - a[0]);
            let y = a[1] + t * (b[1] - a[1]);
            map.set(cell(x, width), cell(y, height));
        }
    }
    if map.count() == 0 {
        return Err(Error::EmptyBoundary("polyline lies entirely outside the map".into()));
    }
    Ok(map)
}
