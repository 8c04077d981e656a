//! Centripetal Catmull-Rom interpolation through ordered control points.

use super::{BoundaryDef, LandmarkSet};
use crate::{Error, Result};

/// Dense samples per control segment used when generating ground truth.
pub const DEFAULT_DENSITY: usize = 10;

const KNOT_EPS: f64 = 1e-12;

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = sub(a, b);
    d[0].hypot(d[1])
}

/// Hermite segment from `p1` to `p2` with centripetal tangents derived from
/// the neighbours `p0` and `p3`.
fn segment(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2], p3: [f64; 2], density: usize, out: &mut Vec<[f64; 2]>) {
    let dt1 = dist(p1, p2).sqrt();
    if dt1 < KNOT_EPS {
        out.extend(std::iter::repeat_n(p1, density));
        return;
    }
    let mut dt0 = dist(p0, p1).sqrt();
    let mut dt2 = dist(p2, p3).sqrt();
    if dt0 < KNOT_EPS {
        dt0 = dt1;
    }
    if dt2 < KNOT_EPS {
        dt2 = dt1;
    }
    let mut m1 = [0.0; 2];
    let mut m2 = [0.0; 2];
    for a in 0..2 {
        let t1 = (p1[a] - p0[a]) / dt0 - (p2[a] - p0[a]) / (dt0 + dt1) + (p2[a] - p1[a]) / dt1;
        let t2 = (p2[a] - p1[a]) / dt1 - (p3[a] - p1[a]) / (dt1 + dt2) + (p3[a] - p2[a]) / dt2;
        m1[a] = t1 * dt1;
        m2[a] = t2 * dt1;
    }
    for s in 0..density {
        let t = s as f64 / density as f64;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        out.push([
            h00 * p1[0] + h10 * m1[0] + h01 * p2[0] + h11 * m2[0],
            h00 * p1[1] + h10 * m1[1] + h01 * p2[1] + h11 * m2[1],
        ]);
    }
}

/// Dense polyline through `controls` in order.
///
/// Open curves duplicate their end points as phantom neighbours; closed
/// curves wrap around and repeat the first control point at the end so the
/// polyline returns to its start. Open output has `(n - 1) * density + 1`
/// samples, closed output `n * density + 1`.
pub fn catmull_rom(controls: &[[f64; 2]], closed: bool, density: usize) -> Result<Vec<[f64; 2]>> {
    let n = controls.len();
    if n < 2 {
        return Err(Error::DegenerateBoundary {
            name: String::new(),
            reason: format!("{n} control point(s), need at least 2"),
        });
    }
    if density == 0 {
        return Err(Error::Usage("interpolation density must be >= 1".into()));
    }
    let at = |i: isize| -> [f64; 2] {
        if closed {
            controls[i.rem_euclid(n as isize) as usize]
        } else {
            controls[i.clamp(0, n as isize - 1) as usize]
        }
    };
    let segments = if closed { n } else { n - 1 };
    let mut out = Vec::with_capacity(segments * density + 1);
    for s in 0..segments as isize {
        segment(at(s - 1), at(s), at(s + 1), at(s + 2), density, &mut out);
    }
    out.push(if closed { controls[0] } else { controls[n - 1] });
    Ok(out)
}

/// Interpolates one boundary of a landmark set into a dense polyline.
pub fn interpolate_boundary(landmarks: &LandmarkSet, boundary: &BoundaryDef, density: usize) -> Result<Vec<[f64; 2]>> {
    let controls = boundary
        .indices
        .iter()
        .map(|&i| {
            landmarks.points.get(i).copied().ok_or_else(|| Error::DegenerateBoundary {
                name: boundary.name.clone(),
                reason: format!("landmark {i} out of range"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    catmull_rom(&controls, boundary.closed, density).map_err(|e| match e {
        Error::DegenerateBoundary { reason, .. } => Error::DegenerateBoundary {
            name: boundary.name.clone(),
            reason,
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_give_a_straight_segment() {
        let pts = catmull_rom(&[[1.0, 2.0], [5.0, 4.0]], false, 7).unwrap();
        assert_eq!(pts.len(), 8);
        assert_eq!(pts[0], [1.0, 2.0]);
        assert_eq!(*pts.last().unwrap(), [5.0, 4.0]);
        for p in &pts {
            // On the line y = 2 + (x - 1) / 2 and between the endpoints.
            assert!((p[1] - (2.0 + (p[0] - 1.0) / 2.0)).abs() < 1e-12);
            assert!(p[0] >= 1.0 - 1e-12 && p[0] <= 5.0 + 1e-12);
        }
    }

    #[test]
    fn collinear_controls_stay_collinear() {
        let controls: Vec<[f64; 2]> = [0.0, 0.7, 2.5, 3.0, 6.1]
            .iter()
            .map(|&t| [1.0 + 2.0 * t, -3.0 + 0.5 * t])
            .collect();
        let pts = catmull_rom(&controls, false, 10).unwrap();
        for p in pts {
            let t = (p[0] - 1.0) / 2.0;
            assert!((p[1] - (-3.0 + 0.5 * t)).abs() < 1e-9);
        }
    }

    #[test]
    fn passes_through_every_control_point() {
        let controls = [[0.0, 0.0], [3.0, 1.0], [4.0, 5.0], [9.0, 2.0]];
        let density = 6;
        let pts = catmull_rom(&controls, false, density).unwrap();
        for (i, c) in controls.iter().enumerate() {
            assert_eq!(pts[i * density], *c);
        }
    }

    #[test]
    fn closed_circle_stays_near_radius() {
        let r = 10.0;
        let controls: Vec<[f64; 2]> = (0..8)
            .map(|k| {
                let a = k as f64 * std::f64::consts::TAU / 8.0;
                [r * a.cos(), r * a.sin()]
            })
            .collect();
        let pts = catmull_rom(&controls, true, 20).unwrap();
        assert_eq!(pts.first(), pts.last());
        let worst = pts.iter().map(|p| (p[0].hypot(p[1]) - r).abs()).fold(0.0, f64::max);
        assert!(worst <= 0.02 * r, "radial deviation {worst}");
    }

    #[test]
    fn single_point_is_degenerate() {
        assert!(matches!(
            catmull_rom(&[[1.0, 1.0]], false, 4),
            Err(Error::DegenerateBoundary { .. })
        ));
    }

    #[test]
    fn repeated_points_do_not_produce_nan() {
        let pts = catmull_rom(&[[1.0, 1.0], [1.0, 1.0], [4.0, 1.0]], false, 5).unwrap();
        assert!(pts.iter().flatten().all(|v| v.is_finite()));
    }
}
