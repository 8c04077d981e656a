//! Procedural face images with exact landmark annotations.
//!
//! Each face is a set of parametric curves in a canonical frame (face centre
//! at the origin, y pointing down, roughly unit half-height). Every shipped
//! scheme samples its landmarks from these same curves, so one face can be
//! annotated under several schemes at once.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{clamp_landmarks, Sample};
use crate::geometry::{BBox, BoundaryScheme, LandmarkSet};
use crate::{Error, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Image side in pixels.
    pub side: usize,
    /// Fraction of samples that receive an occluding rectangle.
    pub occlusion_fraction: f64,
    /// Rotation is uniform in `[-max, max]` degrees.
    pub max_rotation_deg: f64,
    /// Scale is uniform in `[1 - j, 1 + j]`.
    pub scale_jitter: f64,
    /// Standard deviation of additive pixel noise.
    pub noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            side: 64,
            occlusion_fraction: 0.0,
            max_rotation_deg: 30.0,
            scale_jitter: 0.2,
            noise: 0.03,
        }
    }
}

/// One generated face annotated under one or more schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthFace {
    pub image: Tensor,
    pub landmarks: Vec<LandmarkSet>,
    pub clamped: Vec<Vec<usize>>,
    pub source_id: String,
    pub occluded: bool,
}

impl SynthFace {
    pub fn sample(&self, scheme_index: usize) -> Sample {
        Sample {
            image: self.image.clone(),
            landmarks: self.landmarks[scheme_index].clone(),
            source_id: self.source_id.clone(),
            clamped: self.clamped[scheme_index].clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Curve {
    Contour,
    LeftBrowUpper,
    LeftBrowLower,
    RightBrowUpper,
    RightBrowLower,
    NoseBridge,
    NoseBase,
    LeftEyeUpper,
    LeftEyeLower,
    RightEyeUpper,
    RightEyeLower,
    OuterUpperLip,
    OuterLowerLip,
    InnerUpperLip,
    InnerLowerLip,
}

#[derive(Debug, Clone, Copy)]
enum Anchor {
    On(Curve, f64),
    LeftPupil,
    RightPupil,
    MouthCentre,
}

use Anchor::On;
use Curve::*;

fn even(curve: Curve, n: usize) -> impl Iterator<Item = Anchor> {
    (0..n).map(move |i| On(curve, i as f64 / (n - 1) as f64))
}

fn interior(curve: Curve, n: usize) -> impl Iterator<Item = Anchor> {
    (1..=n).map(move |i| On(curve, i as f64 / (n + 1) as f64))
}

fn anchors(scheme_id: &str) -> Result<Vec<Anchor>> {
    let mut a: Vec<Anchor> = Vec::new();
    match scheme_id {
        "300w_68" => {
            a.extend(even(Contour, 17));
            a.extend(even(LeftBrowUpper, 5));
            a.extend(even(RightBrowUpper, 5));
            a.extend(even(NoseBridge, 4));
            a.extend(even(NoseBase, 5));
            a.extend(even(LeftEyeUpper, 4));
            a.extend(interior(LeftEyeLower, 2));
            a.extend(even(RightEyeUpper, 4));
            a.extend(interior(RightEyeLower, 2));
            a.extend(even(OuterUpperLip, 7));
            a.extend(interior(OuterLowerLip, 5));
            a.extend(even(InnerUpperLip, 5));
            a.extend(interior(InnerLowerLip, 3));
        }
        "wflw_98" => {
            a.extend(even(Contour, 33));
            a.extend(even(LeftBrowUpper, 5));
            a.extend([0.8, 0.6, 0.4, 0.2].map(|t| On(LeftBrowLower, t)));
            a.extend(even(RightBrowUpper, 5));
            a.extend([0.8, 0.6, 0.4, 0.2].map(|t| On(RightBrowLower, t)));
            a.extend(even(NoseBridge, 4));
            a.extend(even(NoseBase, 5));
            a.extend(even(LeftEyeUpper, 5));
            a.extend(interior(LeftEyeLower, 3));
            a.extend(even(RightEyeUpper, 5));
            a.extend(interior(RightEyeLower, 3));
            a.extend(even(OuterUpperLip, 7));
            a.extend(interior(OuterLowerLip, 5));
            a.extend(even(InnerUpperLip, 5));
            a.extend(interior(InnerLowerLip, 3));
            a.extend([Anchor::LeftPupil, Anchor::RightPupil]);
        }
        "cofw_29" => a.extend([
            On(LeftBrowUpper, 0.0),
            On(RightBrowUpper, 1.0),
            On(LeftBrowUpper, 1.0),
            On(RightBrowUpper, 0.0),
            On(LeftBrowUpper, 0.5),
            On(RightBrowUpper, 0.5),
            On(LeftBrowLower, 0.5),
            On(RightBrowLower, 0.5),
            On(LeftEyeUpper, 0.0),
            On(RightEyeUpper, 1.0),
            On(LeftEyeUpper, 1.0),
            On(RightEyeUpper, 0.0),
            On(LeftEyeUpper, 0.5),
            On(RightEyeUpper, 0.5),
            On(LeftEyeLower, 0.5),
            On(RightEyeLower, 0.5),
            Anchor::LeftPupil,
            Anchor::RightPupil,
            On(NoseBase, 0.0),
            On(NoseBase, 1.0),
            On(NoseBridge, 1.0),
            On(NoseBase, 0.5),
            On(OuterUpperLip, 0.0),
            On(OuterUpperLip, 1.0),
            On(OuterUpperLip, 0.5),
            On(InnerUpperLip, 0.5),
            On(InnerLowerLip, 0.5),
            On(OuterLowerLip, 0.5),
            On(Contour, 0.5),
        ]),
        "aflw_19" => a.extend([
            On(LeftBrowUpper, 0.0),
            On(LeftBrowUpper, 0.5),
            On(LeftBrowUpper, 1.0),
            On(RightBrowUpper, 0.0),
            On(RightBrowUpper, 0.5),
            On(RightBrowUpper, 1.0),
            On(LeftEyeUpper, 0.0),
            Anchor::LeftPupil,
            On(LeftEyeUpper, 1.0),
            On(RightEyeUpper, 0.0),
            Anchor::RightPupil,
            On(RightEyeUpper, 1.0),
            On(NoseBase, 0.0),
            On(NoseBridge, 1.0),
            On(NoseBase, 1.0),
            On(OuterUpperLip, 0.0),
            Anchor::MouthCentre,
            On(OuterUpperLip, 1.0),
            On(Contour, 0.5),
        ]),
        other => return Err(Error::config(format!("no synthetic landmark layout for scheme `{other}`"))),
    }
    Ok(a)
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

fn bezier(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2], t: f64) -> [f64; 2] {
    let u = 1.0 - t;
    [
        u * u * p0[0] + 2.0 * u * t * p1[0] + t * t * p2[0],
        u * u * p0[1] + 2.0 * u * t * p1[1] + t * t * p2[1],
    ]
}

/// Per-face shape parameters in canonical units.
#[derive(Debug, Clone, Copy)]
struct FaceShape {
    jaw_a: f64,
    jaw_b: f64,
    jaw_y: f64,
    shift: f64,
    brow_y: f64,
    brow_arch: f64,
    brow_outer: f64,
    brow_inner: f64,
    brow_thick: f64,
    eye_y: f64,
    eye_outer: f64,
    eye_inner: f64,
    lid_up: f64,
    lid_lo: f64,
    nose_top: f64,
    nose_tip: f64,
    nose_w: f64,
    mouth_y: f64,
    mouth_w: f64,
    lip_up: f64,
    lip_lo: f64,
    open: f64,
}

impl FaceShape {
    fn random(rng: &mut impl Rng) -> Self {
        let mut j = |centre: f64, spread: f64| centre + rng.random_range(-spread..=spread);
        Self {
            jaw_a: j(0.88, 0.05),
            jaw_b: j(1.0, 0.05),
            jaw_y: j(-0.1, 0.03),
            shift: j(0.0, 0.07),
            brow_y: j(-0.46, 0.04),
            brow_arch: j(0.1, 0.04),
            brow_outer: j(0.72, 0.05),
            brow_inner: j(0.14, 0.03),
            brow_thick: j(0.06, 0.015),
            eye_y: j(-0.24, 0.03),
            eye_outer: j(0.6, 0.04),
            eye_inner: j(0.2, 0.03),
            lid_up: j(0.08, 0.025),
            lid_lo: j(0.055, 0.015),
            nose_top: j(-0.22, 0.03),
            nose_tip: j(0.14, 0.03),
            nose_w: j(0.17, 0.03),
            mouth_y: j(0.5, 0.04),
            mouth_w: j(0.34, 0.05),
            lip_up: j(0.08, 0.02),
            lip_lo: j(0.1, 0.02),
            open: j(0.04, 0.04),
        }
    }

    fn brow_upper_left(&self, t: f64) -> [f64; 2] {
        let (o, i) = (-self.brow_outer + self.shift, -self.brow_inner + self.shift);
        bezier(
            [o, self.brow_y + 0.04],
            [(o + i) / 2.0, self.brow_y - self.brow_arch],
            [i, self.brow_y + 0.02],
            t,
        )
    }

    fn brow_upper_right(&self, t: f64) -> [f64; 2] {
        let p = self.brow_upper_left(1.0 - t);
        [-(p[0] - self.shift) + self.shift, p[1]]
    }

    fn eye(&self, side: f64, from_outer: bool, upper: bool, t: f64) -> [f64; 2] {
        let outer = side * self.eye_outer + self.shift;
        let inner = side * self.eye_inner + self.shift;
        let (a, b) = if from_outer { (outer, inner) } else { (inner, outer) };
        let bulge = if upper { -self.lid_up } else { self.lid_lo };
        [lerp(a, b, t), self.eye_y + bulge * (std::f64::consts::PI * t).sin()]
    }

    fn point(&self, curve: Curve, t: f64) -> [f64; 2] {
        let s = (std::f64::consts::PI * t).sin();
        let m = self.shift;
        match curve {
            Contour => {
                let phi = std::f64::consts::PI * (1.0 - t);
                [self.jaw_a * phi.cos() + 0.3 * m * phi.sin(), self.jaw_y + self.jaw_b * phi.sin()]
            }
            LeftBrowUpper => self.brow_upper_left(t),
            LeftBrowLower => {
                let p = self.brow_upper_left(t);
                [p[0], p[1] + self.brow_thick]
            }
            RightBrowUpper => self.brow_upper_right(t),
            RightBrowLower => {
                let p = self.brow_upper_right(t);
                [p[0], p[1] + self.brow_thick]
            }
            NoseBridge => [m + 0.3 * m * t, lerp(self.nose_top, self.nose_tip, t)],
            NoseBase => bezier(
                [m - self.nose_w, self.nose_tip + 0.06],
                [m + 0.3 * m, self.nose_tip + 0.18],
                [m + self.nose_w, self.nose_tip + 0.06],
                t,
            ),
            LeftEyeUpper => self.eye(-1.0, true, true, t),
            LeftEyeLower => self.eye(-1.0, false, false, t),
            RightEyeUpper => self.eye(1.0, false, true, t),
            RightEyeLower => self.eye(1.0, true, false, t),
            OuterUpperLip => [m + lerp(-self.mouth_w, self.mouth_w, t), self.mouth_y - self.lip_up * s],
            OuterLowerLip => [
                m + lerp(self.mouth_w, -self.mouth_w, t),
                self.mouth_y + (self.lip_lo + self.open) * s,
            ],
            InnerUpperLip => {
                let w = 0.8 * self.mouth_w;
                [m + lerp(-w, w, t), self.mouth_y - 0.01 * s]
            }
            InnerLowerLip => {
                let w = 0.8 * self.mouth_w;
                [m + lerp(w, -w, t), self.mouth_y + (0.01 + self.open) * s]
            }
        }
    }

    fn anchor(&self, a: Anchor) -> [f64; 2] {
        match a {
            On(c, t) => self.point(c, t),
            Anchor::LeftPupil => [self.shift - (self.eye_outer + self.eye_inner) / 2.0, self.eye_y],
            Anchor::RightPupil => [self.shift + (self.eye_outer + self.eye_inner) / 2.0, self.eye_y],
            Anchor::MouthCentre => [self.shift, self.mouth_y + self.open / 2.0],
        }
    }

    fn dense(&self, curve: Curve, pose: &Pose) -> Vec<[f64; 2]> {
        (0..=48).map(|i| pose.apply(self.point(curve, i as f64 / 48.0))).collect()
    }
}

/// Canonical-to-image similarity transform.
#[derive(Debug, Clone, Copy)]
struct Pose {
    centre: [f64; 2],
    scale: f64,
    cos: f64,
    sin: f64,
}

impl Pose {
    fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        [
            self.centre[0] + self.scale * (self.cos * p[0] - self.sin * p[1]),
            self.centre[1] + self.scale * (self.sin * p[0] + self.cos * p[1]),
        ]
    }
}

type Rgb = [f64; 3];

struct Canvas {
    side: usize,
    px: Vec<Rgb>,
}

fn inside(poly: &[[f64; 2]], x: f64, y: f64) -> bool {
    let mut hit = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > y) != (b[1] > y) && x < (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]) + a[0] {
            hit = !hit;
        }
        j = i;
    }
    hit
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    };
    (p[0] - a[0] - t * d[0]).hypot(p[1] - a[1] - t * d[1])
}

impl Canvas {
    fn new(side: usize) -> Self {
        Self {
            side,
            px: vec![[0.0; 3]; side * side],
        }
    }

    fn blend(&mut self, x: usize, y: usize, c: Rgb, alpha: f64) {
        let p = &mut self.px[y * self.side + x];
        for k in 0..3 {
            p[k] = p[k] * (1.0 - alpha) + c[k] * alpha;
        }
    }

    fn span(&self, lo: f64, hi: f64) -> std::ops::RangeInclusive<usize> {
        let max = self.side as f64 - 1.0;
        (lo.floor().clamp(0.0, max) as usize)..=(hi.ceil().clamp(0.0, max) as usize)
    }

    fn bounds(&self, pts: &[[f64; 2]], pad: f64) -> (std::ops::RangeInclusive<usize>, std::ops::RangeInclusive<usize>) {
        let b = BBox::enclosing(pts);
        (self.span(b.x - pad, b.x + b.w + pad), self.span(b.y - pad, b.y + b.h + pad))
    }

    /// Even-odd fill with 2x2 supersampled coverage.
    fn fill(&mut self, poly: &[[f64; 2]], colour: impl Fn(usize, usize) -> Rgb) {
        let (xs, ys) = self.bounds(poly, 1.0);
        for y in ys {
            for x in xs.clone() {
                let cover = [(-0.25, -0.25), (0.25, -0.25), (-0.25, 0.25), (0.25, 0.25)]
                    .iter()
                    .filter(|(dx, dy)| inside(poly, x as f64 + dx, y as f64 + dy))
                    .count();
                if cover > 0 {
                    self.blend(x, y, colour(x, y), cover as f64 / 4.0);
                }
            }
        }
    }

    fn stroke(&mut self, line: &[[f64; 2]], width: f64, c: Rgb) {
        let (xs, ys) = self.bounds(line, width + 1.0);
        for y in ys {
            for x in xs.clone() {
                let p = [x as f64, y as f64];
                let d = line
                    .windows(2)
                    .map(|w| segment_distance(p, w[0], w[1]))
                    .fold(f64::INFINITY, f64::min);
                let alpha = (width / 2.0 + 0.5 - d).clamp(0.0, 1.0);
                if alpha > 0.0 {
                    self.blend(x, y, c, alpha);
                }
            }
        }
    }

    fn into_tensor(self) -> Tensor {
        let n = self.side * self.side;
        let mut data = vec![0.0; 3 * n];
        for (i, p) in self.px.iter().enumerate() {
            for k in 0..3 {
                data[k * n + i] = p[k].clamp(0.0, 1.0);
            }
        }
        Tensor::new(&[3, self.side, self.side], data).expect("canvas shape")
    }
}

fn random_colour(rng: &mut impl Rng, lo: f64, hi: f64) -> Rgb {
    [rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi)]
}

fn scaled(c: Rgb, f: f64) -> Rgb {
    [c[0] * f, c[1] * f, c[2] * f]
}

fn joined(a: &[[f64; 2]], b: &[[f64; 2]]) -> Vec<[f64; 2]> {
    a.iter().chain(b).copied().collect()
}

fn render(shape: &FaceShape, pose: &Pose, side: usize, occlude: bool, cfg: &SynthConfig, rng: &mut impl Rng) -> Tensor {
    let mut cv = Canvas::new(side);
    let s = side as f64;

    // Cluttered background.
    let bg = random_colour(rng, 0.05, 0.95);
    let (gx, gy) = (rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
    for y in 0..side {
        for x in 0..side {
            let g = gx * (x as f64 / s - 0.5) + gy * (y as f64 / s - 0.5);
            cv.px[y * side + x] = [bg[0] + g, bg[1] + g, bg[2] + g];
        }
    }
    for _ in 0..rng.random_range(2..6) {
        let c = [rng.random_range(0.0..s), rng.random_range(0.0..s)];
        let (rx, ry) = (rng.random_range(0.05..0.3) * s, rng.random_range(0.05..0.3) * s);
        let blob: Vec<[f64; 2]> = (0..24)
            .map(|k| {
                let a = k as f64 * std::f64::consts::TAU / 24.0;
                [c[0] + rx * a.cos(), c[1] + ry * a.sin()]
            })
            .collect();
        let col = random_colour(rng, 0.0, 1.0);
        cv.fill(&blob, |_, _| col);
    }

    // Head: jaw contour closed by a forehead arc.
    let skin_r = rng.random_range(0.45..0.95);
    let skin = [skin_r, skin_r * rng.random_range(0.68..0.85), skin_r * rng.random_range(0.5..0.72)];
    let contour = shape.dense(Contour, pose);
    let forehead: Vec<[f64; 2]> = (1..48)
        .map(|i| {
            let phi = std::f64::consts::PI * i as f64 / 48.0;
            pose.apply([shape.jaw_a * phi.cos(), shape.jaw_y - 1.0 * phi.sin()])
        })
        .collect();
    let shade = rng.random_range(-0.15..0.15);
    let head = joined(&contour, &forehead);
    cv.fill(&head, |x, _| scaled(skin, 1.0 + shade * (x as f64 / s - 0.5)));
    cv.stroke(&contour, 1.0, scaled(skin, 0.55));

    // Brows.
    let hair = random_colour(rng, 0.02, 0.3);
    for (up, lo) in [(LeftBrowUpper, LeftBrowLower), (RightBrowUpper, RightBrowLower)] {
        let upper = shape.dense(up, pose);
        let mut lower = shape.dense(lo, pose);
        lower.reverse();
        cv.fill(&joined(&upper, &lower), |_, _| hair);
        cv.stroke(&upper, 0.8, scaled(hair, 0.7));
    }

    // Eyes with iris.
    let iris = random_colour(rng, 0.05, 0.45);
    for (up, lo, pupil) in [
        (LeftEyeUpper, LeftEyeLower, Anchor::LeftPupil),
        (RightEyeUpper, RightEyeLower, Anchor::RightPupil),
    ] {
        let upper = shape.dense(up, pose);
        let lower = shape.dense(lo, pose);
        let eye = joined(&upper, &lower);
        cv.fill(&eye, |_, _| [0.92, 0.92, 0.9]);
        let c = pose.apply(shape.anchor(pupil));
        let r = 0.7 * (shape.lid_up + shape.lid_lo) * pose.scale;
        let disk: Vec<[f64; 2]> = (0..20)
            .map(|k| {
                let a = k as f64 * std::f64::consts::TAU / 20.0;
                [c[0] + r * a.cos(), c[1] + r * a.sin()]
            })
            .collect();
        let (xs, ys) = cv.bounds(&disk, 1.0);
        for y in ys {
            for x in xs.clone() {
                let (fx, fy) = (x as f64, y as f64);
                if inside(&eye, fx, fy) && inside(&disk, fx, fy) {
                    cv.blend(x, y, iris, 1.0);
                }
            }
        }
        cv.stroke(&upper, 1.0, [0.05, 0.04, 0.04]);
        cv.stroke(&lower, 0.7, scaled(skin, 0.45));
    }

    // Nose.
    cv.stroke(&shape.dense(NoseBridge, pose), 1.0, scaled(skin, 0.75));
    cv.stroke(&shape.dense(NoseBase, pose), 1.2, scaled(skin, 0.5));

    // Mouth.
    let lip = [rng.random_range(0.55..0.9), rng.random_range(0.1..0.35), rng.random_range(0.15..0.4)];
    let outer_up = shape.dense(OuterUpperLip, pose);
    let outer_lo = shape.dense(OuterLowerLip, pose);
    let inner_up = shape.dense(InnerUpperLip, pose);
    let inner_lo = shape.dense(InnerLowerLip, pose);
    cv.fill(&joined(&outer_up, &outer_lo), |_, _| lip);
    cv.fill(&joined(&inner_up, &inner_lo), |_, _| [0.12, 0.03, 0.05]);
    for line in [&outer_up, &outer_lo] {
        cv.stroke(line, 0.8, scaled(lip, 0.6));
    }

    if occlude {
        let target = [Anchor::LeftPupil, Anchor::RightPupil, Anchor::MouthCentre, On(NoseBase, 0.5)]
            [rng.random_range(0..4)];
        let c = pose.apply(shape.anchor(target));
        let (w, h) = (
            rng.random_range(0.6..1.0) * pose.scale,
            rng.random_range(0.4..0.7) * pose.scale,
        );
        let (cx, cy) = (c[0] + rng.random_range(-0.1..0.1) * pose.scale, c[1]);
        let rect = [[cx - w / 2.0, cy - h / 2.0], [cx + w / 2.0, cy - h / 2.0], [cx + w / 2.0, cy + h / 2.0], [cx - w / 2.0, cy + h / 2.0]];
        let col = random_colour(rng, 0.0, 1.0);
        let freq = rng.random_range(0.3..1.2);
        cv.fill(&rect, |x, y| {
            let v = 0.15 * ((x as f64 + y as f64) * freq).sin();
            [col[0] + v, col[1] + v, col[2] + v]
        });
    }

    if cfg.noise > 0.0 {
        let normal = Normal::new(0.0, cfg.noise).expect("valid noise");
        for p in &mut cv.px {
            for v in p.iter_mut() {
                *v += normal.sample(rng);
            }
        }
    }
    cv.into_tensor()
}

/// Whether sample `i` is occluded; spreads exactly `round(n * f)`-ish
/// occluders evenly over any prefix of the corpus.
fn occluded(i: usize, fraction: f64) -> bool {
    ((i + 1) as f64 * fraction).floor() > (i as f64 * fraction).floor()
}

fn generate_one(i: usize, seed: u64, layouts: &[(String, Vec<Anchor>)], cfg: &SynthConfig) -> SynthFace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64 + 1);
    let s = cfg.side as f64;
    let shape = FaceShape::random(&mut rng);
    let angle = rng.random_range(-cfg.max_rotation_deg..=cfg.max_rotation_deg).to_radians();
    let scale = 0.36 * s * (1.0 + rng.random_range(-cfg.scale_jitter..=cfg.scale_jitter));
    let pose = Pose {
        centre: [
            s / 2.0 + rng.random_range(-0.04..0.04) * s,
            s / 2.0 + rng.random_range(-0.04..0.04) * s,
        ],
        scale,
        cos: angle.cos(),
        sin: angle.sin(),
    };
    let occ = occluded(i, cfg.occlusion_fraction);
    let image = render(&shape, &pose, cfg.side, occ, cfg, &mut rng);

    let mut face_pts = shape.dense(Contour, &pose);
    face_pts.extend(shape.dense(LeftBrowUpper, &pose));
    face_pts.extend(shape.dense(RightBrowUpper, &pose));
    let bbox = BBox::enclosing(&face_pts);

    let mut landmarks = Vec::with_capacity(layouts.len());
    let mut clamped = Vec::with_capacity(layouts.len());
    for (id, layout) in layouts {
        let mut pts: Vec<[f64; 2]> = layout.iter().map(|&a| pose.apply(shape.anchor(a))).collect();
        clamped.push(clamp_landmarks(&mut pts, cfg.side));
        landmarks.push(LandmarkSet::new(id.clone(), pts, bbox));
    }
    SynthFace {
        image,
        landmarks,
        clamped,
        source_id: format!("synth-{seed}-{i:05}"),
        occluded: occ,
    }
}

/// `n` faces annotated under every scheme in `schemes`; deterministic in
/// `seed`, and face `i` does not depend on `n`.
pub fn synth_faces_multi(n: usize, seed: u64, schemes: &[&BoundaryScheme], cfg: &SynthConfig) -> Result<Vec<SynthFace>> {
    if n == 0 {
        return Err(Error::config("synthetic corpus needs n >= 1"));
    }
    if cfg.side < 16 || cfg.side % 4 != 0 {
        return Err(Error::config(format!("synthetic side must be a multiple of 4 and >= 16, got {}", cfg.side)));
    }
    if !(0.0..=1.0).contains(&cfg.occlusion_fraction) {
        return Err(Error::config("occlusion_fraction must lie in [0, 1]"));
    }
    let layouts = schemes
        .iter()
        .map(|s| {
            let a = anchors(&s.scheme_id)?;
            if a.len() != s.landmark_count {
                return Err(Error::config(format!("scheme `{}` layout size mismatch", s.scheme_id)));
            }
            Ok((s.scheme_id.clone(), a))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..n)
        .into_par_iter()
        .map(|i| generate_one(i, seed, &layouts, cfg))
        .collect())
}

pub fn synth_faces(n: usize, seed: u64, scheme: &BoundaryScheme, cfg: &SynthConfig) -> Result<Vec<Sample>> {
    Ok(synth_faces_multi(n, seed, &[scheme], cfg)?.iter().map(|f| f.sample(0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn scheme(id: &str) -> BoundaryScheme {
        BoundaryScheme::builtin(id).unwrap()
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let s = scheme("300w_68");
        let a = synth_faces(4, 7, &s, &SynthConfig::default()).unwrap();
        let b = synth_faces(4, 7, &s, &SynthConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = synth_faces(4, 8, &s, &SynthConfig::default()).unwrap();
        assert_ne!(a[0].image, c[0].image);
    }

    #[test]
    fn two_hundred_unique_ids_inside_the_image() {
        let s = scheme("300w_68");
        let cfg = SynthConfig { noise: 0.0, ..Default::default() };
        let faces = synth_faces(200, 1, &s, &cfg).unwrap();
        let ids: HashSet<_> = faces.iter().map(|f| f.source_id.clone()).collect();
        assert_eq!(ids.len(), 200);
        for f in &faces {
            assert!(f.clamped.is_empty(), "{} clamped {:?}", f.source_id, f.clamped);
            for p in &f.landmarks.points {
                assert!(p[0] >= 0.0 && p[0] < 64.0 && p[1] >= 0.0 && p[1] < 64.0);
            }
            assert!(f.image.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn every_builtin_scheme_has_a_layout() {
        for id in BoundaryScheme::builtin_ids() {
            let s = scheme(id);
            let faces = synth_faces(2, 3, &s, &SynthConfig::default()).unwrap();
            assert_eq!(faces[0].landmarks.len(), s.landmark_count);
        }
    }

    #[test]
    fn faces_do_not_depend_on_corpus_size() {
        let s = scheme("wflw_98");
        let cfg = SynthConfig::default();
        assert_eq!(synth_faces(3, 5, &s, &cfg).unwrap()[2], synth_faces(6, 5, &s, &cfg).unwrap()[2]);
    }

    #[test]
    fn occlusion_fraction_is_respected() {
        let s = scheme("300w_68");
        let cfg = SynthConfig { occlusion_fraction: 0.3, ..Default::default() };
        let faces = synth_faces_multi(100, 2, &[&s], &cfg).unwrap();
        assert_eq!(faces.iter().filter(|f| f.occluded).count(), 30);
    }

    #[test]
    fn shared_anchors_agree_across_schemes() {
        let (a, b) = (scheme("300w_68"), scheme("wflw_98"));
        let f = &synth_faces_multi(1, 9, &[&a, &b], &SynthConfig::default()).unwrap()[0];
        // Outer eye corners: 36/45 in the 68-point scheme, 60/72 in the 98-point one.
        assert_eq!(f.landmarks[0].points[36], f.landmarks[1].points[60]);
        assert_eq!(f.landmarks[0].points[45], f.landmarks[1].points[72]);
        assert_eq!(f.landmarks[0].points[8], f.landmarks[1].points[16]);
    }
}
