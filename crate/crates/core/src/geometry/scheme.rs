use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of facial boundary lines shared by every annotation scheme.
pub const NUM_BOUNDARIES: usize = 13;

/// The thirteen boundary names, in the canonical channel order used by
/// heatmap stacks, estimator branches and the message-passing tree.
pub const BOUNDARY_NAMES: [&str; NUM_BOUNDARIES] = [
    "facial_outer_contour",
    "left_eyebrow",
    "right_eyebrow",
    "nose_bridge",
    "nose_boundary",
    "left_upper_eyelid",
    "left_lower_eyelid",
    "right_upper_eyelid",
    "right_lower_eyelid",
    "upper_side_of_upper_lip",
    "lower_side_of_upper_lip",
    "upper_side_of_lower_lip",
    "lower_side_of_lower_lip",
];

const BUILTIN: [(&str, &str); 4] = [
    ("300w_68", include_str!("../../schemes/scheme_300w_68.json")),
    ("wflw_98", include_str!("../../schemes/scheme_wflw_98.json")),
    ("cofw_29", include_str!("../../schemes/scheme_cofw_29.json")),
    ("aflw_19", include_str!("../../schemes/scheme_aflw_19.json")),
];

/// One boundary: the ordered landmark subset interpolated into a line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryDef {
    pub name: String,
    pub indices: Vec<usize>,
    #[serde(default)]
    pub closed: bool,
}

/// Landmark indices used by the error normalisers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationIndices {
    /// Outer eye corners.
    pub inter_ocular: [usize; 2],
    /// Landmarks whose centroid is the left eye centre.
    pub left_pupil: Vec<usize>,
    pub right_pupil: Vec<usize>,
}

/// A dataset's landmark convention expressed as the thirteen boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryScheme {
    pub scheme_id: String,
    pub landmark_count: usize,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub boundaries: Vec<BoundaryDef>,
    pub normalization: NormalizationIndices,
}

impl BoundaryScheme {
    pub fn from_json(text: &str) -> Result<Self> {
        let scheme: Self = serde_json::from_str(text)?;
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// One of the shipped schemes: `300w_68`, `wflw_98`, `cofw_29`, `aflw_19`.
    pub fn builtin(id: &str) -> Result<Self> {
        let (_, text) = BUILTIN
            .iter()
            .find(|(k, _)| *k == id)
            .ok_or_else(|| Error::config(format!("unknown scheme `{id}`")))?;
        Self::from_json(text)
    }

    pub fn builtin_ids() -> impl Iterator<Item = &'static str> {
        BUILTIN.iter().map(|(k, _)| *k)
    }

    /// A built-in id, or else a path to a scheme file.
    pub fn resolve(id_or_path: &str) -> Result<Self> {
        if BUILTIN.iter().any(|(k, _)| *k == id_or_path) {
            Self::builtin(id_or_path)
        } else if std::path::Path::new(id_or_path).exists() {
            Self::load(id_or_path)
        } else {
            let known: Vec<_> = Self::builtin_ids().collect();
            Err(Error::config(format!("unknown scheme `{id_or_path}` (builtins: {}; or a scheme file path)", known.join(", "))))
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn num_boundaries(&self) -> usize {
        self.boundaries.len()
    }

    pub fn boundary_names(&self) -> Vec<&str> {
        self.boundaries.iter().map(|b| b.name.as_str()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::config(format!("scheme `{}`: {m}", self.scheme_id)));
        if self.boundaries.len() != NUM_BOUNDARIES {
            return err(format!("{} boundaries, expected {NUM_BOUNDARIES}", self.boundaries.len()));
        }
        for (b, expected) in self.boundaries.iter().zip(BOUNDARY_NAMES) {
            if b.name != expected {
                return err(format!("boundary `{}` where `{expected}` was expected", b.name));
            }
            if b.indices.len() < 2 {
                return err(format!("boundary `{}` has fewer than 2 landmarks", b.name));
            }
            if let Some(&i) = b.indices.iter().find(|&&i| i >= self.landmark_count) {
                return err(format!("boundary `{}` references landmark {i} of {}", b.name, self.landmark_count));
            }
        }
        let n = &self.normalization;
        let all = n.inter_ocular.iter().chain(&n.left_pupil).chain(&n.right_pupil);
        if n.left_pupil.is_empty() || n.right_pupil.is_empty() {
            return err("pupil groups must be non-empty".into());
        }
        if let Some(&i) = all.into_iter().find(|&&i| i >= self.landmark_count) {
            return err(format!("normalisation references landmark {i}"));
        }
        Ok(())
    }
}

/// Axis-aligned face box in image pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    /// Tight box around a point set.
    pub fn enclosing(points: &[[f64; 2]]) -> Self {
        let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
        let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            x0 = x0.min(p[0]);
            y0 = y0.min(p[1]);
            x1 = x1.max(p[0]);
            y1 = y1.max(p[1]);
        }
        Self::new(x0, y0, x1 - x0, y1 - y0)
    }

    pub fn center(&self) -> [f64; 2] {
        [self.x + self.w / 2.0, self.y + self.h / 2.0]
    }
}

/// L landmark positions (image pixels, pixel centres at integer coordinates)
/// in a named scheme, with the face box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet {
    pub scheme_id: String,
    pub points: Vec<[f64; 2]>,
    pub bbox: BBox,
}

impl LandmarkSet {
    pub fn new(scheme_id: impl Into<String>, points: Vec<[f64; 2]>, bbox: BBox) -> Self {
        Self {
            scheme_id: scheme_id.into(),
            points,
            bbox,
        }
    }

    /// Landmarks whose box is their own tight extent.
    pub fn with_tight_bbox(scheme_id: impl Into<String>, points: Vec<[f64; 2]>) -> Self {
        let bbox = BBox::enclosing(&points);
        Self::new(scheme_id, points, bbox)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate_for(&self, scheme: &BoundaryScheme) -> Result<()> {
        if self.points.len() != scheme.landmark_count {
            return Err(Error::Data(format!(
                "scheme `{}` expects {} landmarks, got {}",
                scheme.scheme_id,
                scheme.landmark_count,
                self.points.len()
            )));
        }
        if self.points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite landmark coordinate".into()));
        }
        Ok(())
    }

    /// Every coordinate multiplied by `factor` (box included).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            scheme_id: self.scheme_id.clone(),
            points: self.points.iter().map(|p| [p[0] * factor, p[1] * factor]).collect(),
            bbox: BBox::new(
                self.bbox.x * factor,
                self.bbox.y * factor,
                self.bbox.w * factor,
                self.bbox.h * factor,
            ),
        }
    }

    /// Interleaved `x0, y0, x1, y1, ...` divided by the image side.
    pub fn to_normalized(&self, side: f64) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p[0] / side, p[1] / side]).collect()
    }

    /// Inverse of [`LandmarkSet::to_normalized`]; the box is taken from `like`.
    pub fn from_normalized(coords: &[f64], side: f64, like: &LandmarkSet) -> Self {
        let points = coords.chunks_exact(2).map(|c| [c[0] * side, c[1] * side]).collect();
        Self::new(like.scheme_id.clone(), points, like.bbox)
    }
}
