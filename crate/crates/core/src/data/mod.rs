//! Annotation parsers, manifests, cropping and the synthetic face corpus.

mod aflw;
mod crop;
mod image_io;
mod manifest;
mod pts;
mod synth;
mod wflw;

use serde::{Deserialize, Serialize};

use crate::geometry::LandmarkSet;
use crate::Tensor;

pub use aflw::{parse_aflw_csv, AflwRecord};
pub use crop::{clamp_landmarks, crop_sample, warp_image, CropTransform, DEFAULT_EXPAND};
pub use image_io::{load_image, save_gray_png, save_rgb_png};
pub use manifest::{DatasetManifest, InlineAnnotation, ManifestItem, Split};
pub use pts::{parse_pts, parse_pts_bytes, write_pts};
pub use synth::{synth_faces, synth_faces_multi, SynthConfig, SynthFace};
pub use wflw::{parse_wflw_file, parse_wflw_line, WflwRecord, WFLW_ATTRIBUTES, WFLW_FIELDS, WFLW_LANDMARKS};

/// A cropped face ready for the networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// `[3, S, S]`, values in `[0, 1]`.
    pub image: Tensor,
    /// Crop-frame pixel coordinates.
    pub landmarks: LandmarkSet,
    pub source_id: String,
    /// Landmarks that fell outside the crop and were clamped to its border.
    pub clamped: Vec<usize>,
}

impl Sample {
    pub fn side(&self) -> usize {
        self.image.shape()[2]
    }
}
