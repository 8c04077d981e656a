//! Landmarks to ground-truth boundary heatmaps: interpolate each boundary's
//! landmark subset, rasterise it, take the exact distance transform and map
//! distances through a truncated Gaussian.

mod distance;
mod heatmap;
mod raster;
mod scheme;
mod spline;

pub use distance::{distance_transform, DistanceMap};
pub use heatmap::{
    boundary_distance_maps, boundary_polylines, default_sigma, generate_heatmaps, heatmap_from_distance, HeatmapStack,
};
pub use raster::{rasterize, BinaryMap};
pub use scheme::{BBox, BoundaryDef, BoundaryScheme, LandmarkSet, NormalizationIndices, BOUNDARY_NAMES, NUM_BOUNDARIES};
pub use spline::{catmull_rom, interpolate_boundary, DEFAULT_DENSITY};
