//! Boundary-aware face alignment at desk scale.
//!
//! Landmarks are turned into thirteen facial-boundary heatmaps, a stacked
//! hourglass estimator learns to predict those heatmaps from the image, and
//! a landmark regressor fuses them at its input and at every stage. The
//! estimator, regressor and a landmark-based effectiveness discriminator are
//! trained with alternating updates.
//!
//! Module map:
//!
//! * [`tensor`] – dense arrays and reverse-mode differentiation.
//! * [`geometry`] – boundary schemes, spline interpolation, rasterisation,
//!   exact distance transform and heatmap generation.
//! * [`data`] – annotation parsers, cropping and the procedural face corpus.
//! * [`models`] – estimator, regressor, discriminator and checkpoints.
//! * [`train`] – losses, effectiveness labels and the alternating loop.
//! * [`eval`] – NME, CED, AUC, failure rate and report writers.
//! * [`bridge`] – cross-scheme estimator/regressor pairing.
//! * [`ablation`] – named component variants.

pub mod ablation;
pub mod bridge;
pub mod data;
pub mod eval;
pub mod error;
pub mod geometry;
pub mod io;
pub mod models;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
