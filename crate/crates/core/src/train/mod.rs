//! Objectives, effectiveness labels, datasets and the training loop.

mod config;
mod dataset;
mod labels;
mod losses;
mod trainer;

pub use config::{HeatmapSource, TrainConfig};
pub use dataset::{Batch, Dataset, PreparedSample};
pub use labels::{fake_label, LabelRule};
pub use losses::{
    effectiveness_term, loss_adversarial, loss_discriminator, loss_discriminator_fake, loss_discriminator_real,
    loss_heatmap, loss_regression,
};
pub use trainer::{train, EpochRecord, Pipeline, StepLosses, TrainReport, Trainer};
