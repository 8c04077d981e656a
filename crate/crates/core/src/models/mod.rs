//! The estimator, regressor and discriminator networks.

mod checkpoint;
mod discriminator;
mod estimator;
pub mod layers;
mod message;
mod regressor;

pub use checkpoint::{Checkpoint, NamedTensor, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use discriminator::{Discriminator, DiscriminatorConfig};
pub use estimator::{Estimator, EstimatorConfig, EstimatorOutput};
pub use message::{MessagePassing, MessageTree};
pub use regressor::{
    gate_features, input_fusion, resize_pow2, FusionKind, FusionLevel, Regressor, RegressorConfig, RegressorHead,
};
