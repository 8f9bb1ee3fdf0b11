//! The membership auditor: pair features, the two classifier backbones,
//! training and checkpoints.

mod checkpoint;
mod features;
mod model;
mod train;

pub use checkpoint::{Checkpoint, CheckpointHeader, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use features::{pair_feature_map, pair_feature_vector};
pub use model::{score, Architecture, AuditorParams, Standardizer, CNN_CHANNELS, MLP_HIDDEN};
pub use train::{train, EpochRecord, TrainConfig, TrainingLog};

pub use crate::embeddings::PairExample;

/// Default decision threshold on the membership score.
pub const DEFAULT_THRESHOLD: f64 = 0.5;
