//! Dense `f64` arrays, the forward/backward kernels used by the auditors,
//! the logistic loss, AdamW, and a seeded RNG.

mod array;
pub mod gradcheck;
mod loss;
mod ops;
mod optim;
mod rng;

pub use array::DenseArray;
pub use loss::{bce_with_logits, bce_with_logits_mean, sigmoid};
pub use ops::{
    adaptive_avg_pool_backward, adaptive_avg_pool_forward, affine_backward, affine_forward,
    conv3x3_backward, conv3x3_forward, relu_backward, relu_forward, AffineGrads, ConvGrads,
};
pub use optim::{adamw_step, AdamState, AdamWConfig};
pub use rng::RngState;

/// Gradient buffers share [`DenseArray`]'s layout; shape always matches the
/// parameter they belong to.
pub type Gradient = DenseArray;
