//! Black-box membership auditing for generative music models.
//!
//! Given a candidate track and the generation a deployed model produces from
//! the track's caption, an auditor trained on shadow models decides whether
//! the track was part of the model's training data. The crate contains every
//! stage of that pipeline:
//!
//! * [`numerics`]: dense arrays, forward/backward kernels, AdamW, seeded RNG
//! * [`audio_io`]: WAV decoding, mono downmix, resampling, a reference encoder
//! * [`embeddings`]: the MAUD tensor format, aggregation, manifests, pairing
//! * [`synthworld`]: a seeded simulator of shadow/target generators
//! * [`auditor`]: pair features, MLP/CNN auditors, training, checkpoints
//! * [`evaluation`]: metrics and the leave-one-out, transfer and ablation protocols
//! * [`config`]: experiment configuration and its reproducibility hash
//! * [`pipeline`]: the synthesize, ingest, train, evaluate and audit steps

pub mod audio_io;
pub mod auditor;
pub mod config;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod numerics;
pub mod pipeline;
pub mod synthworld;

pub use error::{Error, ErrorKind, Result};
