//! Encoder outputs in, auditor-ready pairs out.
//!
//! Raw encoder dumps arrive as MAUD tensor files and are collapsed by one of
//! three aggregations (temporal mean per layer, per-codebook histogram, or
//! identity). A [`DatasetManifest`] ties items to roles and pairs, and
//! [`build_pairs`] joins originals with their generations.

mod aggregate;
mod manifest;
mod pairs;
mod store;
pub mod tensor_file;
mod types;

pub use aggregate::{
    aggregate_codebook_histogram, aggregate_identity, aggregate_mean_over_time, Aggregation,
};
pub use manifest::{DatasetManifest, ManifestRecord, Role};
pub use pairs::{build_pairs, PairExample};
pub use store::{check_item_id, EmbeddingStore, StoreMeta, EMBEDDINGS_DIR, MANIFEST_FILE, META_FILE};
pub use tensor_file::{read_maud, write_maud, Dtype, MaudTensor, TensorPayload};
pub use types::{
    read_tensor_file, write_tensor_file, AggregatedEmbedding, EmbeddingForm, RawEncoderOutput,
    RawKind,
};
