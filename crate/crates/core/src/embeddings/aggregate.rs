//! Collapsing variable-length encoder output into fixed-shape embeddings.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::types::{AggregatedEmbedding, RawEncoderOutput, RawKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Per-layer temporal mean, `L x T x D -> L x D`.
    MeanOverTime,
    /// Per-codebook normalized code histogram, `N_q x T -> N_q * V`.
    CodebookHistogram,
    /// Global vectors pass through unchanged.
    Identity,
}

impl Aggregation {
    pub fn apply(self, raw: &RawEncoderOutput, encoder_id: &str) -> Result<AggregatedEmbedding> {
        match self {
            Aggregation::MeanOverTime => aggregate_mean_over_time(raw, encoder_id),
            Aggregation::CodebookHistogram => aggregate_codebook_histogram(raw, encoder_id),
            Aggregation::Identity => aggregate_identity(raw, encoder_id),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::MeanOverTime => "mean-over-time",
            Aggregation::CodebookHistogram => "codebook-histogram",
            Aggregation::Identity => "identity",
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean-over-time" => Ok(Aggregation::MeanOverTime),
            "codebook-histogram" => Ok(Aggregation::CodebookHistogram),
            "identity" => Ok(Aggregation::Identity),
            other => Err(Error::Validation(format!(
                "unknown aggregation '{other}' (expected mean-over-time, codebook-histogram or identity)"
            ))),
        }
    }
}

fn wrong_kind(op: &str, kind: RawKind) -> Error {
    Error::Validation(format!("{op} cannot aggregate {kind:?}"))
}

/// `out[l, d] = mean_t raw[l, t, d]`; the output shape does not depend on `T`.
pub fn aggregate_mean_over_time(
    raw: &RawEncoderOutput,
    encoder_id: &str,
) -> Result<AggregatedEmbedding> {
    let RawKind::LayeredHidden {
        layers,
        frames,
        dim,
    } = raw.kind()
    else {
        return Err(wrong_kind("mean-over-time", raw.kind()));
    };
    let values = raw.float_values().expect("layered outputs are float");
    let mut out = vec![0.0; layers * dim];
    for l in 0..layers {
        let acc = &mut out[l * dim..(l + 1) * dim];
        for t in 0..frames {
            let frame = &values[(l * frames + t) * dim..][..dim];
            for (a, v) in acc.iter_mut().zip(frame) {
                *a += v;
            }
        }
        acc.iter_mut().for_each(|a| *a /= frames as f64);
    }
    AggregatedEmbedding::map(layers, dim, out, encoder_id)
}

/// Normalized histogram of code indices per codebook, concatenated in
/// codebook order. Each block sums to one.
pub fn aggregate_codebook_histogram(
    raw: &RawEncoderOutput,
    encoder_id: &str,
) -> Result<AggregatedEmbedding> {
    let RawKind::CodebookCodes {
        codebooks,
        frames,
        vocab,
    } = raw.kind()
    else {
        return Err(wrong_kind("codebook-histogram", raw.kind()));
    };
    let codes = raw.codes().expect("codebook outputs carry codes");
    let v = vocab as usize;
    let mut counts = vec![0u64; codebooks * v];
    for q in 0..codebooks {
        for t in 0..frames {
            let c = codes[q * frames + t];
            if c >= vocab {
                return Err(Error::Validation(format!(
                    "code {c} at codebook {q}, frame {t} is not below vocabulary size {vocab}"
                )));
            }
            counts[q * v + c as usize] += 1;
        }
    }
    let values = counts
        .into_iter()
        .map(|c| c as f64 / frames as f64)
        .collect();
    AggregatedEmbedding::vector(values, encoder_id)
}

pub fn aggregate_identity(raw: &RawEncoderOutput, encoder_id: &str) -> Result<AggregatedEmbedding> {
    let RawKind::GlobalVector { .. } = raw.kind() else {
        return Err(wrong_kind("identity", raw.kind()));
    };
    AggregatedEmbedding::vector(raw.float_values().expect("global outputs are float"), encoder_id)
}
