use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tensor_file::{read_maud, write_maud, MaudTensor, TensorPayload};
use crate::error::{Error, Result};
use crate::numerics::DenseArray;

/// What an encoder emitted for one audio item, before aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawKind {
    /// Per-layer frame sequences, `L x T x D` floats.
    LayeredHidden {
        layers: usize,
        frames: usize,
        dim: usize,
    },
    /// Residual-quantizer code indices, `N_q x T` integers below `vocab`.
    CodebookCodes {
        codebooks: usize,
        frames: usize,
        vocab: u32,
    },
    /// One global embedding of `dim` floats.
    GlobalVector { dim: usize },
}

/// A raw encoder dump, kept in its stored representation so it can be
/// written back byte for byte.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEncoderOutput {
    kind: RawKind,
    tensor: MaudTensor,
}

impl RawEncoderOutput {
    /// Classify a stored tensor. `u32` tensors must be `N_q x T` codes; float
    /// tensors are global vectors (1-D), single-layer `T x D` sequences (2-D)
    /// or `L x T x D` layer stacks (3-D).
    pub fn from_tensor(tensor: MaudTensor) -> Result<Self> {
        let d = tensor.dims_usize();
        let kind = match (tensor.payload(), d.as_slice()) {
            (TensorPayload::U32 { codes, vocab }, &[codebooks, frames]) => {
                validate_codes(codes, codebooks, frames, *vocab)?;
                RawKind::CodebookCodes {
                    codebooks,
                    frames,
                    vocab: *vocab,
                }
            }
            (TensorPayload::U32 { .. }, _) => {
                return Err(Error::Format(format!(
                    "codebook tensors must be 2-D (N_q x T), got {d:?}"
                )))
            }
            (_, &[dim]) => RawKind::GlobalVector { dim },
            (_, &[frames, dim]) => RawKind::LayeredHidden {
                layers: 1,
                frames,
                dim,
            },
            (_, &[layers, frames, dim]) => RawKind::LayeredHidden {
                layers,
                frames,
                dim,
            },
            _ => {
                return Err(Error::Format(format!(
                    "4-D float tensor {d:?} is not an encoder output kind"
                )))
            }
        };
        Ok(RawEncoderOutput { kind, tensor })
    }

    pub fn layered(layers: usize, frames: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        Self::from_tensor(MaudTensor::from_f64(&[layers, frames, dim], values)?)
    }

    pub fn codebook(codebooks: usize, frames: usize, vocab: u32, codes: Vec<u32>) -> Result<Self> {
        let dims = vec![codebooks as u32, frames as u32];
        Self::from_tensor(MaudTensor::new(dims, TensorPayload::U32 { codes, vocab })?)
    }

    pub fn global(values: Vec<f64>) -> Result<Self> {
        Self::from_tensor(MaudTensor::from_f64(&[values.len()], values)?)
    }

    pub fn kind(&self) -> RawKind {
        self.kind
    }

    pub fn tensor(&self) -> &MaudTensor {
        &self.tensor
    }

    /// Float payload widened to `f64`; `None` for codebook dumps.
    pub fn float_values(&self) -> Option<Vec<f64>> {
        self.tensor.payload().to_f64()
    }

    pub fn codes(&self) -> Option<&[u32]> {
        match self.tensor.payload() {
            TensorPayload::U32 { codes, .. } => Some(codes),
            _ => None,
        }
    }
}

fn validate_codes(codes: &[u32], codebooks: usize, frames: usize, vocab: u32) -> Result<()> {
    for q in 0..codebooks {
        for t in 0..frames {
            let v = codes[q * frames + t];
            if v >= vocab {
                return Err(Error::Validation(format!(
                    "code {v} at codebook {q}, frame {t} is not below vocabulary size {vocab}"
                )));
            }
        }
    }
    Ok(())
}

pub fn read_tensor_file(path: impl AsRef<Path>) -> Result<RawEncoderOutput> {
    RawEncoderOutput::from_tensor(read_maud(path)?)
}

pub fn write_tensor_file(path: impl AsRef<Path>, raw: &RawEncoderOutput) -> Result<()> {
    write_maud(path, raw.tensor())
}

/// Shape of an auditor-ready embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingForm {
    Vector { dim: usize },
    Map { rows: usize, cols: usize },
}

impl EmbeddingForm {
    pub fn len(&self) -> usize {
        match *self {
            EmbeddingForm::Vector { dim } => dim,
            EmbeddingForm::Map { rows, cols } => rows * cols,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> Vec<usize> {
        match *self {
            EmbeddingForm::Vector { dim } => vec![dim],
            EmbeddingForm::Map { rows, cols } => vec![rows, cols],
        }
    }
}

impl fmt::Display for EmbeddingForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbeddingForm::Vector { dim } => write!(f, "vector({dim})"),
            EmbeddingForm::Map { rows, cols } => write!(f, "map({rows}x{cols})"),
        }
    }
}

/// Fixed-shape, finite representation of one audio item.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedEmbedding {
    form: EmbeddingForm,
    values: DenseArray,
    encoder_id: String,
}

impl AggregatedEmbedding {
    pub fn vector(values: Vec<f64>, encoder_id: &str) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Validation("empty embedding vector".into()));
        }
        let dim = values.len();
        Self::build(EmbeddingForm::Vector { dim }, vec![dim], values, encoder_id)
    }

    pub fn map(rows: usize, cols: usize, values: Vec<f64>, encoder_id: &str) -> Result<Self> {
        Self::build(
            EmbeddingForm::Map { rows, cols },
            vec![rows, cols],
            values,
            encoder_id,
        )
    }

    fn build(
        form: EmbeddingForm,
        dims: Vec<usize>,
        values: Vec<f64>,
        encoder_id: &str,
    ) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite embedding value {} at index {i}",
                values[i]
            )));
        }
        Ok(AggregatedEmbedding {
            form,
            values: DenseArray::new(dims, values)?,
            encoder_id: encoder_id.to_string(),
        })
    }

    pub fn form(&self) -> EmbeddingForm {
        self.form
    }

    pub fn values(&self) -> &DenseArray {
        &self.values
    }

    pub fn encoder_id(&self) -> &str {
        &self.encoder_id
    }

    /// A 1-row map seen as a plain vector; other forms unchanged.
    pub fn squeeze(self) -> Self {
        match self.form {
            EmbeddingForm::Map { rows: 1, cols } => AggregatedEmbedding {
                form: EmbeddingForm::Vector { dim: cols },
                values: self.values.reshape(vec![cols]).expect("same element count"),
                encoder_id: self.encoder_id,
            },
            _ => self,
        }
    }

    /// Stored as binary32: 1-D for vectors, 2-D for maps.
    pub fn to_tensor(&self) -> Result<MaudTensor> {
        MaudTensor::from_f64_as_f32(&self.form.dims(), self.values.data())
    }

    pub fn from_tensor(tensor: &MaudTensor, encoder_id: &str) -> Result<Self> {
        let values = tensor.payload().to_f64().ok_or_else(|| {
            Error::Format("aggregated embeddings must be float tensors".into())
        })?;
        match tensor.dims_usize().as_slice() {
            &[_] => Self::vector(values, encoder_id),
            &[rows, cols] => Self::map(rows, cols, values, encoder_id),
            other => Err(Error::Format(format!(
                "aggregated embeddings are 1-D or 2-D, got {other:?}"
            ))),
        }
    }
}
