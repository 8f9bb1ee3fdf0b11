//! Trained-auditor files.
//!
//! Layout (little-endian):
//!
//! ```text
//! "MACK" | version u16 | header_len u32 | header JSON (UTF-8)
//! tensor_count u32 | { byte_len u64 | MAUD tensor bytes } * tensor_count
//! ```
//!
//! Parameter tensors are stored as binary64 MAUD arrays in model order. A
//! standardized model appends the frozen mean and scale vectors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Architecture, AuditorParams, Standardizer};
use super::train::TrainConfig;
use crate::embeddings::tensor_file::{MaudTensor, TensorPayload};
use crate::embeddings::EmbeddingForm;
use crate::error::{Error, Result};
use crate::numerics::DenseArray;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MACK";
pub const CHECKPOINT_VERSION: u16 = 1;

/// Provenance stored alongside the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub architecture: Architecture,
    pub input: EmbeddingForm,
    pub train_config: TrainConfig,
    pub seed: u64,
    pub encoder_id: String,
    pub aggregation: String,
    pub training_generators: Vec<String>,
    pub config_hash: Option<String>,
    pub best_epoch: usize,
    pub best_val_loss: Option<f64>,
    pub tensor_names: Vec<String>,
    pub standardized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: AuditorParams,
}

impl Checkpoint {
    /// Fills the structural header fields from `params`; provenance fields
    /// start empty.
    pub fn new(params: AuditorParams, train_config: TrainConfig) -> Self {
        let header = CheckpointHeader {
            architecture: params.architecture(),
            input: params.input_form(),
            train_config,
            seed: train_config.seed,
            encoder_id: String::new(),
            aggregation: String::new(),
            training_generators: Vec::new(),
            config_hash: None,
            best_epoch: 0,
            best_val_loss: None,
            tensor_names: params.tensor_names().iter().map(|s| s.to_string()).collect(),
            standardized: params.standardizer().is_some(),
        };
        Checkpoint { header, params }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let mut tensors: Vec<MaudTensor> = self
            .params
            .tensors()
            .iter()
            .map(|t| MaudTensor::from_f64(t.dims(), t.data().to_vec()))
            .collect::<Result<_>>()?;
        if let Some(s) = self.params.standardizer() {
            tensors.push(MaudTensor::from_f64(&[s.mean.len()], s.mean.clone())?);
            tensors.push(MaudTensor::from_f64(&[s.scale.len()], s.scale.clone())?);
        }
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for t in &tensors {
            let bytes = t.to_bytes();
            out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
            out.extend_from_slice(&bytes);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Format("not an auditor checkpoint (bad magic)".into()));
        }
        let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let header_len = r.u32()? as usize;
        let header: CheckpointHeader = serde_json::from_slice(r.take(header_len)?)?;
        let count = r.u32()? as usize;
        let mut arrays = Vec::with_capacity(count.min(64));
        for i in 0..count {
            let len = u64::from_le_bytes(r.take(8)?.try_into().unwrap());
            let len = usize::try_from(len)
                .map_err(|_| Error::Format(format!("tensor {i} length overflows")))?;
            let tensor = MaudTensor::from_bytes(r.take(len)?)?;
            let dims = tensor.dims_usize();
            let values = match tensor.into_payload() {
                TensorPayload::F64(v) => v,
                _ => {
                    return Err(Error::Format(format!(
                        "checkpoint tensor {i} is not binary64"
                    )))
                }
            };
            arrays.push(DenseArray::new(dims, values)?);
        }
        if r.pos != bytes.len() {
            return Err(Error::Corruption {
                message: "trailing bytes after the last checkpoint tensor".into(),
                expected: r.pos as u64,
                actual: bytes.len() as u64,
            });
        }
        let standardizer = if header.standardized {
            if arrays.len() < 2 {
                return Err(Error::Format("standardized checkpoint lacks its scaler".into()));
            }
            let scale = arrays.pop().unwrap().into_data();
            let mean = arrays.pop().unwrap().into_data();
            Some(Standardizer { mean, scale })
        } else {
            None
        };
        let params =
            AuditorParams::from_parts(header.architecture, header.input, arrays, standardizer)?;
        if params.tensor_names() != header.tensor_names.as_slice() {
            return Err(Error::Format(format!(
                "tensor names {:?} do not match the {} layout",
                header.tensor_names, header.architecture
            )));
        }
        Ok(Checkpoint { header, params })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Corruption {
                message: format!("checkpoint truncated at byte {}", self.pos),
                expected: self.pos as u64 + n as u64,
                actual: self.bytes.len() as u64,
            }),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngState;

    fn sample(form: EmbeddingForm, seed: u64, standardized: bool) -> Checkpoint {
        let mut rng = RngState::new(seed);
        let mut params = AuditorParams::init(Architecture::for_form(form), form, &mut rng).unwrap();
        if standardized {
            let w = 2 * form.len();
            params.set_standardizer(Some(Standardizer {
                mean: (0..w).map(|_| rng.normal()).collect(),
                scale: (0..w).map(|_| rng.uniform(0.5, 2.0)).collect(),
            }));
        }
        let mut ck = Checkpoint::new(params, TrainConfig::default());
        ck.header.encoder_id = "sim".into();
        ck.header.training_generators = vec!["gen-a".into(), "gen-b".into()];
        ck.header.best_val_loss = Some(0.25);
        ck
    }

    #[test]
    fn round_trip_is_byte_identical() {
        for (form, std) in [
            (EmbeddingForm::Vector { dim: 3 }, false),
            (EmbeddingForm::Vector { dim: 5 }, true),
            (EmbeddingForm::Map { rows: 2, cols: 3 }, false),
        ] {
            let ck = sample(form, 9, std);
            let bytes = ck.to_bytes().unwrap();
            let back = Checkpoint::from_bytes(&bytes).unwrap();
            assert_eq!(back, ck);
            assert_eq!(back.to_bytes().unwrap(), bytes);
        }
    }

    #[test]
    fn truncation_and_magic_are_detected() {
        let bytes = sample(EmbeddingForm::Vector { dim: 2 }, 1, false).to_bytes().unwrap();
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::Corruption { .. })
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::Format(_))));
        let mut extra = bytes;
        extra.push(0);
        assert!(matches!(Checkpoint::from_bytes(&extra), Err(Error::Corruption { .. })));
    }
}
