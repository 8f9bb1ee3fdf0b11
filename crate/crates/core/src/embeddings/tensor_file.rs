//! MAUD binary tensor files.
//!
//! Layout, all little-endian:
//!
//! | bytes          | field                                              |
//! |----------------|----------------------------------------------------|
//! | 4              | magic `MAUD`                                       |
//! | 2              | version, `u16`, always 1                           |
//! | 1              | dtype: 0 = binary32, 1 = `u32`, 2 = binary64       |
//! | 1              | ndim, 1..=4                                        |
//! | 4 * ndim       | extents, `u32` each                                |
//! | payload        | row-major elements                                 |
//! | 4 (dtype 1)    | trailing vocabulary size `V`, `u32`                |
//!
//! dtype 2 is used for auditor checkpoints, where parameters must survive a
//! round trip without losing precision.

use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MAUD";
pub const VERSION: u16 = 1;
const HEADER_FIXED: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32 = 0,
    U32 = 1,
    F64 = 2,
}

impl Dtype {
    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Dtype::F32),
            1 => Ok(Dtype::U32),
            2 => Ok(Dtype::F64),
            other => Err(Error::UnsupportedFormat(format!("MAUD dtype {other}"))),
        }
    }

    fn width(self) -> usize {
        match self {
            Dtype::F32 | Dtype::U32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorPayload {
    F32(Vec<f32>),
    U32 { codes: Vec<u32>, vocab: u32 },
    F64(Vec<f64>),
}

impl TensorPayload {
    pub fn dtype(&self) -> Dtype {
        match self {
            TensorPayload::F32(_) => Dtype::F32,
            TensorPayload::U32 { .. } => Dtype::U32,
            TensorPayload::F64(_) => Dtype::F64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorPayload::F32(v) => v.len(),
            TensorPayload::U32 { codes, .. } => codes.len(),
            TensorPayload::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Float payloads widened to `f64`; `None` for integer codes.
    pub fn to_f64(&self) -> Option<Vec<f64>> {
        match self {
            TensorPayload::F32(v) => Some(v.iter().map(|&x| x as f64).collect()),
            TensorPayload::F64(v) => Some(v.clone()),
            TensorPayload::U32 { .. } => None,
        }
    }
}

/// A tensor exactly as stored in a MAUD file.
#[derive(Debug, Clone, PartialEq)]
pub struct MaudTensor {
    dims: Vec<u32>,
    payload: TensorPayload,
}

impl MaudTensor {
    pub fn new(dims: Vec<u32>, payload: TensorPayload) -> Result<Self> {
        if dims.is_empty() || dims.len() > 4 {
            return Err(Error::Format(format!(
                "MAUD tensors have 1 to 4 dimensions, got {}",
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::Format(format!("zero extent in {dims:?}")));
        }
        let count = element_count(&dims)?;
        if count != payload.len() as u64 {
            return Err(Error::Corruption {
                message: format!("payload length does not match extents {dims:?}"),
                expected: count * payload.dtype().width() as u64,
                actual: (payload.len() * payload.dtype().width()) as u64,
            });
        }
        Ok(MaudTensor { dims, payload })
    }

    pub fn from_f64(dims: &[usize], values: Vec<f64>) -> Result<Self> {
        Self::new(to_u32_dims(dims)?, TensorPayload::F64(values))
    }

    /// Narrow to binary32 storage.
    pub fn from_f64_as_f32(dims: &[usize], values: &[f64]) -> Result<Self> {
        Self::new(
            to_u32_dims(dims)?,
            TensorPayload::F32(values.iter().map(|&v| v as f32).collect()),
        )
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn dims_usize(&self) -> Vec<usize> {
        self.dims.iter().map(|&d| d as usize).collect()
    }

    pub fn payload(&self) -> &TensorPayload {
        &self.payload
    }

    pub fn into_payload(self) -> TensorPayload {
        self.payload
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let width = self.payload.dtype().width();
        let mut out =
            Vec::with_capacity(HEADER_FIXED + 4 * self.dims.len() + width * self.payload.len() + 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.payload.dtype() as u8);
        out.push(self.dims.len() as u8);
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        match &self.payload {
            TensorPayload::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorPayload::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorPayload::U32 { codes, vocab } => {
                codes.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
                out.extend_from_slice(&vocab.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::Format("bad magic, not a MAUD file".into()));
        }
        if bytes.len() < HEADER_FIXED {
            return Err(Error::Corruption {
                message: "truncated header".into(),
                expected: HEADER_FIXED as u64,
                actual: bytes.len() as u64,
            });
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported MAUD version {version}")));
        }
        let dtype = Dtype::from_code(bytes[6])?;
        let ndim = bytes[7] as usize;
        if !(1..=4).contains(&ndim) {
            return Err(Error::Format(format!("ndim {ndim} outside 1..=4")));
        }
        let header = HEADER_FIXED + 4 * ndim;
        if bytes.len() < header {
            return Err(Error::Corruption {
                message: "truncated extents".into(),
                expected: header as u64,
                actual: bytes.len() as u64,
            });
        }
        let dims: Vec<u32> = bytes[HEADER_FIXED..header]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if dims.contains(&0) {
            return Err(Error::Format(format!("zero extent in {dims:?}")));
        }
        let count = element_count(&dims)?;
        let trailer = if dtype == Dtype::U32 { 4 } else { 0 };
        let expected = count
            .checked_mul(dtype.width() as u64)
            .and_then(|p| p.checked_add((header + trailer) as u64))
            .ok_or_else(|| Error::Corruption {
                message: format!("extents {dims:?} overflow the addressable size"),
                expected: u64::MAX,
                actual: bytes.len() as u64,
            })?;
        if expected != bytes.len() as u64 {
            return Err(Error::Corruption {
                message: format!("file size does not match extents {dims:?}"),
                expected,
                actual: bytes.len() as u64,
            });
        }
        let body = &bytes[header..bytes.len() - trailer];
        let payload = match dtype {
            Dtype::F32 => TensorPayload::F32(
                body.chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            ),
            Dtype::F64 => TensorPayload::F64(
                body.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                    .collect(),
            ),
            Dtype::U32 => {
                let t = &bytes[bytes.len() - 4..];
                TensorPayload::U32 {
                    codes: body
                        .chunks_exact(4)
                        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                        .collect(),
                    vocab: u32::from_le_bytes([t[0], t[1], t[2], t[3]]),
                }
            }
        };
        MaudTensor::new(dims, payload)
    }
}

fn element_count(dims: &[u32]) -> Result<u64> {
    dims.iter().try_fold(1u64, |acc, &d| {
        acc.checked_mul(d as u64).ok_or_else(|| Error::Corruption {
            message: format!("extent product overflows for {dims:?}"),
            expected: u64::MAX,
            actual: 0,
        })
    })
}

fn to_u32_dims(dims: &[usize]) -> Result<Vec<u32>> {
    dims.iter()
        .map(|&d| {
            u32::try_from(d).map_err(|_| Error::Format(format!("extent {d} does not fit in u32")))
        })
        .collect()
}

pub fn read_maud(path: impl AsRef<Path>) -> Result<MaudTensor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    MaudTensor::from_bytes(&bytes)
}

pub fn write_maud(path: impl AsRef<Path>, tensor: &MaudTensor) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, tensor.to_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn round_trip_2x3x4() {
        let values: Vec<f32> = (0..24).map(|i| i as f32 * 0.5 - 3.0).collect();
        let t = MaudTensor::new(vec![2, 3, 4], TensorPayload::F32(values.clone())).unwrap();
        let back = MaudTensor::from_bytes(&t.to_bytes()).unwrap();
        assert_eq!(back.dims(), &[2, 3, 4]);
        assert_eq!(back.payload(), &TensorPayload::F32(values));
    }

    #[test]
    fn header_layout_is_exact() {
        let t = MaudTensor::new(
            vec![1, 2],
            TensorPayload::U32 {
                codes: vec![7, 9],
                vocab: 1024,
            },
        )
        .unwrap();
        let b = t.to_bytes();
        assert_eq!(&b[..4], b"MAUD");
        assert_eq!(&b[4..8], &[1, 0, 1, 2]);
        assert_eq!(&b[8..16], &[1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&b[16..24], &[7, 0, 0, 0, 9, 0, 0, 0]);
        assert_eq!(&b[24..], &1024u32.to_le_bytes());
    }

    #[test]
    fn truncated_payload_is_corruption() {
        let t = MaudTensor::from_f64_as_f32(&[4, 4], &[1.0; 16]).unwrap();
        let mut b = t.to_bytes();
        b.truncate(b.len() - 5);
        match MaudTensor::from_bytes(&b).unwrap_err() {
            Error::Corruption {
                expected, actual, ..
            } => {
                assert_eq!(expected, 8 + 8 + 64);
                assert_eq!(actual, 8 + 8 + 59);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn bad_magic_and_header_fields() {
        assert!(matches!(MaudTensor::from_bytes(b"MAUX\x01\x00\x00\x01"), Err(Error::Format(_))));
        assert!(matches!(MaudTensor::from_bytes(b"MA"), Err(Error::Format(_))));
        assert!(matches!(
            MaudTensor::from_bytes(b"MAUD\x01\x00\x07\x01\x01\x00\x00\x00"),
            Err(Error::UnsupportedFormat(_))
        ));
        assert!(matches!(
            MaudTensor::from_bytes(b"MAUD\x01\x00\x00\x05"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            MaudTensor::from_bytes(b"MAUD\x02\x00\x00\x01\x01\x00\x00\x00\x00\x00\x00\x00"),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn huge_extents_do_not_allocate() {
        let mut b = b"MAUD\x01\x00\x02\x04".to_vec();
        for _ in 0..4 {
            b.extend_from_slice(&u32::MAX.to_le_bytes());
        }
        assert!(matches!(MaudTensor::from_bytes(&b), Err(Error::Corruption { .. })));
    }

    fn arb_tensor() -> impl Strategy<Value = MaudTensor> {
        (prop::collection::vec(1u32..5, 1..=4), 0u8..3).prop_flat_map(|(dims, dtype)| {
            let n: usize = dims.iter().map(|&d| d as usize).product();
            let payload = match dtype {
                0 => prop::collection::vec(any::<u32>(), n)
                    .prop_map(|v| TensorPayload::F32(v.into_iter().map(f32::from_bits).collect()))
                    .boxed(),
                1 => (prop::collection::vec(0u32..1000, n), 1000u32..2000)
                    .prop_map(|(codes, vocab)| TensorPayload::U32 { codes, vocab })
                    .boxed(),
                _ => prop::collection::vec(any::<u64>(), n)
                    .prop_map(|v| TensorPayload::F64(v.into_iter().map(f64::from_bits).collect()))
                    .boxed(),
            };
            payload.prop_map(move |p| MaudTensor::new(dims.clone(), p).unwrap())
        })
    }

    proptest! {
        #[test]
        fn bytes_round_trip_exactly(t in arb_tensor()) {
            let bytes = t.to_bytes();
            let back = MaudTensor::from_bytes(&bytes).unwrap();
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}
