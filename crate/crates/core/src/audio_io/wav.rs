//! Minimal RIFF/WAVE reader: PCM 16/32-bit integer and 32-bit float.

use std::path::Path;

use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 0x0001;
const FORMAT_FLOAT: u16 = 0x0003;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Decoded multi-channel audio, one `Vec` per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct WavAudio {
    pub sample_rate: u32,
    pub channels: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy)]
enum SampleFormat {
    Int16,
    Int32,
    Float32,
}

impl SampleFormat {
    fn bytes(self) -> usize {
        match self {
            SampleFormat::Int16 => 2,
            SampleFormat::Int32 | SampleFormat::Float32 => 4,
        }
    }
}

struct FmtInfo {
    channels: usize,
    sample_rate: u32,
    format: SampleFormat,
}

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

fn read_u16(bytes: &[u8], at: usize) -> Result<u16> {
    bytes
        .get(at..at + 2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .ok_or_else(|| parse_err(at, "unexpected end of file"))
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| parse_err(at, "unexpected end of file"))
}

pub fn read_wav_file(path: impl AsRef<Path>) -> Result<WavAudio> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes)
}

/// Decode a complete WAV file held in memory. Chunks other than `fmt ` and
/// `data` are skipped.
pub fn decode_wav(bytes: &[u8]) -> Result<WavAudio> {
    if bytes.get(0..4) != Some(b"RIFF") {
        return Err(parse_err(0, "missing RIFF magic"));
    }
    if bytes.get(8..12) != Some(b"WAVE") {
        return Err(parse_err(8, "RIFF form type is not WAVE"));
    }

    let mut fmt: Option<FmtInfo> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4)? as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if body + size > bytes.len() {
                    return Err(parse_err(pos, "fmt chunk runs past end of file"));
                }
                fmt = Some(parse_fmt(bytes, body, size)?);
            }
            b"data" => {
                let info = fmt
                    .as_ref()
                    .ok_or_else(|| parse_err(pos, "data chunk before fmt chunk"))?;
                let available = bytes.len() - body;
                if size > available {
                    return Err(parse_err(
                        pos + 4,
                        format!("data chunk declares {size} bytes but only {available} remain"),
                    ));
                }
                return decode_samples(&bytes[body..body + size], info, body);
            }
            _ => {}
        }
        pos = body + size + (size & 1);
    }
    Err(parse_err(
        bytes.len(),
        if fmt.is_some() {
            "no data chunk"
        } else {
            "no fmt chunk"
        },
    ))
}

fn parse_fmt(bytes: &[u8], at: usize, size: usize) -> Result<FmtInfo> {
    if size < 16 {
        return Err(parse_err(at, format!("fmt chunk too small ({size} bytes)")));
    }
    let mut tag = read_u16(bytes, at)?;
    let channels = read_u16(bytes, at + 2)? as usize;
    let sample_rate = read_u32(bytes, at + 4)?;
    let bits = read_u16(bytes, at + 14)?;
    if tag == FORMAT_EXTENSIBLE {
        if size < 40 {
            return Err(parse_err(at, "extensible fmt chunk shorter than 40 bytes"));
        }
        tag = read_u16(bytes, at + 24)?;
    }
    if sample_rate == 0 {
        return Err(parse_err(at + 4, "sample rate is zero"));
    }
    if !(1..=8).contains(&channels) {
        return Err(Error::UnsupportedFormat(format!(
            "{channels} channels (supported: 1-8)"
        )));
    }
    let format = match (tag, bits) {
        (FORMAT_PCM, 16) => SampleFormat::Int16,
        (FORMAT_PCM, 32) => SampleFormat::Int32,
        (FORMAT_FLOAT, 32) => SampleFormat::Float32,
        _ => {
            return Err(Error::UnsupportedFormat(format!(
                "format tag {tag:#06x} with {bits} bits per sample"
            )))
        }
    };
    Ok(FmtInfo {
        channels,
        sample_rate,
        format,
    })
}

fn decode_samples(data: &[u8], info: &FmtInfo, data_offset: usize) -> Result<WavAudio> {
    let width = info.format.bytes();
    let frame = width * info.channels;
    if !data.len().is_multiple_of(frame) {
        return Err(parse_err(
            data_offset + data.len() - data.len() % frame,
            "partial sample frame at end of data chunk",
        ));
    }
    let frames = data.len() / frame;
    let mut channels = vec![Vec::with_capacity(frames); info.channels];
    for (i, raw) in data.chunks_exact(width).enumerate() {
        let v = match info.format {
            SampleFormat::Int16 => i16::from_le_bytes([raw[0], raw[1]]) as f64 / 32768.0,
            SampleFormat::Int32 => {
                i32::from_le_bytes([raw[0], raw[1], raw[2], raw[3]]) as f64 / 2_147_483_648.0
            }
            SampleFormat::Float32 => {
                let v = f32::from_le_bytes([raw[0], raw[1], raw[2], raw[3]]) as f64;
                if !v.is_finite() {
                    return Err(parse_err(
                        data_offset + i * width,
                        "non-finite float sample",
                    ));
                }
                v.clamp(-1.0, 1.0)
            }
        };
        channels[i % info.channels].push(v);
    }
    Ok(WavAudio {
        sample_rate: info.sample_rate,
        channels,
    })
}
