//! Band log-energy encoder: Hann-windowed frames with 50% overlap, a
//! magnitude spectrum per frame, and triangular mel-spaced band filters.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::AudioClip;
use crate::embeddings::{aggregate_mean_over_time, AggregatedEmbedding, RawEncoderOutput};
use crate::error::{Error, Result};

/// Band energies are clamped to this level so silence stays finite.
pub const LOG_FLOOR_DB: f64 = -80.0;

pub const MIN_DURATION_S: f64 = 0.1;

pub const ENCODER_ID: &str = "reference";

/// Rate clips are resampled to before encoding.
pub const REFERENCE_SAMPLE_RATE: u32 = 16_000;

/// Frame-level band energies, pooled over time for auditor input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceEncoder {
    pub n_bands: usize,
    pub n_frames: usize,
}

impl Default for ReferenceEncoder {
    fn default() -> Self {
        ReferenceEncoder {
            n_bands: 32,
            n_frames: 64,
        }
    }
}

/// Frame length: the power of two nearest 32 ms at the clip's rate, at least 64.
fn frame_len(sample_rate: u32) -> usize {
    let target = (sample_rate as f64 * 0.032).max(64.0);
    let up = (target as usize).next_power_of_two();
    if (up as f64 / target) > 1.5 {
        up / 2
    } else {
        up
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters over `n_bins` spectrum bins, one per band. Bands too
/// narrow to cover a bin centre fall back to the nearest bin.
fn band_filters(n_bands: usize, n_bins: usize, sample_rate: u32, fft_len: usize) -> Vec<Vec<f64>> {
    let nyquist = sample_rate as f64 / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_bands + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_bands + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / fft_len as f64;
    (0..n_bands)
        .map(|k| {
            let (lo, mid, hi) = (edges[k], edges[k + 1], edges[k + 2]);
            let mut w: Vec<f64> = (0..n_bins)
                .map(|j| {
                    let f = j as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect();
            if w.iter().all(|&x| x == 0.0) {
                let nearest = ((mid / bin_hz).round() as usize).min(n_bins - 1);
                w[nearest] = 1.0;
            }
            w
        })
        .collect()
}

impl ReferenceEncoder {
    /// Per-frame band log-energies (dB) as an `n_frames x n_bands` map.
    pub fn encode(&self, clip: &AudioClip) -> Result<AggregatedEmbedding> {
        let frames = self.frame_energies(clip)?;
        AggregatedEmbedding::map(self.n_frames, self.n_bands, frames, ENCODER_ID)
    }

    /// Band energies averaged over time: a `n_bands` vector.
    pub fn embed(&self, clip: &AudioClip) -> Result<AggregatedEmbedding> {
        let frames = self.frame_energies(clip)?;
        let raw = RawEncoderOutput::layered(1, self.n_frames, self.n_bands, frames)?;
        let pooled = aggregate_mean_over_time(&raw, ENCODER_ID)?;
        AggregatedEmbedding::vector(pooled.values().data().to_vec(), ENCODER_ID)
    }

    fn frame_energies(&self, clip: &AudioClip) -> Result<Vec<f64>> {
        if self.n_bands == 0 || self.n_frames == 0 {
            return Err(Error::Validation(
                "reference encoder needs at least one band and one frame".into(),
            ));
        }
        if clip.duration_s() < MIN_DURATION_S {
            return Err(Error::Validation(format!(
                "clip is {:.4} s long; the reference encoder needs at least {MIN_DURATION_S} s",
                clip.duration_s()
            )));
        }
        let n = frame_len(clip.sample_rate());
        let hop = n / 2;
        let n_bins = n / 2 + 1;
        let window: Vec<f64> = (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
            .collect();
        let window_power: f64 = window.iter().map(|w| w * w).sum();
        let filters = band_filters(self.n_bands, n_bins, clip.sample_rate(), n);
        let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(n);

        let samples = clip.samples();
        let raw_frames = if samples.len() <= n {
            1
        } else {
            1 + (samples.len() - n) / hop
        };
        let mut per_frame = Vec::with_capacity(raw_frames);
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        for f in 0..raw_frames {
            let start = f * hop;
            for (i, slot) in buf.iter_mut().enumerate() {
                let s = samples.get(start + i).copied().unwrap_or(0.0);
                *slot = Complex::new(s * window[i], 0.0);
            }
            fft.process(&mut buf);
            let power: Vec<f64> = buf[..n_bins]
                .iter()
                .map(|c| c.norm_sqr() / window_power)
                .collect();
            let bands: Vec<f64> = filters
                .iter()
                .map(|w| {
                    let weight: f64 = w.iter().sum();
                    let e = w.iter().zip(&power).map(|(a, p)| a * p).sum::<f64>() / weight;
                    to_db(e)
                })
                .collect();
            per_frame.push(bands);
        }
        Ok(resample_frames(&per_frame, self.n_frames))
    }
}

fn to_db(energy: f64) -> f64 {
    if energy <= 0.0 {
        return LOG_FLOOR_DB;
    }
    (10.0 * energy.log10()).max(LOG_FLOOR_DB)
}

/// Linear interpolation along the time axis onto exactly `target` frames.
fn resample_frames(frames: &[Vec<f64>], target: usize) -> Vec<f64> {
    let src = frames.len();
    let bands = frames[0].len();
    let mut out = Vec::with_capacity(target * bands);
    for t in 0..target {
        let pos = if target == 1 || src == 1 {
            0.0
        } else {
            t as f64 * (src - 1) as f64 / (target - 1) as f64
        };
        let i = (pos.floor() as usize).min(src - 1);
        let frac = pos - i as f64;
        let j = (i + 1).min(src - 1);
        for b in 0..bands {
            out.push(frames[i][b] + frac * (frames[j][b] - frames[i][b]));
        }
    }
    out
}

/// Frame-level band energies for `clip` as an `n_frames x n_bands` map.
pub fn reference_encode(
    clip: &AudioClip,
    n_bands: usize,
    n_frames: usize,
) -> Result<AggregatedEmbedding> {
    ReferenceEncoder { n_bands, n_frames }.encode(clip)
}

/// Time-pooled band energies for `clip`, a vector of `n_bands` values.
pub fn reference_embedding(
    clip: &AudioClip,
    n_bands: usize,
    n_frames: usize,
) -> Result<AggregatedEmbedding> {
    ReferenceEncoder { n_bands, n_frames }.embed(clip)
}
