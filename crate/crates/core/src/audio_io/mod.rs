//! Audio loading and standardization: WAV decoding, mono downmix, linear
//! resampling, and a small band-energy encoder for running the pipeline on
//! raw audio without an external model.

mod reference;
mod wav;

use std::path::Path;

use crate::error::{Error, Result};

pub use reference::{
    reference_embedding, reference_encode, ReferenceEncoder, ENCODER_ID as REFERENCE_ENCODER_ID,
    LOG_FLOOR_DB, REFERENCE_SAMPLE_RATE,
};
pub use wav::{decode_wav, read_wav_file, WavAudio};

/// Mono audio with samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Validation("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Validation(format!("non-finite sample at index {i}")));
        }
        Ok(AudioClip {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

impl WavAudio {
    /// Arithmetic mean of all channels, frame by frame.
    pub fn downmix(&self) -> Result<AudioClip> {
        let n = self.channels.len() as f64;
        let frames = self.channels.first().map_or(0, Vec::len);
        let samples = (0..frames)
            .map(|i| self.channels.iter().map(|c| c[i]).sum::<f64>() / n)
            .collect();
        AudioClip::new(samples, self.sample_rate)
    }
}

/// Load a WAV file and average its channels to mono.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    read_wav_file(path)?.downmix()
}

/// Resample by linear interpolation between neighbouring source samples.
///
/// Output length is `round(len * target / source)`. Output sample `i` sits at
/// source position `i * source / target`; positions past the last sample hold
/// the last sample.
pub fn resample_linear(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if target_rate == 0 {
        return Err(Error::Validation("target sample rate must be positive".into()));
    }
    if target_rate == clip.sample_rate {
        return Ok(clip.clone());
    }
    let src = clip.samples();
    let ratio = clip.sample_rate as f64 / target_rate as f64;
    let out_len = (src.len() as f64 * target_rate as f64 / clip.sample_rate as f64).round() as usize;
    let last = src.len().saturating_sub(1);
    let samples = (0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let idx = (pos.floor() as usize).min(last);
            let frac = pos - idx as f64;
            if idx >= last {
                src[last]
            } else {
                src[idx] + frac * (src[idx + 1] - src[idx])
            }
        })
        .collect();
    AudioClip::new(samples, target_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(freq: f64, rate: u32, secs: f64, amp: f64) -> AudioClip {
        let n = (rate as f64 * secs) as usize;
        AudioClip::new(
            (0..n)
                .map(|i| amp * (2.0 * PI * freq * i as f64 / rate as f64).sin())
                .collect(),
            rate,
        )
        .unwrap()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn opposite_channels_cancel() {
        let wav = WavAudio {
            sample_rate: 8000,
            channels: vec![vec![0.5; 100], vec![-0.5; 100]],
        };
        assert!(wav.downmix().unwrap().samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn constant_survives_resampling() {
        let clip = AudioClip::new(vec![0.5; 44100], 44100).unwrap();
        let out = resample_linear(&clip, 16000).unwrap();
        assert_eq!(out.samples().len(), 16000);
        assert!(out.samples().iter().all(|&s| s == 0.5));
    }

    #[test]
    fn same_rate_is_identity() {
        let clip = sine(440.0, 22050, 0.3, 0.7);
        let out = resample_linear(&clip, 22050).unwrap();
        assert_eq!(out, clip);
    }

    #[test]
    fn output_length_rounds() {
        let clip = AudioClip::new(vec![0.0; 1001], 48000).unwrap();
        // 1001 * 16000 / 48000 = 333.67
        assert_eq!(resample_linear(&clip, 16000).unwrap().samples().len(), 334);
        assert!(resample_linear(&clip, 0).is_err());
    }

    #[test]
    fn sine_rms_preserved_after_downsampling() {
        let amp = 0.8;
        let out = resample_linear(&sine(100.0, 48000, 1.0, amp), 16000).unwrap();
        let ideal = amp / 2f64.sqrt();
        assert!((rms(out.samples()) - ideal).abs() / ideal < 0.01);
    }

    #[test]
    fn downmix_commutes_with_resampling() {
        let left = sine(300.0, 44100, 0.2, 0.6);
        let right = sine(1200.0, 44100, 0.2, 0.3);
        let wav = WavAudio {
            sample_rate: 44100,
            channels: vec![left.samples().to_vec(), right.samples().to_vec()],
        };
        let a = resample_linear(&wav.downmix().unwrap(), 16000).unwrap();
        let rl = resample_linear(&left, 16000).unwrap();
        let rr = resample_linear(&right, 16000).unwrap();
        let b = WavAudio {
            sample_rate: 16000,
            channels: vec![rl.samples().to_vec(), rr.samples().to_vec()],
        }
        .downmix()
        .unwrap();
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn band_limited_round_trip() {
        // linear interpolation only meets the 2% bound well below Nyquist;
        // the test signal stays under r/16
        let r = 16000;
        let n = 48000;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / 48000.0;
                0.4 * (2.0 * PI * 250.0 * t).sin() + 0.3 * (2.0 * PI * 1000.0 * t + 0.3).sin()
            })
            .collect();
        let clip = AudioClip::new(samples, 48000).unwrap();
        let back = resample_linear(&resample_linear(&clip, r).unwrap(), 48000).unwrap();
        let m = back.samples().len().min(n) - 8;
        let err: Vec<f64> = (0..m).map(|i| clip.samples()[i] - back.samples()[i]).collect();
        assert!(rms(&err) < 0.02 * rms(&clip.samples()[..m]));
    }

    #[test]
    fn rejects_bad_clips() {
        assert!(AudioClip::new(vec![0.0], 0).is_err());
        assert!(AudioClip::new(vec![f64::NAN], 8000).is_err());
        assert_eq!(AudioClip::new(vec![0.0; 800], 8000).unwrap().duration_s(), 0.1);
    }
}
