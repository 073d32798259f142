use std::path::Path;

use crate::error::{Result, RexError};

pub const SAMPLE_RATE: u32 = 16_000;
/// 3.0 s at 16 kHz.
pub const CLIP_SAMPLES: usize = 48_000;

/// A standardized clip: exactly [`CLIP_SAMPLES`] finite samples in [-1, 1]
/// at [`SAMPLE_RATE`].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f32>,
}

impl Waveform {
    pub fn new(samples: Vec<f32>) -> Result<Self> {
        if samples.len() != CLIP_SAMPLES {
            return Err(RexError::ShapeMismatch {
                expected: format!("{CLIP_SAMPLES} samples"),
                actual: format!("{} samples", samples.len()),
            });
        }
        if samples.iter().any(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(RexError::InvalidArgument(
                "waveform samples must be finite and within [-1, 1]".into(),
            ));
        }
        Ok(Self { samples })
    }

    pub fn silence() -> Self {
        Self {
            samples: vec![0.0; CLIP_SAMPLES],
        }
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        SAMPLE_RATE
    }

    pub fn duration_s(&self) -> f64 {
        CLIP_SAMPLES as f64 / SAMPLE_RATE as f64
    }

    /// Writes a 16-bit PCM mono WAV file.
    pub fn write_wav(&self, path: &Path) -> Result<()> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: SAMPLE_RATE,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let wav_err = |e: hound::Error| RexError::Wav {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
        for &s in &self.samples {
            let v = (s * i16::MAX as f32).round() as i16;
            writer.write_sample(v).map_err(wav_err)?;
        }
        writer.finalize().map_err(wav_err)
    }
}

/// Resamples `raw` to 16 kHz by linear interpolation, then pads
/// symmetrically or center-crops to exactly 3.0 s. Values are clamped to
/// [-1, 1]; non-finite samples become zero.
pub fn standardize(raw: &[f32], raw_rate: u32) -> Result<Waveform> {
    if raw.is_empty() {
        return Err(RexError::InvalidArgument("empty waveform".into()));
    }
    if raw_rate == 0 {
        return Err(RexError::InvalidArgument("sample rate must be positive".into()));
    }
    let resampled = if raw_rate == SAMPLE_RATE {
        raw.to_vec()
    } else {
        resample_linear(raw, raw_rate, SAMPLE_RATE)
    };
    let n = resampled.len();
    let mut out = vec![0.0f32; CLIP_SAMPLES];
    if n <= CLIP_SAMPLES {
        let lead = (CLIP_SAMPLES - n) / 2;
        out[lead..lead + n].copy_from_slice(&resampled);
    } else {
        let start = (n - CLIP_SAMPLES) / 2;
        out.copy_from_slice(&resampled[start..start + CLIP_SAMPLES]);
    }
    for s in &mut out {
        *s = if s.is_finite() { s.clamp(-1.0, 1.0) } else { 0.0 };
    }
    Ok(Waveform { samples: out })
}

fn resample_linear(raw: &[f32], from: u32, to: u32) -> Vec<f32> {
    let out_len = ((raw.len() as u64 * to as u64 + from as u64 / 2) / from as u64).max(1) as usize;
    let ratio = from as f64 / to as f64;
    let last = raw.len() - 1;
    (0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let lo = (pos.floor() as usize).min(last);
            let hi = (lo + 1).min(last);
            let frac = (pos - lo as f64) as f32;
            raw[lo] * (1.0 - frac) + raw[hi] * frac
        })
        .collect()
}

/// Reads the first channel of a PCM-integer or float WAV file, scaled to
/// [-1, 1], together with its sample rate.
pub fn read_wav(path: &Path) -> Result<(Vec<f32>, u32)> {
    let wav_err = |e: hound::Error| RexError::Wav {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut reader = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let samples: Vec<f32> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .step_by(channels)
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        hound::SampleFormat::Int => {
            let scale = (1i64 << (spec.bits_per_sample.saturating_sub(1))) as f32;
            reader
                .samples::<i32>()
                .step_by(channels)
                .map(|s| s.map(|v| v as f32 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_err)?
        }
    };
    Ok((samples, spec.sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_input_is_padded_symmetrically() {
        let raw = vec![0.5f32; 40_000];
        let w = standardize(&raw, SAMPLE_RATE).unwrap();
        let s = w.samples();
        assert_eq!(s.len(), CLIP_SAMPLES);
        assert!(s[..4000].iter().all(|&v| v == 0.0));
        assert!(s[44_000..].iter().all(|&v| v == 0.0));
        assert!(s[4000..44_000].iter().all(|&v| v == 0.5));
    }

    #[test]
    fn long_input_is_center_cropped() {
        let raw: Vec<f32> = (0..56_000).map(|i| i as f32 / 56_000.0).collect();
        let w = standardize(&raw, SAMPLE_RATE).unwrap();
        assert_eq!(w.samples()[0], raw[4000]);
        assert_eq!(w.samples()[CLIP_SAMPLES - 1], raw[51_999]);
    }

    #[test]
    fn silence_is_allowed_and_empty_is_not() {
        assert!(standardize(&[0.0; 100], SAMPLE_RATE).is_ok());
        assert!(standardize(&[], SAMPLE_RATE).is_err());
    }

    #[test]
    fn upsampling_preserves_tone_frequency() {
        // 3 s of a 440 Hz tone at 8 kHz.
        let raw: Vec<f32> = (0..24_000)
            .map(|i| (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 8000.0).sin() as f32 * 0.5)
            .collect();
        let w = standardize(&raw, 8000).unwrap();
        assert_eq!(w.samples().len(), CLIP_SAMPLES);
        // Independent oracle: single-bin DFT magnitude scan around the tone.
        let s: Vec<f64> = w.samples().iter().map(|&v| v as f64).collect();
        let mut best = (0.0, 0.0);
        for tenth_hz in 4000..4800 {
            let f = tenth_hz as f64 / 10.0;
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &v) in s.iter().enumerate().step_by(2) {
                let ph = 2.0 * std::f64::consts::PI * f * i as f64 / 16_000.0;
                re += v * ph.cos();
                im += v * ph.sin();
            }
            let mag = re * re + im * im;
            if mag > best.1 {
                best = (f, mag);
            }
        }
        assert!((best.0 - 440.0).abs() / 440.0 < 0.01, "peak at {}", best.0);
    }

    #[test]
    fn wav_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let raw: Vec<f32> = (0..CLIP_SAMPLES).map(|i| ((i % 100) as f32 / 100.0) - 0.5).collect();
        let w = Waveform::new(raw).unwrap();
        w.write_wav(&path).unwrap();
        let (back, rate) = read_wav(&path).unwrap();
        assert_eq!(rate, SAMPLE_RATE);
        assert_eq!(back.len(), CLIP_SAMPLES);
        for (a, b) in back.iter().zip(w.samples()) {
            assert!((a - b).abs() < 1e-4);
        }
    }
}
