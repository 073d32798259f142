use std::sync::{Arc, OnceLock};

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::audio_io::{Waveform, CLIP_SAMPLES, SAMPLE_RATE};
use crate::error::{Result, RexError};

pub const N_MELS: usize = 128;
/// 0.04 s window.
pub const WINDOW: usize = 640;
/// 0.01 s hop.
pub const HOP: usize = 160;
/// Frames are zero-padded to this FFT length so the lowest mel triangles
/// each cover several FFT bins.
pub const N_FFT: usize = 2048;
pub const MEL_LOW_HZ: f64 = 0.0;
pub const MEL_HIGH_HZ: f64 = 8000.0;
/// floor((48000 - 640) / 160) + 1
pub const N_FRAMES: usize = (CLIP_SAMPLES - WINDOW) / HOP + 1;

/// Mel power spectrogram, `[N_MELS, frames]`, every entry finite and
/// non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    power: Array2<f64>,
}

impl MelSpectrogram {
    pub fn from_power(power: Array2<f64>) -> Result<Self> {
        if power.nrows() != N_MELS {
            return Err(RexError::ShapeMismatch {
                expected: format!("{N_MELS} mel bins"),
                actual: format!("{} rows", power.nrows()),
            });
        }
        if power.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(RexError::InvalidArgument(
                "mel power must be finite and non-negative".into(),
            ));
        }
        Ok(Self { power })
    }

    /// Inverse of [`MelSpectrogram::log_power`]; negative inputs clamp to 0.
    pub fn from_log_power(log_power: &Array2<f64>) -> Result<Self> {
        Self::from_power(log_power.mapv(|v| v.max(0.0).exp_m1()))
    }

    pub fn power(&self) -> &Array2<f64> {
        &self.power
    }

    pub fn frames(&self) -> usize {
        self.power.ncols()
    }

    /// `log(1 + power)`, the representation the networks consume.
    pub fn log_power(&self) -> Array2<f64> {
        self.power.mapv(f64::ln_1p)
    }

    pub fn total_power(&self) -> f64 {
        self.power.sum()
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

struct Filterbank {
    /// Per mel bin: first FFT bin and its weights.
    filters: Vec<(usize, Vec<f64>)>,
    centers_hz: Vec<f64>,
}

fn filterbank() -> &'static Filterbank {
    static FB: OnceLock<Filterbank> = OnceLock::new();
    FB.get_or_init(|| {
        let lo = hz_to_mel(MEL_LOW_HZ);
        let hi = hz_to_mel(MEL_HIGH_HZ);
        let edges: Vec<f64> = (0..N_MELS + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (N_MELS + 1) as f64))
            .collect();
        let bin_hz = SAMPLE_RATE as f64 / N_FFT as f64;
        let n_bins = N_FFT / 2 + 1;
        let filters = (0..N_MELS)
            .map(|m| {
                let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
                let mut first = None;
                let mut weights = Vec::new();
                for k in 0..n_bins {
                    let f = k as f64 * bin_hz;
                    let w = if f > left && f <= center {
                        (f - left) / (center - left)
                    } else if f > center && f < right {
                        (right - f) / (right - center)
                    } else {
                        0.0
                    };
                    if w > 0.0 {
                        first.get_or_insert(k);
                        weights.push(w);
                    } else if first.is_some() {
                        break;
                    }
                }
                (first.unwrap_or(0), weights)
            })
            .collect();
        Filterbank {
            filters,
            centers_hz: edges[1..=N_MELS].to_vec(),
        }
    })
}

/// Center frequency of every mel bin, ascending.
pub fn mel_centers_hz() -> &'static [f64] {
    &filterbank().centers_hz
}

fn fft() -> Arc<dyn Fft<f64>> {
    static PLAN: OnceLock<Arc<dyn Fft<f64>>> = OnceLock::new();
    PLAN.get_or_init(|| FftPlanner::new().plan_fft_forward(N_FFT))
        .clone()
}

fn hann() -> &'static [f64] {
    static WIN: OnceLock<Vec<f64>> = OnceLock::new();
    WIN.get_or_init(|| {
        (0..WINDOW)
            .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / WINDOW as f64).cos())
            .collect()
    })
}

/// Hann-windowed STFT power mapped through the 128-band mel filterbank.
pub fn mel_spectrogram(w: &Waveform) -> MelSpectrogram {
    mel_from_samples(w.samples())
}

pub(crate) fn mel_from_samples(samples: &[f32]) -> MelSpectrogram {
    let frames = if samples.len() >= WINDOW {
        (samples.len() - WINDOW) / HOP + 1
    } else {
        0
    };
    let fb = filterbank();
    let fft = fft();
    let win = hann();
    let mut power = Array2::<f64>::zeros((N_MELS, frames));
    let mut buf = vec![Complex::new(0.0, 0.0); N_FFT];
    let mut spectrum = vec![0.0f64; N_FFT / 2 + 1];
    for t in 0..frames {
        let frame = &samples[t * HOP..t * HOP + WINDOW];
        for (slot, (&s, &h)) in buf.iter_mut().zip(frame.iter().zip(win)) {
            *slot = Complex::new(s as f64 * h, 0.0);
        }
        for slot in &mut buf[WINDOW..] {
            *slot = Complex::new(0.0, 0.0);
        }
        fft.process(&mut buf);
        for (p, c) in spectrum.iter_mut().zip(&buf) {
            *p = c.norm_sqr();
        }
        for (m, (first, weights)) in fb.filters.iter().enumerate() {
            let e: f64 = weights
                .iter()
                .zip(&spectrum[*first..])
                .map(|(w, p)| w * p)
                .sum();
            power[[m, t]] = e;
        }
    }
    MelSpectrogram { power }
}
