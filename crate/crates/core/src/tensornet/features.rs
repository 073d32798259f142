//! Network inputs: log-compressed mel spectrograms standardised per mel bin.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::audio_io::Corpus;
use crate::dsp::{mel_spectrogram, MelSpectrogram, N_MELS};
use crate::error::{Result, RexError};

/// Per-bin mean and standard deviation of `log(1 + power)` over the
/// training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

const MIN_STD: f64 = 1e-6;
/// Per-bin deviations are floored at this fraction of the mean deviation.
pub const STD_FLOOR_RATIO: f64 = 0.1;

impl FeatureNorm {
    pub fn identity(bins: usize) -> Self {
        Self {
            mean: vec![0.0; bins],
            std: vec![1.0; bins],
        }
    }

    pub fn fit<'a>(log_specs: impl IntoIterator<Item = &'a Array2<f64>>) -> Result<Self> {
        let mut sum: Option<Array1<f64>> = None;
        let mut sq: Option<Array1<f64>> = None;
        let mut n = 0usize;
        for s in log_specs {
            let s1 = s.sum_axis(Axis(1));
            let s2 = s.mapv(|v| v * v).sum_axis(Axis(1));
            match (&mut sum, &mut sq) {
                (Some(a), Some(b)) => {
                    if a.len() != s1.len() {
                        return Err(RexError::ShapeMismatch {
                            expected: format!("{} bins", a.len()),
                            actual: format!("{} bins", s1.len()),
                        });
                    }
                    *a += &s1;
                    *b += &s2;
                }
                _ => {
                    sum = Some(s1);
                    sq = Some(s2);
                }
            }
            n += s.ncols();
        }
        let (sum, sq) = match (sum, sq) {
            (Some(a), Some(b)) if n > 0 => (a, b),
            _ => return Err(RexError::InvalidArgument("no spectrograms to fit".into())),
        };
        let mean = &sum / n as f64;
        let std = (&sq / n as f64 - &mean * &mean).mapv(|v| v.max(0.0).sqrt());
        // Bins holding only background noise would otherwise be blown up
        // to unit variance.
        let floor = (STD_FLOOR_RATIO * std.mean().unwrap_or(0.0)).max(MIN_STD);
        Ok(Self {
            mean: mean.to_vec(),
            std: std.mapv(|v| v.max(floor)).to_vec(),
        })
    }

    pub fn apply(&self, log_spec: &Array2<f64>) -> Array2<f64> {
        let mut out = log_spec.clone();
        for (mut row, (m, s)) in out.outer_iter_mut().zip(self.mean.iter().zip(&self.std)) {
            row.mapv_inplace(|v| (v - m) / s);
        }
        out
    }

    pub fn invert(&self, standardized: &Array2<f64>) -> Array2<f64> {
        let mut out = standardized.clone();
        for (mut row, (m, s)) in out.outer_iter_mut().zip(self.mean.iter().zip(&self.std)) {
            row.mapv_inplace(|v| v * s + m);
        }
        out
    }

    /// Standardised network input for a spectrogram.
    pub fn input(&self, spec: &MelSpectrogram) -> Array2<f64> {
        self.apply(&spec.log_power())
    }

    /// Power spectrogram from a standardised input.
    pub fn to_spectrogram(&self, standardized: &Array2<f64>) -> Result<MelSpectrogram> {
        MelSpectrogram::from_log_power(&self.invert(standardized))
    }
}

/// Spectrograms and standardised inputs for every clip of a corpus, in
/// corpus order.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub spectrograms: Vec<MelSpectrogram>,
    pub inputs: Vec<Array2<f64>>,
    pub norm: FeatureNorm,
}

impl FeatureSet {
    pub fn from_corpus(corpus: &Corpus) -> Result<Self> {
        let spectrograms: Vec<MelSpectrogram> =
            corpus.clips().iter().map(|c| mel_spectrogram(&c.waveform)).collect();
        let logs: Vec<Array2<f64>> = spectrograms.iter().map(|s| s.log_power()).collect();
        let norm = FeatureNorm::fit(corpus.train_indices().iter().map(|&i| &logs[i]))?;
        debug_assert_eq!(norm.mean.len(), N_MELS);
        let inputs = logs.iter().map(|l| norm.apply(l)).collect();
        Ok(Self {
            spectrograms,
            inputs,
            norm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn fit_apply_invert() {
        let a = array![[1.0, 3.0], [0.0, 0.0]];
        let b = array![[5.0, 7.0], [2.0, 2.0]];
        let n = FeatureNorm::fit([&a, &b]).unwrap();
        assert_eq!(n.mean, vec![4.0, 1.0]);
        assert!((n.std[0] - 5f64.sqrt()).abs() < 1e-12);
        assert!((n.std[1] - 1.0).abs() < 1e-12);
        let quiet = array![[1.0, 3.0], [0.0, 0.001]];
        let q = FeatureNorm::fit([&quiet]).unwrap();
        assert!((q.std[1] - 0.1 * (1.0 + 0.0005) / 2.0).abs() < 1e-12);
        let z = n.apply(&a);
        assert!((z[[1, 0]] + 1.0).abs() < 1e-12);
        let back = n.invert(&z);
        assert!((back - &a).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn constant_bins_do_not_blow_up() {
        let a = Array2::from_elem((2, 3), 4.0);
        let n = FeatureNorm::fit([&a]).unwrap();
        assert!(n.apply(&a).iter().all(|v| v.abs() < 1e-9));
    }
}
