//! Contrastive saliency and its one-dimensional, word-aligned bar.

use ndarray::{Array1, Array2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::audio_io::Emotion;
use crate::dsp::{mel_frame_center_s, percentile, Span, MIN_SALIENT_FRAMES};
use crate::error::{Result, RexError};

pub const DEFAULT_SALIENCY_THRESHOLD: f64 = 0.5;

/// Per-bin saliency in `[0, 1]`, `[mel bins, frames]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    values: Array2<f64>,
    pub class_index: Emotion,
}

impl SaliencyMap {
    pub fn new(values: Array2<f64>, class_index: Emotion) -> Result<Self> {
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(RexError::InvalidArgument(
                "saliency values must lie in [0, 1]".into(),
            ));
        }
        Ok(Self { values, class_index })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Mean over frequency for every frame, not normalised.
    pub fn frame_means(&self) -> Array1<f64> {
        self.values
            .mean_axis(Axis(0))
            .unwrap_or_else(|| Array1::zeros(self.values.ncols()))
    }
}

/// One word on the saliency bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WordSaliency {
    pub start_s: f64,
    pub end_s: f64,
    pub mean_saliency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyBar {
    pub per_frame: Vec<f64>,
    pub word_spans: Vec<WordSaliency>,
}

fn check_shape(a: &SaliencyMap, b: &SaliencyMap) -> Result<()> {
    if a.values.dim() != b.values.dim() {
        return Err(RexError::ShapeMismatch {
            expected: format!("{:?}", a.values.dim()),
            actual: format!("{:?}", b.values.dim()),
        });
    }
    Ok(())
}

/// `(1 - s_gamma) * s_y`, elementwise: what is salient for `y` but not for
/// the contrast class.
pub fn pairwise_contrastive(s_y: &SaliencyMap, s_gamma: &SaliencyMap) -> Result<SaliencyMap> {
    check_shape(s_y, s_gamma)?;
    let mut out = s_y.values.clone();
    Zip::from(&mut out)
        .and(&s_gamma.values)
        .for_each(|o, &g| *o *= 1.0 - g);
    Ok(SaliencyMap {
        values: out,
        class_index: s_y.class_index,
    })
}

/// `s_y` discounted by the mean of `1 - s_gamma` over all alternative
/// classes.
pub fn total_contrastive(s_y: &SaliencyMap, others: &[SaliencyMap]) -> Result<SaliencyMap> {
    if others.is_empty() {
        return Err(RexError::InvalidArgument(
            "total contrastive saliency needs at least one alternative class".into(),
        ));
    }
    let mut lambda = Array2::<f64>::zeros(s_y.values.dim());
    for o in others {
        check_shape(s_y, o)?;
        Zip::from(&mut lambda)
            .and(&o.values)
            .for_each(|l, &g| *l += 1.0 - g);
    }
    let n = others.len() as f64;
    Zip::from(&mut lambda)
        .and(&s_y.values)
        .for_each(|l, &s| *l = (*l / n) * s);
    Ok(SaliencyMap {
        values: lambda,
        class_index: s_y.class_index,
    })
}

/// Rescales to `[0, 1]`; a constant input maps to all zeros.
pub fn min_max_normalize(v: &mut [f64]) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let span = hi - lo;
    v.iter_mut().for_each(|x| *x = ((*x - lo) / span).clamp(0.0, 1.0));
}

/// Frequency-mean per frame, normalised to `[0, 1]`.
pub fn frame_profile(map: &SaliencyMap) -> Vec<f64> {
    let mut per_frame = map.frame_means().to_vec();
    min_max_normalize(&mut per_frame);
    per_frame
}

pub fn to_time_bar(map: &SaliencyMap, spans: &[Span]) -> SaliencyBar {
    bar_from_profile(frame_profile(map), spans)
}

/// Bar from an already normalised per-frame profile.
pub fn bar_from_profile(per_frame: Vec<f64>, spans: &[Span]) -> SaliencyBar {
    let word_spans = spans
        .iter()
        .map(|span| {
            let (sum, n) = per_frame
                .iter()
                .enumerate()
                .filter(|(t, _)| span.contains(mel_frame_center_s(*t)))
                .fold((0.0, 0usize), |(s, n), (_, &v)| (s + v, n + 1));
            WordSaliency {
                start_s: span.start_s,
                end_s: span.end_s,
                mean_saliency: if n == 0 { 0.0 } else { sum / n as f64 },
            }
        })
        .collect();
    SaliencyBar {
        per_frame,
        word_spans,
    }
}

/// Frames whose normalised frequency-mean saliency reaches `tau`. When that
/// selects fewer than five frames the threshold drops to the 95th
/// percentile of the bar. Bars of five frames or fewer are thresholded
/// as-is.
pub fn salient_frame_mask(map: &SaliencyMap, tau: f64) -> Vec<bool> {
    mask_from_bar(&frame_profile(map), tau)
}

pub fn mask_from_bar(per_frame: &[f64], tau: f64) -> Vec<bool> {
    let mask: Vec<bool> = per_frame.iter().map(|&v| v >= tau).collect();
    if per_frame.len() <= MIN_SALIENT_FRAMES
        || mask.iter().filter(|&&m| m).count() >= MIN_SALIENT_FRAMES
    {
        return mask;
    }
    let fallback = percentile(per_frame, 0.95);
    per_frame.iter().map(|&v| v >= fallback).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn map(v: Array2<f64>) -> SaliencyMap {
        SaliencyMap::new(v, Emotion::Happy).unwrap()
    }

    #[test]
    fn pairwise_hand_example() {
        let sy = map(array![[0.8, 0.2, 0.4, 1.0]]);
        let sg = map(array![[0.5, 0.0, 1.0, 0.5]]);
        let out = pairwise_contrastive(&sy, &sg).unwrap();
        for (a, b) in out.values().iter().zip([0.40, 0.20, 0.00, 0.50]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn total_hand_example() {
        let sy = map(array![[0.5]]);
        let others = [map(array![[0.2]]), map(array![[0.6]])];
        let out = total_contrastive(&sy, &others).unwrap();
        // lambda = ((1-0.2) + (1-0.6)) / 2 = 0.6
        assert!((out.values()[[0, 0]] - 0.30).abs() < 1e-12);
        assert!(total_contrastive(&sy, &[]).is_err());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = map(Array2::zeros((2, 2)));
        let b = map(Array2::zeros((2, 3)));
        assert!(matches!(
            pairwise_contrastive(&a, &b),
            Err(RexError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn time_bar_hand_mean() {
        let m = map(array![[0.2, 0.8], [0.4, 0.6]]);
        let means = m.frame_means();
        assert!((means[0] - 0.3).abs() < 1e-12 && (means[1] - 0.7).abs() < 1e-12);
        let bar = to_time_bar(&m, &[]);
        assert_eq!(bar.per_frame, vec![0.0, 1.0]);
    }

    #[test]
    fn uniform_map_gives_zero_bar() {
        let m = map(Array2::from_elem((4, 10), 0.3));
        assert!(frame_profile(&m).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn word_with_all_saliency_wins() {
        let spans: Vec<Span> = (0..4)
            .map(|i| Span {
                start_s: 0.5 * i as f64,
                end_s: 0.5 * (i + 1) as f64,
            })
            .collect();
        let mut v = Array2::zeros((3, 297));
        for t in 0..297 {
            if spans[2].contains(mel_frame_center_s(t)) {
                v.column_mut(t).fill(0.9);
            }
        }
        let bar = to_time_bar(&map(v), &spans);
        let best = (0..4)
            .max_by(|&a, &b| {
                bar.word_spans[a]
                    .mean_saliency
                    .total_cmp(&bar.word_spans[b].mean_saliency)
            })
            .unwrap();
        assert_eq!(best, 2);
    }

    #[test]
    fn mask_thresholds_and_falls_back() {
        assert_eq!(mask_from_bar(&[0.1, 0.6, 0.9], 0.5), vec![false, true, true]);
        let zeros = vec![0.0; 100];
        // Every frame ties at the 95th percentile of an all-zero bar.
        assert!(mask_from_bar(&zeros, 0.5).iter().all(|&m| m));
        let mut ramp: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        ramp[99] = 1.0;
        let m = mask_from_bar(&ramp.iter().map(|v| v * 0.4).collect::<Vec<_>>(), 0.5);
        assert_eq!(m.iter().filter(|&&b| b).count(), 5);
    }
}
