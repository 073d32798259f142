//! Frame energy analysis: silence detection, pauses, the voiced region and
//! word segmentation.

use serde::{Deserialize, Serialize};

use crate::audio_io::{Waveform, SAMPLE_RATE};
use crate::error::{Result, RexError};

/// Thresholds for the energy-based voicing analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VoicingConfig {
    /// A frame is silent when its RMS is below this fraction of the clip's
    /// 95th-percentile frame RMS.
    pub silence_ratio: f64,
    /// Shortest silent run counted as a pause, seconds.
    pub min_pause_s: f64,
    /// Minimum spacing between word boundaries, seconds.
    pub min_word_gap_s: f64,
}

impl Default for VoicingConfig {
    fn default() -> Self {
        Self {
            silence_ratio: 0.05,
            min_pause_s: 0.10,
            min_word_gap_s: 0.08,
        }
    }
}

/// 25 ms analysis frames.
pub const ENERGY_FRAME: usize = 400;
/// 10 ms hop.
pub const ENERGY_HOP: usize = 160;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub start_s: f64,
    pub end_s: f64,
}

impl Span {
    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start_s && t <= self.end_s
    }
}

/// Per-frame energy profile on a uniform time grid.
#[derive(Debug, Clone)]
pub struct EnergyTrack {
    pub rms: Vec<f64>,
    pub frame_s: f64,
    pub hop_s: f64,
}

impl EnergyTrack {
    pub fn from_waveform(w: &Waveform) -> Self {
        let s = w.samples();
        let n = (s.len() - ENERGY_FRAME) / ENERGY_HOP + 1;
        let rms = (0..n)
            .map(|j| {
                let f = &s[j * ENERGY_HOP..j * ENERGY_HOP + ENERGY_FRAME];
                (f.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / ENERGY_FRAME as f64)
                    .sqrt()
            })
            .collect();
        Self {
            rms,
            frame_s: ENERGY_FRAME as f64 / SAMPLE_RATE as f64,
            hop_s: ENERGY_HOP as f64 / SAMPLE_RATE as f64,
        }
    }

    pub fn frame_start(&self, j: usize) -> f64 {
        j as f64 * self.hop_s
    }

    pub fn frame_end(&self, j: usize) -> f64 {
        self.frame_start(j) + self.frame_s
    }

    pub fn frame_center(&self, j: usize) -> f64 {
        self.frame_start(j) + self.frame_s / 2.0
    }

    /// Index of the frame whose center is closest to `t`.
    pub fn frame_at(&self, t: f64) -> usize {
        let j = ((t - self.frame_s / 2.0) / self.hop_s).round();
        (j.max(0.0) as usize).min(self.rms.len().saturating_sub(1))
    }
}

/// Voicing analysis of one clip.
#[derive(Debug, Clone)]
pub struct Voicing {
    pub track: EnergyTrack,
    pub silent: Vec<bool>,
    pub threshold: f64,
    /// Voiced region with leading/trailing silence removed; `None` for a
    /// fully silent clip.
    pub region: Option<Span>,
    pub pauses: Vec<Span>,
}

impl Voicing {
    pub fn voiced_duration(&self) -> f64 {
        self.region.map_or(0.0, |r| r.duration())
    }

    pub fn pause_duration(&self) -> f64 {
        self.pauses.iter().map(Span::duration).sum()
    }

    /// Whether time `t` falls on a non-silent frame inside the voiced region.
    pub fn is_voiced_at(&self, t: f64) -> bool {
        match self.region {
            Some(r) if r.contains(t) => !self.silent[self.track.frame_at(t)],
            _ => false,
        }
    }
}

/// Linear-interpolated percentile, `q` in [0, 1].
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Analyses a waveform. The voiced-region edges are refined to the first
/// and last sample whose magnitude reaches the silence threshold.
pub fn analyze_waveform(w: &Waveform, cfg: &VoicingConfig) -> Voicing {
    let track = EnergyTrack::from_waveform(w);
    let mut v = analyze_track(track, cfg);
    if let Some(region) = v.region {
        let s = w.samples();
        let sr = SAMPLE_RATE as f64;
        let lo = (region.start_s * sr) as usize;
        let mut hi = ((region.end_s * sr) as usize).min(s.len());
        // Samples past the last full frame are never framed; include them
        // when the voiced region runs to the final frame.
        let last_end = v.track.frame_end(v.track.rms.len() - 1);
        if region.end_s >= last_end - 1e-9 {
            hi = s.len();
        }
        let thr = v.threshold as f32;
        let first = s[lo..hi].iter().position(|x| x.abs() >= thr);
        let last = s[lo..hi].iter().rposition(|x| x.abs() >= thr);
        if let (Some(a), Some(b)) = (first, last) {
            v.region = Some(Span {
                start_s: (lo + a) as f64 / sr,
                end_s: (lo + b + 1) as f64 / sr,
            });
        }
    }
    v
}

/// Silence, voiced region and pauses from a frame energy track.
pub fn analyze_track(track: EnergyTrack, cfg: &VoicingConfig) -> Voicing {
    let p95 = percentile(&track.rms, 0.95);
    let threshold = cfg.silence_ratio * p95;
    let silent: Vec<bool> = track
        .rms
        .iter()
        .map(|&r| p95 <= 0.0 || r < threshold)
        .collect();
    let first = silent.iter().position(|s| !s);
    let last = silent.iter().rposition(|s| !s);
    let (region, pauses) = match (first, last) {
        (Some(a), Some(b)) => {
            let region = Span {
                start_s: track.frame_start(a),
                end_s: track.frame_end(b),
            };
            let mut pauses = Vec::new();
            let mut j = a;
            while j <= b {
                if silent[j] {
                    let run_start = j;
                    while j <= b && silent[j] {
                        j += 1;
                    }
                    let span = Span {
                        start_s: track.frame_start(run_start),
                        end_s: track.frame_end(j - 1),
                    };
                    if span.duration() >= cfg.min_pause_s {
                        pauses.push(span);
                    }
                } else {
                    j += 1;
                }
            }
            (Some(region), pauses)
        }
        _ => (None, Vec::new()),
    };
    Voicing {
        track,
        silent,
        threshold,
        region,
        pauses,
    }
}

/// Maximal silent runs of at least the configured pause length inside the
/// voiced region. A fully silent clip yields no pauses (and zero voiced
/// duration, see [`Voicing::voiced_duration`]).
pub fn detect_pauses(w: &Waveform, cfg: &VoicingConfig) -> Vec<Span> {
    analyze_waveform(w, cfg).pauses
}

/// Splits the voiced region into `word_count` spans at the deepest energy
/// valleys; falls back to equal spans when too few valleys exist.
pub fn segment_words(w: &Waveform, word_count: usize, cfg: &VoicingConfig) -> Result<Vec<Span>> {
    let v = analyze_waveform(w, cfg);
    segment_voicing(&v, word_count, cfg)
}

pub fn segment_voicing(v: &Voicing, word_count: usize, cfg: &VoicingConfig) -> Result<Vec<Span>> {
    if word_count == 0 {
        return Err(RexError::InvalidArgument("word_count must be >= 1".into()));
    }
    let region = v.region.ok_or(RexError::Unvoiced)?;
    if word_count == 1 {
        return Ok(vec![region]);
    }
    let track = &v.track;
    let p95 = percentile(&track.rms, 0.95);
    let low = 0.5 * p95;

    // Valley candidates: runs of low-energy frames strictly inside the
    // region, each represented by its center and its minimum energy.
    let mut valleys: Vec<(f64, f64, usize)> = Vec::new();
    let a = track.frame_at(region.start_s);
    let b = track.frame_at(region.end_s);
    let mut j = a;
    while j <= b {
        if track.rms[j] < low {
            let start = j;
            let mut min = f64::INFINITY;
            while j <= b && track.rms[j] < low {
                min = min.min(track.rms[j]);
                j += 1;
            }
            let center = (track.frame_center(start) + track.frame_center(j - 1)) / 2.0;
            if center > region.start_s && center < region.end_s {
                valleys.push((min, center, j - start));
            }
        } else {
            j += 1;
        }
    }
    // Deepest first, then longer, then earlier.
    valleys.sort_by(|x, y| {
        x.0.total_cmp(&y.0)
            .then(y.2.cmp(&x.2))
            .then(x.1.total_cmp(&y.1))
    });
    let mut cuts: Vec<f64> = Vec::new();
    for &(_, center, _) in &valleys {
        if cuts.len() == word_count - 1 {
            break;
        }
        let clear_of_edges = center - region.start_s >= cfg.min_word_gap_s
            && region.end_s - center >= cfg.min_word_gap_s;
        if clear_of_edges && cuts.iter().all(|&c| (c - center).abs() >= cfg.min_word_gap_s) {
            cuts.push(center);
        }
    }
    if cuts.len() < word_count - 1 {
        let step = region.duration() / word_count as f64;
        cuts = (1..word_count)
            .map(|i| region.start_s + step * i as f64)
            .collect();
    }
    cuts.sort_by(f64::total_cmp);
    let mut edges = Vec::with_capacity(word_count + 1);
    edges.push(region.start_s);
    edges.extend(cuts);
    edges.push(region.end_s);
    Ok(edges
        .windows(2)
        .map(|e| Span {
            start_s: e[0],
            end_s: e[1],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio_io::CLIP_SAMPLES;

    fn bursts(segments: &[(f64, f64)]) -> Waveform {
        let s = (0..CLIP_SAMPLES)
            .map(|n| {
                let t = n as f64 / 16_000.0;
                if segments.iter().any(|&(a, b)| t >= a && t < b) {
                    (0.5 * (2.0 * std::f64::consts::PI * 220.0 * t).sin()) as f32
                } else {
                    0.0
                }
            })
            .collect();
        Waveform::new(s).unwrap()
    }

    #[test]
    fn tone_silence_tone_has_one_pause() {
        let w = bursts(&[(0.0, 0.9), (2.1, 3.0)]);
        let v = analyze_waveform(&w, &VoicingConfig::default());
        assert_eq!(v.pauses.len(), 1);
        assert!((v.pauses[0].duration() - 1.2).abs() < 0.05);
        let prop = v.pause_duration() / v.voiced_duration();
        assert!((prop - 0.40).abs() < 0.05, "{prop}");
    }

    #[test]
    fn continuous_tone_has_no_pause() {
        let w = bursts(&[(0.0, 3.0)]);
        let v = analyze_waveform(&w, &VoicingConfig::default());
        assert!(v.pauses.is_empty());
        assert!((v.voiced_duration() - 3.0).abs() < 1e-3);
    }

    #[test]
    fn silence_has_no_voicing() {
        let v = analyze_waveform(&Waveform::silence(), &VoicingConfig::default());
        assert!(v.region.is_none());
        assert_eq!(v.voiced_duration(), 0.0);
        assert!(v.pauses.is_empty());
        assert!(matches!(
            segment_voicing(&v, 6, &VoicingConfig::default()),
            Err(RexError::Unvoiced)
        ));
    }

    #[test]
    fn six_bursts_give_six_words() {
        let segs: Vec<(f64, f64)> = (0..6)
            .map(|i| (0.3 + 0.4 * i as f64, 0.3 + 0.4 * i as f64 + 0.3))
            .collect();
        let w = bursts(&segs);
        let spans = segment_words(&w, 6, &VoicingConfig::default()).unwrap();
        assert_eq!(spans.len(), 6);
        for (span, &(a, b)) in spans.iter().zip(&segs) {
            let peak = (a + b) / 2.0;
            assert!(span.contains(peak));
            let others = segs.iter().filter(|&&(x, y)| span.contains((x + y) / 2.0)).count();
            assert_eq!(others, 1);
        }
    }

    #[test]
    fn flat_tone_falls_back_to_uniform() {
        let w = bursts(&[(0.0, 3.0)]);
        let spans = segment_words(&w, 6, &VoicingConfig::default()).unwrap();
        assert_eq!(spans.len(), 6);
        for s in &spans {
            assert!((s.duration() - spans[0].duration()).abs() < 1e-9);
        }
    }

    #[test]
    fn single_word_is_the_voiced_region() {
        let w = bursts(&[(0.5, 2.5)]);
        let cfg = VoicingConfig::default();
        let spans = segment_words(&w, 1, &cfg).unwrap();
        assert_eq!(spans, vec![analyze_waveform(&w, &cfg).region.unwrap()]);
    }

    #[test]
    fn percentile_interpolates() {
        assert_eq!(percentile(&[0.0, 10.0], 0.5), 5.0);
        assert_eq!(percentile(&[3.0, 1.0, 2.0], 1.0), 3.0);
        assert_eq!(percentile(&[], 0.5), 0.0);
    }
}
