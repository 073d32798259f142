//! Heuristic prosody cues: shrillness, loudness, average pitch, pitch
//! range, speaking rate and pause proportion.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::mel::{mel_centers_hz, mel_from_samples, MelSpectrogram, HOP, N_MELS, WINDOW};
use super::voicing::{analyze_track, analyze_waveform, EnergyTrack, Voicing, VoicingConfig};
use crate::audio_io::{Waveform, SAMPLE_RATE};
use crate::error::{Result, RexError};

pub const NUM_CUES: usize = 6;

/// Energy above this frequency counts towards shrillness.
pub const SHRILL_CUTOFF_HZ: f64 = 500.0;
pub const PITCH_MIN_HZ: f64 = 75.0;
pub const PITCH_MAX_HZ: f64 = 500.0;
/// Fewest salient frames a mask must select before it is honoured.
pub const MIN_SALIENT_FRAMES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cue {
    Shrillness,
    Loudness,
    MeanPitch,
    PitchRange,
    SpeakingRate,
    PauseProportion,
}

impl Cue {
    pub const ALL: [Cue; NUM_CUES] = [
        Cue::Shrillness,
        Cue::Loudness,
        Cue::MeanPitch,
        Cue::PitchRange,
        Cue::SpeakingRate,
        Cue::PauseProportion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Cue::Shrillness => "shrillness",
            Cue::Loudness => "loudness",
            Cue::MeanPitch => "mean_pitch",
            Cue::PitchRange => "pitch_range",
            Cue::SpeakingRate => "speaking_rate",
            Cue::PauseProportion => "pause_proportion",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Cue::Shrillness => "Shrillness",
            Cue::Loudness => "Loudness",
            Cue::MeanPitch => "Average Pitch",
            Cue::PitchRange => "Pitch Range",
            Cue::SpeakingRate => "Speaking Rate",
            Cue::PauseProportion => "Proportion of Pauses",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CueVector {
    /// Fraction of spectral power above 500 Hz.
    pub shrillness: f64,
    /// Mean absolute amplitude over the voiced region.
    pub loudness: f64,
    /// Mean F0, Hz.
    pub mean_pitch: f64,
    /// Standard deviation of F0, Hz.
    pub pitch_range: f64,
    /// Words per second of voiced duration.
    pub speaking_rate: f64,
    pub pause_proportion: f64,
}

impl CueVector {
    pub fn to_array(&self) -> [f64; NUM_CUES] {
        [
            self.shrillness,
            self.loudness,
            self.mean_pitch,
            self.pitch_range,
            self.speaking_rate,
            self.pause_proportion,
        ]
    }

    pub fn from_array(a: [f64; NUM_CUES]) -> Self {
        Self {
            shrillness: a[0],
            loudness: a[1],
            mean_pitch: a[2],
            pitch_range: a[3],
            speaking_rate: a[4],
            pause_proportion: a[5],
        }
    }

    pub fn get(&self, cue: Cue) -> f64 {
        self.to_array()[cue as usize]
    }
}

/// Center time of mel frame `t`, seconds.
pub fn mel_frame_center_s(t: usize) -> f64 {
    (t * HOP + WINDOW / 2) as f64 / SAMPLE_RATE as f64
}

/// Cues of a clip. `salient_mask` (one flag per mel frame) restricts the
/// spectral cues; it is ignored when it selects fewer than
/// [`MIN_SALIENT_FRAMES`] voiced frames. Temporal cues and loudness always
/// cover the whole voiced region.
pub fn extract_cues(
    spec: &MelSpectrogram,
    w: &Waveform,
    salient_mask: Option<&[bool]>,
    word_count: usize,
    cfg: &VoicingConfig,
) -> Result<CueVector> {
    let voicing = analyze_waveform(w, cfg);
    extract_cues_with_voicing(spec, w, &voicing, salient_mask, word_count)
}

/// Same as [`extract_cues`] with a precomputed voicing analysis.
pub fn extract_cues_with_voicing(
    spec: &MelSpectrogram,
    w: &Waveform,
    voicing: &Voicing,
    salient_mask: Option<&[bool]>,
    word_count: usize,
) -> Result<CueVector> {
    let region = voicing.region.ok_or(RexError::Unvoiced)?;
    let t_total = region.duration();
    if t_total <= 0.0 {
        return Err(RexError::Unvoiced);
    }
    let sr = SAMPLE_RATE as f64;
    let s = w.samples();
    let lo = (region.start_s * sr) as usize;
    let hi = ((region.end_s * sr) as usize).min(s.len());
    let loudness = s[lo..hi].iter().map(|v| v.abs() as f64).sum::<f64>() / (hi - lo).max(1) as f64;
    let voiced: Vec<bool> = (0..spec.frames())
        .map(|t| voicing.is_voiced_at(mel_frame_center_s(t)))
        .collect();
    let temporal = Temporal {
        t_total,
        t_pauses: voicing.pause_duration(),
        loudness,
    };
    cues_from_frames(spec, &voiced, salient_mask, word_count, temporal)
}

/// Cues computed from a mel spectrogram alone, for spectrograms that have
/// no waveform (generator outputs). Frame energy is read from the mel power
/// and calibrated to waveform RMS; loudness assumes a sinusoidal crest
/// factor.
pub fn extract_cues_spectral(
    spec: &MelSpectrogram,
    salient_mask: Option<&[bool]>,
    word_count: usize,
    cfg: &VoicingConfig,
) -> Result<CueVector> {
    let scale = mel_energy_scale();
    let p = spec.power();
    let rms: Vec<f64> = (0..spec.frames())
        .map(|t| (p.column(t).sum() / scale).sqrt())
        .collect();
    let track = EnergyTrack {
        rms,
        frame_s: WINDOW as f64 / SAMPLE_RATE as f64,
        hop_s: HOP as f64 / SAMPLE_RATE as f64,
    };
    let voicing = analyze_track(track, cfg);
    let region = voicing.region.ok_or(RexError::Unvoiced)?;
    let voiced: Vec<bool> = (0..spec.frames())
        .map(|t| region.contains(voicing.track.frame_center(t)) && !voicing.silent[t])
        .collect();
    let n_voiced = voiced.iter().filter(|&&v| v).count();
    let mean_rms = voiced
        .iter()
        .zip(&voicing.track.rms)
        .filter(|(v, _)| **v)
        .map(|(_, r)| r)
        .sum::<f64>()
        / n_voiced.max(1) as f64;
    let temporal = Temporal {
        t_total: region.duration(),
        t_pauses: voicing.pause_duration(),
        loudness: mean_rms * 2.0 * std::f64::consts::SQRT_2 / std::f64::consts::PI,
    };
    cues_from_frames(spec, &voiced, salient_mask, word_count, temporal)
}

/// Mel power per frame of a unit-RMS stationary tone.
fn mel_energy_scale() -> f64 {
    static SCALE: OnceLock<f64> = OnceLock::new();
    *SCALE.get_or_init(|| {
        let n = WINDOW + 20 * HOP;
        let amp = std::f64::consts::SQRT_2;
        let samples: Vec<f32> = (0..n)
            .map(|i| (amp * (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 16_000.0).sin()) as f32)
            .collect();
        let m = mel_from_samples(&samples);
        m.total_power() / m.frames() as f64
    })
}

struct Temporal {
    t_total: f64,
    t_pauses: f64,
    loudness: f64,
}

fn cues_from_frames(
    spec: &MelSpectrogram,
    voiced: &[bool],
    salient_mask: Option<&[bool]>,
    word_count: usize,
    temporal: Temporal,
) -> Result<CueVector> {
    let mut selected: Vec<usize> = match salient_mask {
        Some(mask) => voiced
            .iter()
            .zip(mask)
            .enumerate()
            .filter(|(_, (v, m))| **v && **m)
            .map(|(t, _)| t)
            .collect(),
        None => Vec::new(),
    };
    if selected.len() < MIN_SALIENT_FRAMES {
        selected = (0..voiced.len()).filter(|&t| voiced[t]).collect();
    }
    if selected.is_empty() {
        return Err(RexError::Unvoiced);
    }

    let centers = mel_centers_hz();
    let p = spec.power();
    let (mut high, mut total) = (0.0, 0.0);
    for &t in &selected {
        for m in 0..N_MELS {
            let v = p[[m, t]];
            total += v;
            if centers[m] > SHRILL_CUTOFF_HZ {
                high += v;
            }
        }
    }
    let shrillness = if total > 0.0 { high / total } else { 0.0 };

    let f0: Vec<f64> = selected.iter().filter_map(|&t| frame_f0(spec, t)).collect();
    let (mean_pitch, pitch_range) = if f0.is_empty() {
        (0.0, 0.0)
    } else {
        let mean = f0.iter().sum::<f64>() / f0.len() as f64;
        let var = f0.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / f0.len() as f64;
        (mean, var.sqrt())
    };

    Ok(CueVector {
        shrillness: shrillness.clamp(0.0, 1.0),
        loudness: temporal.loudness,
        mean_pitch,
        pitch_range,
        speaking_rate: word_count as f64 / temporal.t_total,
        pause_proportion: (temporal.t_pauses / temporal.t_total).clamp(0.0, 1.0),
    })
}

/// F0 of one frame: the modal mel bin within the pitch band, refined by a
/// parabola through the log power of its neighbours.
pub fn frame_f0(spec: &MelSpectrogram, t: usize) -> Option<f64> {
    let centers = mel_centers_hz();
    let p = spec.power();
    let band: Vec<usize> = (0..N_MELS)
        .filter(|&m| centers[m] >= PITCH_MIN_HZ && centers[m] <= PITCH_MAX_HZ)
        .collect();
    let &peak = band
        .iter()
        .max_by(|&&a, &&b| p[[a, t]].total_cmp(&p[[b, t]]))?;
    if p[[peak, t]] <= 0.0 {
        return None;
    }
    let estimate = if peak > 0 && peak + 1 < N_MELS && p[[peak - 1, t]] > 0.0 && p[[peak + 1, t]] > 0.0
    {
        let (x0, x1, x2) = (centers[peak - 1], centers[peak], centers[peak + 1]);
        let (y0, y1, y2) = (p[[peak - 1, t]].ln(), p[[peak, t]].ln(), p[[peak + 1, t]].ln());
        parabola_vertex(x0, y0, x1, y1, x2, y2)
            .filter(|v| v.is_finite())
            .map_or(x1, |v| v.clamp(x0, x2))
    } else {
        centers[peak]
    };
    Some(estimate.clamp(PITCH_MIN_HZ, PITCH_MAX_HZ))
}

fn parabola_vertex(x0: f64, y0: f64, x1: f64, y1: f64, x2: f64, y2: f64) -> Option<f64> {
    let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
    let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
    if a >= 0.0 {
        None
    } else {
        Some(-b / (2.0 * a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio_io::CLIP_SAMPLES;
    use crate::dsp::mel_spectrogram;

    fn tone(hz: f64) -> Waveform {
        let s = (0..CLIP_SAMPLES)
            .map(|n| (0.5 * (2.0 * std::f64::consts::PI * hz * n as f64 / 16_000.0).sin()) as f32)
            .collect();
        Waveform::new(s).unwrap()
    }

    fn cues(w: &Waveform) -> CueVector {
        extract_cues(&mel_spectrogram(w), w, None, 6, &VoicingConfig::default()).unwrap()
    }

    #[test]
    fn low_tone_is_not_shrill() {
        let c = cues(&tone(250.0));
        assert!(c.shrillness < 0.05, "{c:?}");
        assert!((c.mean_pitch - 250.0).abs() <= 10.0, "{c:?}");
        assert!(c.pitch_range < 5.0, "{c:?}");
        assert_eq!(c.pause_proportion, 0.0);
    }

    #[test]
    fn high_tone_is_shrill() {
        assert!(cues(&tone(1000.0)).shrillness > 0.95);
    }

    #[test]
    fn silence_is_an_error() {
        let w = Waveform::silence();
        let r = extract_cues(&mel_spectrogram(&w), &w, None, 6, &VoicingConfig::default());
        assert!(matches!(r, Err(RexError::Unvoiced)));
    }

    #[test]
    fn all_true_mask_equals_no_mask() {
        let w = tone(180.0);
        let m = mel_spectrogram(&w);
        let mask = vec![true; m.frames()];
        let cfg = VoicingConfig::default();
        assert_eq!(
            extract_cues(&m, &w, Some(&mask), 6, &cfg).unwrap(),
            extract_cues(&m, &w, None, 6, &cfg).unwrap()
        );
    }

    #[test]
    fn sparse_mask_falls_back() {
        let w = tone(180.0);
        let m = mel_spectrogram(&w);
        let mut mask = vec![false; m.frames()];
        mask[3] = true;
        let cfg = VoicingConfig::default();
        assert_eq!(
            extract_cues(&m, &w, Some(&mask), 6, &cfg).unwrap(),
            extract_cues(&m, &w, None, 6, &cfg).unwrap()
        );
    }

    #[test]
    fn spectral_path_tracks_waveform_path() {
        let w = tone(200.0);
        let m = mel_spectrogram(&w);
        let a = extract_cues(&m, &w, None, 6, &VoicingConfig::default()).unwrap();
        let b = extract_cues_spectral(&m, None, 6, &VoicingConfig::default()).unwrap();
        assert!((a.loudness - b.loudness).abs() / a.loudness < 0.05, "{a:?} {b:?}");
        assert!((a.mean_pitch - b.mean_pitch).abs() < 1.0);
        assert!((a.speaking_rate - b.speaking_rate).abs() < 0.05);
    }
}
