//! Deterministic tone-burst corpus standing in for recorded speech.
//!
//! Each of the eight classes has its own prosody profile: carrier pitch
//! `120 + 30k` Hz, amplitude `0.2 + 0.1k`, pause fraction `k/16`, a
//! class-specific vibrato depth, harmonic brightness and utterance length.
//! Six energy bursts play the role of words. Four pseudo-actors each add a
//! faint high marker tone, which is what the speaker model learns.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::corpus::{Clip, Corpus};
use super::meta::{ClipMeta, Emotion, Intensity, Statement, WORDS_PER_STATEMENT};
use super::waveform::{Waveform, CLIP_SAMPLES, SAMPLE_RATE};
use crate::error::{Result, RexError};

pub const SYNTH_ACTORS: u8 = 4;

/// Generator parameters of one synthetic class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthProfile {
    pub carrier_hz: f64,
    pub amplitude: f64,
    pub pause_fraction: f64,
    pub vibrato_hz: f64,
    pub brightness: f64,
    pub voiced_s: f64,
}

impl SynthProfile {
    pub fn for_class(emotion: Emotion) -> Self {
        let k = emotion.index() as f64;
        Self {
            carrier_hz: 120.0 + 30.0 * k,
            amplitude: 0.2 + 0.1 * k,
            pause_fraction: k / 16.0,
            vibrato_hz: 6.0 + 4.0 * k,
            brightness: 0.05 + 0.06 * k,
            voiced_s: 2.7 - 0.06 * k,
        }
    }

    /// The profile as a point in the six-cue space (shrillness proxy,
    /// loudness, pitch, pitch range, rate, pauses).
    pub fn cue_point(&self) -> [f64; 6] {
        [
            self.brightness,
            self.amplitude,
            self.carrier_hz,
            self.vibrato_hz,
            WORDS_PER_STATEMENT as f64 / self.voiced_s,
            self.pause_fraction,
        ]
    }
}

const RAMP_S: f64 = 0.015;
const SHORT_GAP_S: f64 = 0.05;
const NOISE_AMPLITUDE: f64 = 0.001;

/// Generates `n_per_class` clips for each of the 8 classes.
pub fn synth_corpus(seed: u64, n_per_class: usize) -> Result<Corpus> {
    if n_per_class < 2 {
        return Err(RexError::InvalidArgument(
            "synthetic corpus needs at least 2 clips per class".into(),
        ));
    }
    let mut clips = Vec::with_capacity(8 * n_per_class);
    for emotion in Emotion::ALL {
        for i in 0..n_per_class {
            clips.push(synth_clip(seed, emotion, i)?);
        }
    }
    Ok(Corpus::new(clips, seed))
}

fn clip_rng(seed: u64, emotion: Emotion, i: usize) -> ChaCha8Rng {
    let mix = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((emotion.index() as u64) << 32)
        .wrapping_add(i as u64);
    ChaCha8Rng::seed_from_u64(mix)
}

pub fn synth_clip(seed: u64, emotion: Emotion, i: usize) -> Result<Clip> {
    let actor = (i % SYNTH_ACTORS as usize) as u8 + 1;
    let statement = if (i / 4) % 2 == 0 {
        Statement::Kids
    } else {
        Statement::Dogs
    };
    let repetition = ((i / 8) % 2) as u8 + 1;
    let intensity = if emotion == Emotion::Neutral || (i / 16) % 2 == 0 {
        Intensity::Normal
    } else {
        Intensity::Strong
    };
    let meta = ClipMeta {
        clip_id: format!("syn-{:02}-{:03}", emotion.code(), i),
        actor,
        emotion,
        intensity,
        statement,
        repetition,
        word_count: WORDS_PER_STATEMENT,
    };
    let mut rng = clip_rng(seed, emotion, i);
    let samples = render(&SynthProfile::for_class(emotion), actor, &mut rng);
    Ok(Clip {
        meta,
        waveform: Waveform::new(samples)?,
        source: None,
    })
}

fn render(profile: &SynthProfile, actor: u8, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let sr = SAMPLE_RATE as f64;
    let carrier = profile.carrier_hz * (1.0 + rng.random_range(-0.015..0.015));
    let amplitude = profile.amplitude * (1.0 + rng.random_range(-0.05..0.05));
    let voiced = profile.voiced_s * (1.0 + rng.random_range(-0.02..0.02));
    let vib_phase = rng.random_range(0.0..2.0 * PI);
    let marker_hz = 1500.0 + 700.0 * actor as f64;

    // Pause time sits in two long gaps (after words 2 and 4); the other
    // three word boundaries get short dips.
    let long_gap = profile.pause_fraction * voiced / 2.0;
    let gaps = [SHORT_GAP_S, long_gap, SHORT_GAP_S, long_gap, SHORT_GAP_S];
    let word_total = voiced - gaps.iter().sum::<f64>();
    let mut weights: Vec<f64> = (0..WORDS_PER_STATEMENT)
        .map(|_| 1.0 + rng.random_range(-0.1..0.1))
        .collect();
    let wsum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w *= word_total / wsum;
    }

    let start = (CLIP_SAMPLES as f64 / sr - voiced) / 2.0;
    let mut words = Vec::with_capacity(WORDS_PER_STATEMENT);
    let mut t = start;
    for (w, len) in weights.iter().enumerate() {
        words.push((t, t + len));
        t += len;
        if w < gaps.len() {
            t += gaps[w];
        }
    }

    let h2 = 0.35;
    let h4 = profile.brightness;
    let marker = 0.08;
    let norm = 1.0 + h2 + h4 + marker;
    let mut phase = 0.0f64;
    let mut out = Vec::with_capacity(CLIP_SAMPLES);
    for n in 0..CLIP_SAMPLES {
        let t = n as f64 / sr;
        let f = carrier + profile.vibrato_hz * (2.0 * PI * 2.0 * t + vib_phase).sin();
        phase += 2.0 * PI * f / sr;
        let env = words
            .iter()
            .map(|&(a, b)| envelope(t, a, b))
            .fold(0.0, f64::max);
        let tone = if env > 0.0 {
            (phase.sin()
                + h2 * (2.0 * phase).sin()
                + h4 * (4.0 * phase).sin()
                + marker * (2.0 * PI * marker_hz * t).sin())
                / norm
        } else {
            0.0
        };
        let noise = NOISE_AMPLITUDE * rng.random_range(-1.0..1.0);
        out.push((amplitude * env * tone + noise).clamp(-1.0, 1.0) as f32);
    }
    out
}

fn envelope(t: f64, a: f64, b: f64) -> f64 {
    if t < a || t > b {
        return 0.0;
    }
    let rise = ((t - a) / RAMP_S).min(1.0);
    let fall = ((b - t) / RAMP_S).min(1.0);
    let x = rise.min(fall);
    0.5 * (1.0 - (PI * x).cos())
}
