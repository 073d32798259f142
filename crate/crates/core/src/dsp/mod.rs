//! Spectrograms, voicing analysis and prosody cues.

mod cues;
mod mel;
mod voicing;

pub use cues::{
    extract_cues, extract_cues_spectral, extract_cues_with_voicing, frame_f0, mel_frame_center_s,
    Cue, CueVector, MIN_SALIENT_FRAMES, NUM_CUES, PITCH_MAX_HZ, PITCH_MIN_HZ, SHRILL_CUTOFF_HZ,
};
pub use mel::{
    hz_to_mel, mel_centers_hz, mel_spectrogram, mel_to_hz, MelSpectrogram, HOP, N_FFT, N_FRAMES,
    N_MELS, WINDOW,
};
pub use voicing::{
    analyze_track, analyze_waveform, detect_pauses, percentile, segment_voicing, segment_words,
    EnergyTrack, Span, Voicing, VoicingConfig, ENERGY_FRAME, ENERGY_HOP,
};
