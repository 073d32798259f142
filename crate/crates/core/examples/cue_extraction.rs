//! Extracts the six prosody cues and the word segmentation of a WAV file,
//! or of one generated clip per class when no file is given.
//!
//! cargo run --example cue_extraction -- [clip.wav] [word_count]

use rexnet::audio_io::{read_wav, standardize, synth_corpus, Emotion, Waveform};
use rexnet::dsp::{extract_cues, mel_spectrogram, segment_words, Cue, VoicingConfig};

fn report(label: &str, w: &Waveform, words: usize) -> rexnet::Result<()> {
    let cfg = VoicingConfig::default();
    let cues = extract_cues(&mel_spectrogram(w), w, None, words, &cfg)?;
    let parts: Vec<String> = Cue::ALL
        .iter()
        .map(|&c| format!("{} {:.3}", c.name(), cues.get(c)))
        .collect();
    println!("{label}: {}", parts.join(", "));
    let spans = segment_words(w, words, &cfg)?;
    let spans: Vec<String> = spans.iter().map(|s| format!("{:.2}-{:.2}", s.start_s, s.end_s)).collect();
    println!("  words: {}", spans.join(" "));
    Ok(())
}

fn main() -> rexnet::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if let Some(path) = args.first() {
        let words = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(6);
        let (raw, rate) = read_wav(path.as_ref())?;
        return report(path, &standardize(&raw, rate)?, words);
    }
    let corpus = synth_corpus(7, 4)?;
    for e in Emotion::ALL {
        let clip = corpus.clips().iter().find(|c| c.meta.emotion == e).expect("every class present");
        report(&format!("{:9} {}", e.to_string(), clip.meta.clip_id), &clip.waveform, clip.meta.word_count)?;
    }
    Ok(())
}
