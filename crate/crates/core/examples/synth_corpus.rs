//! Generates the tone-burst corpus, prints each class's prosody profile
//! and split sizes, and writes one WAV per class.
//!
//! cargo run --example synth_corpus -- [out_dir] [n_per_class]

use std::path::PathBuf;

use rexnet::audio_io::{synth_corpus, Emotion, Split, SynthProfile};

fn main() -> rexnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "synth_wavs".into()));
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(16);
    let corpus = synth_corpus(7, n)?;
    println!(
        "{} clips, {} train / {} test, actors {:?}",
        corpus.len(),
        corpus.train_indices().len(),
        corpus.test_indices().len(),
        corpus.actors()
    );
    println!("{:10} {:>8} {:>6} {:>6} {:>8} {:>7}", "class", "pitch", "amp", "pause", "vibrato", "voiced");
    for e in Emotion::ALL {
        let p = SynthProfile::for_class(e);
        println!(
            "{:10} {:>8.0} {:>6.2} {:>6.3} {:>8.1} {:>7.2}",
            e.to_string(),
            p.carrier_hz,
            p.amplitude,
            p.pause_fraction,
            p.vibrato_hz,
            p.voiced_s
        );
    }
    std::fs::create_dir_all(&out).map_err(|e| rexnet::RexError::InvalidArgument(e.to_string()))?;
    for e in Emotion::ALL {
        let clip = corpus.clips().iter().find(|c| c.meta.emotion == e).expect("every class present");
        let path = out.join(format!("{}.wav", clip.meta.clip_id));
        clip.waveform.write_wav(&path)?;
        let split = corpus.split_of(&clip.meta.clip_id).unwrap_or(Split::Train);
        println!("wrote {} ({e}, actor {}, {split:?})", path.display(), clip.meta.actor);
    }
    Ok(())
}
