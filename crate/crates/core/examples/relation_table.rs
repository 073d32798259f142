//! Derives the cue relation table from the generated corpus (Welch tests
//! on actor-centred cues) and prints it one target emotion per block.
//!
//! cargo run --release --example relation_table -- [n_per_class]

use rexnet::audio_io::{synth_corpus, Emotion};
use rexnet::dsp::{mel_spectrogram, Cue, VoicingConfig};
use rexnet::relations::{derive_corpus_table, reference_vs_happy, Relation};

fn symbol(r: Relation) -> &'static str {
    match r {
        Relation::Lower => "L",
        Relation::Similar => "=",
        Relation::Higher => "H",
    }
}

fn main() -> rexnet::Result<()> {
    let n = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(16);
    let corpus = synth_corpus(7, n)?;
    let specs: Vec<_> = corpus.clips().iter().map(|c| mel_spectrogram(&c.waveform)).collect();
    let (table, cues) = derive_corpus_table(&corpus, &specs, &VoicingConfig::default())?;
    println!("{} clips, {} unvoiced", cues.len(), cues.iter().filter(|c| c.is_none()).count());
    let header: Vec<String> = Emotion::ALL.iter().map(|e| format!("{:>4}", &e.name()[..3])).collect();
    for cue in Cue::ALL {
        println!("\n{} (row = target, column = contrast)", cue.label());
        println!("{:10}{}", "", header.join(""));
        for target in Emotion::ALL {
            let row: Vec<String> = Emotion::ALL
                .iter()
                .map(|&c| format!("{:>4}", symbol(table.get(target, c)[cue as usize])))
                .collect();
            println!("{:10}{}", target.to_string(), row.join(""));
        }
    }
    // Recorded-speech reference against happy, for comparison.
    println!("\nvs happy: derived / recorded-speech reference");
    for target in Emotion::ALL {
        let derived: String = table.get(target, Emotion::Happy).iter().map(|&r| symbol(r)).collect();
        let reference: String = reference_vs_happy(target).iter().map(|&r| symbol(r)).collect();
        println!("{:10} {derived} / {reference}", target.to_string());
    }
    Ok(())
}
