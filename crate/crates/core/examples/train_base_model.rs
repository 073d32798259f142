//! Trains the emotion CNN on the synthetic corpus and prints the
//! per-epoch trace.
//!
//! cargo run --example train_base_model -- [n_per_class] [epochs]

use rexnet::audio_io::synth_corpus;
use rexnet::tensornet::{train_classifier, FeatureSet, Hyper, Target};

fn main() -> rexnet::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(16);
    let epochs = args.get(1).copied().unwrap_or(15);
    let corpus = synth_corpus(7, n)?;
    let features = FeatureSet::from_corpus(&corpus)?;
    let hyper = Hyper { epochs, ..Hyper::default() };
    let started = std::time::Instant::now();
    let (_, trace) = train_classifier(&corpus, &features, Target::Emotion, &hyper)?;
    for s in &trace {
        println!(
            "epoch {:2}  loss {:.4}  train {:.3}  test {:.3}",
            s.epoch, s.train_loss, s.train_accuracy, s.test_accuracy
        );
    }
    let (_, speaker) = train_classifier(&corpus, &features, Target::Speaker, &Hyper { epochs: 5, ..hyper })?;
    println!("speaker test accuracy after 5 epochs: {:.3}", speaker.last().map_or(0.0, |s| s.test_accuracy));
    println!("elapsed {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}
