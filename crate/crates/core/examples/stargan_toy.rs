//! Trains the toy StarGAN on the synthetic corpus and reports the cycle
//! similarity trace and how often the domain classifier recognises the
//! requested class in generated spectrograms.
//!
//! cargo run --example stargan_toy -- [epochs] [learning_rate] [classifier_epochs] [seed] [disc_learning_rate]

use rexnet::audio_io::synth_corpus;
use rexnet::counterfactual::{cycle_report, synthetic_class_accuracy, train_stargan, GanHyper};
use rexnet::tensornet::{labels_for, FeatureSet, Target};

fn main() -> rexnet::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let epochs = args.first().and_then(|a| a.parse().ok()).unwrap_or(10);
    let defaults = GanHyper::default();
    let learning_rate = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(defaults.learning_rate);
    let corpus = synth_corpus(7, 16)?;
    let features = FeatureSet::from_corpus(&corpus)?;
    let classifier_epochs = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(defaults.classifier_epochs);
    let seed = args.get(3).and_then(|a| a.parse().ok()).unwrap_or(defaults.seed);
    let disc_learning_rate = args.get(4).and_then(|a| a.parse().ok()).unwrap_or(defaults.disc_learning_rate);
    let hyper = GanHyper {
        epochs,
        learning_rate,
        disc_learning_rate,
        classifier_epochs,
        seed,
        ..defaults
    };
    let started = std::time::Instant::now();
    let (gan, m_trace, trace) = train_stargan(&corpus, &features, &hyper)?;
    let m_acc = m_trace.last().map_or(0.0, |s| s.test_accuracy);
    println!("domain classifier test accuracy {m_acc:.3}");
    for s in &trace {
        println!(
            "epoch {:2}  d {:.3}  adv {:.3}  cls {:.3}  cyc {:.4}  cycle similarity {:.4}",
            s.epoch, s.d_loss, s.g_adv, s.g_cls, s.g_cyc, s.cycle_similarity
        );
    }
    let (labels, _) = labels_for(&corpus, Target::Emotion);
    let acc = synthetic_class_accuracy(&gan, &features.inputs, &labels, &corpus.test_indices())?;
    let cycle = cycle_report(&gan, &features.inputs, &labels, &corpus.test_indices(), 11)?;
    println!(
        "similarity to the original: converted {:.4}, reconstructed {:.4}",
        cycle.converted, cycle.reconstructed
    );
    println!("classifier agrees with requested class on {acc:.3} of synthetics (chance 0.125)");
    println!("elapsed {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}
