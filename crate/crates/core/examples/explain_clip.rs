//! Pretrains the base CNN on the synthetic corpus, derives the relation
//! table, fine-tunes jointly with the cue heads and explains one test clip
//! against every other emotion.
//!
//! cargo run --release --example explain_clip -- [pretrain_epochs] [joint_epochs]

use rexnet::audio_io::synth_corpus;
use rexnet::dsp::{Cue, VoicingConfig};
use rexnet::relations::{derive_corpus_table, joint_train, JointHyper};
use rexnet::tensornet::{train_classifier, FeatureSet, Hyper, Target};

fn main() -> rexnet::Result<()> {
    env_logger::init();
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let pretrain_epochs = args.first().copied().unwrap_or(15);
    let joint_epochs = args.get(1).copied().unwrap_or(JointHyper::default().epochs);

    let corpus = synth_corpus(7, 16)?;
    let features = FeatureSet::from_corpus(&corpus)?;
    let hyper = Hyper {
        epochs: pretrain_epochs,
        ..Hyper::default()
    };
    let (base, trace) = train_classifier(&corpus, &features, Target::Emotion, &hyper)?;
    if let Some(last) = trace.last() {
        println!("pretrained: train {:.3}, test {:.3}", last.train_accuracy, last.test_accuracy);
    }

    let voicing = VoicingConfig::default();
    let (table, _) = derive_corpus_table(&corpus, &features.spectrograms, &voicing)?;
    let joint = JointHyper {
        epochs: joint_epochs,
        ..JointHyper::default()
    };
    let (rexnet, stats) = joint_train(&corpus, &features, base, &table, None, voicing, &joint)?;
    for s in &stats {
        println!(
            "joint epoch {:2}  initial {:.3}  final {:.3}  relations {:.3}",
            s.epoch, s.initial_accuracy, s.final_accuracy, s.relation_accuracy
        );
    }

    let i = corpus.test_indices()[0];
    let clip = &corpus.clips()[i].meta;
    let mut ctx = rexnet.context(&corpus, &features, None);
    let ex = rexnet.explain(&mut ctx, i)?;
    println!(
        "\n{}: true {}, initial {}, final {}",
        clip.clip_id, clip.emotion, ex.initial, ex.predicted
    );
    for c in &ex.contrasts {
        let Some(e) = &c.evidence else {
            println!("  vs {:9} unavailable: {}", c.contrast.to_string(), c.unavailable.as_deref().unwrap_or(""));
            continue;
        };
        let rel: Vec<String> = Cue::ALL
            .iter()
            .zip(&e.relations)
            .map(|(cue, r)| format!("{} {}", cue.name(), r))
            .collect();
        let truth = rexnet.table.get(ex.predicted, c.contrast);
        let agree = truth.iter().zip(&e.relations).filter(|(a, b)| a == b).count();
        println!("  vs {:9} {} ({agree}/6 match the table)", c.contrast.to_string(), rel.join(", "));
    }
    Ok(())
}
