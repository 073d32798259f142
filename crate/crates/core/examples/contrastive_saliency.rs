//! Trains a small emotion CNN, then shows how Grad-CAM of the predicted
//! class changes once it is discounted by another class (pairwise) or by
//! all others (total), as a word-aligned bar.
//!
//! cargo run --release --example contrastive_saliency -- [epochs] [contrast]

use rexnet::audio_io::{synth_corpus, Emotion};
use rexnet::dsp::{segment_words, VoicingConfig};
use rexnet::saliency::{pairwise_contrastive, to_time_bar, total_contrastive, SaliencyBar};
use rexnet::tensornet::{grad_cam_all, train_classifier, FeatureSet, Hyper, Target};

const SHADES: &[char] = &[' ', '.', ':', '-', '=', '+', '*', '#', '%', '@'];

fn strip(bar: &SaliencyBar) -> String {
    // 297 frames squeezed into 99 characters.
    bar.per_frame
        .chunks(3)
        .map(|c| {
            let v = c.iter().sum::<f64>() / c.len() as f64;
            SHADES[((v * (SHADES.len() - 1) as f64).round() as usize).min(SHADES.len() - 1)]
        })
        .collect()
}

fn main() -> rexnet::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let epochs = args.first().and_then(|a| a.parse().ok()).unwrap_or(6);
    let corpus = synth_corpus(7, 16)?;
    let features = FeatureSet::from_corpus(&corpus)?;
    let (model, trace) = train_classifier(&corpus, &features, Target::Emotion, &Hyper { epochs, ..Hyper::default() })?;
    println!("test accuracy {:.3}", trace.last().map_or(0.0, |s| s.test_accuracy));

    let i = corpus.test_indices()[0];
    let clip = &corpus.clips()[i];
    let t = model.forward(&features.inputs[i])?;
    let predicted = Emotion::ALL[t.predicted()];
    let contrast: Emotion = match args.get(1) {
        Some(name) => name.parse()?,
        None => predicted.contrasts().next().expect("seven contrasts"),
    };
    if contrast == predicted {
        return Err(rexnet::RexError::SelfContrast(predicted.to_string()));
    }
    let maps = grad_cam_all(&model, &t);
    let spans = segment_words(&clip.waveform, clip.meta.word_count, &VoicingConfig::default())?;
    let others: Vec<_> = maps.iter().filter(|m| m.class_index != predicted).cloned().collect();
    let rows = [
        (format!("{predicted} (absolute)"), to_time_bar(&maps[predicted.index()], &spans)),
        (
            format!("{predicted} vs {contrast}"),
            to_time_bar(&pairwise_contrastive(&maps[predicted.index()], &maps[contrast.index()])?, &spans),
        ),
        (format!("{predicted} vs all"), to_time_bar(&total_contrastive(&maps[predicted.index()], &others)?, &spans)),
    ];
    println!("{} labelled {}, predicted {predicted}", clip.meta.clip_id, clip.meta.emotion);
    for (label, bar) in &rows {
        println!("{label:>22} |{}|", strip(bar));
        let words: Vec<String> = bar.word_spans.iter().map(|w| format!("{:.2}", w.mean_saliency)).collect();
        println!("{:>22}  word means {}", "", words.join(" "));
    }
    Ok(())
}
