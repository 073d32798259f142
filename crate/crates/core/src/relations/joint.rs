//! Joint fine-tuning of the base CNN with `M_y` and `M_r`.
//!
//! Counterfactual cue differences are computed once with the pretrained
//! base model. Each epoch starts by re-embedding the counterfactuals, which
//! are then held fixed; gradients reach the base model through the target
//! embedding and its own logits.

use log::info;
use ndarray::{s, Array1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::chain::{slot_diffs, CounterfactualRef, CueContext, PairCues, RexNet};
use super::heads::{mr_input, my_input, weighted_cue_diffs, CueScale, HeadsModel, MR_OUTPUTS};
use super::nnrank::{decode_relations, encode_relations};
use super::table::RelationTable;
use crate::audio_io::{Corpus, Emotion, NUM_EMOTIONS};
use crate::counterfactual::StarGan;
use crate::dsp::{VoicingConfig, NUM_CUES};
use crate::error::{Result, RexError};
use crate::saliency::DEFAULT_SALIENCY_THRESHOLD;
use crate::tensornet::{
    argmax, bce_with_logits, cross_entropy, labels_for, sigmoid, CnnModel, FeatureSet, Parameterized, Sgd, Target,
    EMBEDDING_DIM,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JointHyper {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Frame saliency threshold for cue masking.
    pub tau: f64,
    pub seed: u64,
}

impl Default for JointHyper {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 16,
            learning_rate: 0.005,
            momentum: 0.9,
            tau: DEFAULT_SALIENCY_THRESHOLD,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointEpochStats {
    pub epoch: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub relation_loss: f64,
    pub initial_accuracy: f64,
    pub final_accuracy: f64,
    /// Fraction of decoded cue relations matching the table.
    pub relation_accuracy: f64,
}

struct Prepared {
    index: usize,
    label: usize,
    own: Emotion,
    diffs: [[f64; NUM_CUES]; NUM_EMOTIONS],
    pairs: Vec<(Emotion, [f64; NUM_CUES], CounterfactualRef)>,
}

/// Standard deviation of each cue over the training clips.
pub fn fit_cue_scale(ctx: &mut CueContext<'_>) -> Result<CueScale> {
    let mut cues = Vec::new();
    for i in ctx.corpus.train_indices() {
        match ctx.plain_cues(i) {
            Ok(c) => cues.push(c),
            Err(RexError::Unvoiced) => continue,
            Err(e) => return Err(e),
        }
    }
    CueScale::fit(&cues)
}

fn prepare(ctx: &mut CueContext<'_>, labels: &[usize], train: &[usize]) -> Result<Vec<Prepared>> {
    let mut out = Vec::with_capacity(train.len());
    for &i in train {
        let own = ctx.view(i)?.initial;
        let slots: Vec<Option<PairCues>> = ctx.slots(i, own)?;
        let pairs = slots
            .iter()
            .flatten()
            .map(|p| (p.contrast, p.diff, p.counterfactual))
            .collect();
        out.push(Prepared {
            index: i,
            label: labels[i],
            own,
            diffs: slot_diffs(&slots),
            pairs,
        });
    }
    Ok(out)
}

/// Counterfactual embeddings under the current base model, per prepared
/// clip and contrast.
fn embed_counterfactuals(
    base: &CnnModel,
    features: &FeatureSet,
    gan: Option<&StarGan>,
    prepared: &[Prepared],
) -> Result<Vec<Vec<Array1<f64>>>> {
    let mut clip_cache: Vec<Option<Array1<f64>>> = vec![None; features.inputs.len()];
    let mut out = Vec::with_capacity(prepared.len());
    for p in prepared {
        let mut zs = Vec::with_capacity(p.pairs.len());
        for (gamma, _, cf) in &p.pairs {
            let z = match (cf, gan) {
                (CounterfactualRef::Sample { index }, _) => {
                    if clip_cache[*index].is_none() {
                        clip_cache[*index] = Some(base.forward(&features.inputs[*index])?.embedding);
                    }
                    clip_cache[*index].clone().expect("filled above")
                }
                (CounterfactualRef::Synthetic, Some(gan)) => {
                    let x = &features.inputs[p.index];
                    let log_power = gan.g.forward(x, gamma.index(), &gan.norm).output;
                    base.forward(&features.norm.apply(&log_power))?.embedding
                }
                (CounterfactualRef::Synthetic, None) => {
                    return Err(RexError::InvalidArgument("synthetic counterfactual without a generator".into()))
                }
            };
            zs.push(z);
        }
        out.push(zs);
    }
    Ok(out)
}

/// Fine-tunes `base` together with fresh heads. `gan` switches the
/// counterfactual source from real samples to generator synthetics.
pub fn joint_train(
    corpus: &Corpus,
    features: &FeatureSet,
    base: CnnModel,
    table: &RelationTable,
    gan: Option<&StarGan>,
    voicing_config: VoicingConfig,
    hyper: &JointHyper,
) -> Result<(RexNet, Vec<JointEpochStats>)> {
    let (labels, _) = labels_for(corpus, Target::Emotion);
    let train = corpus.train_indices();
    let placeholder = CueScale {
        std: [1.0; NUM_CUES],
    };
    let (scale, prepared) = {
        let mut ctx = CueContext::new(corpus, features, &base, gan, placeholder, hyper.tau, voicing_config);
        let scale = fit_cue_scale(&mut ctx)?;
        ctx.scale = scale.clone();
        let prepared = prepare(&mut ctx, &labels, &train)?;
        (scale, prepared)
    };
    info!("prepared {} clips for joint training", prepared.len());

    let mut base = base;
    let mut heads = HeadsModel::new(hyper.seed ^ 0x4ead);
    let mut base_opt = Sgd::new(&base, hyper.learning_rate, hyper.momentum);
    let mut heads_opt = Sgd::new(&heads, hyper.learning_rate, hyper.momentum);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed ^ 0x10117);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut stats = Vec::with_capacity(hyper.epochs);
    let cue_slots = NUM_EMOTIONS * NUM_CUES;

    for epoch in 0..hyper.epochs {
        let z_cf = embed_counterfactuals(&base, features, gan, &prepared)?;
        order.shuffle(&mut rng);
        let (mut l0_sum, mut l1_sum, mut l2_sum) = (0.0, 0.0, 0.0);
        let (mut hits0, mut hits1, mut rel_hits, mut rel_total) = (0usize, 0usize, 0usize, 0usize);
        for batch in order.chunks(hyper.batch_size) {
            let mut base_grad = base.zeroed();
            let mut heads_grad = heads.zeroed();
            for &k in batch {
                let p = &prepared[k];
                let t = base.forward(&features.inputs[p.index])?;
                let (l0, d0) = cross_entropy(t.logits.view(), p.label);
                hits0 += usize::from(t.predicted() == p.label);

                let z = &t.embedding;
                let my_in = my_input(&p.diffs, p.own, z);
                let my_t = heads.m_y.forward(my_in.view());
                let (l1, d1) = cross_entropy(my_t.output.view(), p.label);
                let explained = argmax(my_t.output.view());
                hits1 += usize::from(explained == p.label);
                let d_my_in = heads.m_y.backward(&my_t, d1.view(), &mut heads_grad.m_y);
                let mut dz = d_my_in.slice(s![cue_slots..]).to_owned();

                let attributions = heads.cue_attributions(&my_in, Emotion::ALL[explained]);
                let weight = 1.0 / p.pairs.len().max(1) as f64;
                let mut l2 = 0.0;
                for ((gamma, diff, _), zc) in p.pairs.iter().zip(&z_cf[k]) {
                    let truth = table.get(Emotion::ALL[p.label], *gamma);
                    let bits = Array1::from_vec(encode_relations(&truth).to_vec());
                    let weighted = weighted_cue_diffs(diff, &attributions[gamma.index()]);
                    let mr_t = heads.m_r.forward(mr_input(&weighted, z, zc).view());
                    let (loss, d2) = bce_with_logits(mr_t.output.view(), bits.view());
                    l2 += weight * loss;
                    let d_mr_in = heads
                        .m_r
                        .backward(&mr_t, (&d2 * weight).view(), &mut heads_grad.m_r);
                    dz += &d_mr_in.slice(s![2 * NUM_CUES..2 * NUM_CUES + EMBEDDING_DIM]);
                    let probs: Vec<f64> = mr_t.output.iter().map(|&v| sigmoid(v)).collect();
                    let decoded = decode_relations(&probs);
                    rel_hits += decoded.iter().zip(&truth).filter(|(a, b)| a == b).count();
                    rel_total += NUM_CUES;
                }
                debug_assert_eq!(MR_OUTPUTS, 2 * NUM_CUES);

                base.backward(&t, d0.view(), Some(dz.view()), &mut base_grad);
                let total = l0 + l1 + l2;
                if !total.is_finite() {
                    return Err(RexError::Diverged(format!("joint loss became {total} at epoch {epoch}")));
                }
                l0_sum += l0;
                l1_sum += l1;
                l2_sum += l2;
            }
            let n = batch.len() as f64;
            base_grad.scale(1.0 / n);
            heads_grad.scale(1.0 / n);
            base_opt.step(&mut base, &base_grad);
            heads_opt.step(&mut heads, &heads_grad);
        }
        let n = prepared.len().max(1) as f64;
        let s = JointEpochStats {
            epoch,
            initial_loss: l0_sum / n,
            final_loss: l1_sum / n,
            relation_loss: l2_sum / n,
            initial_accuracy: hits0 as f64 / n,
            final_accuracy: hits1 as f64 / n,
            relation_accuracy: rel_hits as f64 / rel_total.max(1) as f64,
        };
        info!(
            "joint epoch {epoch}: ce0 {:.3} ce {:.3} bce {:.3} acc0 {:.3} acc {:.3} rel {:.3}",
            s.initial_loss, s.final_loss, s.relation_loss, s.initial_accuracy, s.final_accuracy, s.relation_accuracy
        );
        stats.push(s);
    }
    let rexnet = RexNet {
        base,
        heads,
        table: table.clone(),
        scale,
        tau: hyper.tau,
        voicing_config,
    };
    Ok((rexnet, stats))
}
