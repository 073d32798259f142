//! The explanation chain for one clip: base prediction, pairwise contrastive
//! saliency, counterfactual cues, final prediction from `M_y` and cue
//! relations from `M_r`.

use std::collections::HashMap;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::heads::{cue_differences, mr_input, my_input, weighted_cue_diffs, CueScale, HeadsModel};
use super::nnrank::decode_relations;
use super::table::{CueRelationVector, RelationTable};
use crate::audio_io::{Corpus, Emotion, NUM_EMOTIONS};
use crate::counterfactual::{select_peer, StarGan};
use crate::dsp::{
    analyze_waveform, extract_cues_spectral, extract_cues_with_voicing, segment_voicing, CueVector, MelSpectrogram,
    Span, Voicing, VoicingConfig, NUM_CUES,
};
use crate::error::{Result, RexError};
use crate::saliency::{bar_from_profile, frame_profile, mask_from_bar, pairwise_contrastive, SaliencyBar};
use crate::tensornet::{argmax, grad_cam_all, sigmoid, softmax, CnnModel, FeatureSet};

/// What the base model sees in one clip.
#[derive(Debug, Clone)]
pub struct ClipView {
    pub initial: Emotion,
    pub probabilities: Array1<f64>,
    pub embedding: Array1<f64>,
    /// Normalised frame profile of the pairwise contrastive map for every
    /// ordered `(fact, contrast)` pair, `fact * 8 + contrast`; empty on the
    /// diagonal.
    profiles: Vec<Vec<f64>>,
}

impl ClipView {
    pub fn analyze(model: &CnnModel, input: &ndarray::Array2<f64>) -> Result<Self> {
        let trace = model.forward(input)?;
        let maps = grad_cam_all(model, &trace);
        let mut profiles = vec![Vec::new(); NUM_EMOTIONS * NUM_EMOTIONS];
        for a in 0..NUM_EMOTIONS {
            for b in 0..NUM_EMOTIONS {
                if a != b {
                    profiles[a * NUM_EMOTIONS + b] = frame_profile(&pairwise_contrastive(&maps[a], &maps[b])?);
                }
            }
        }
        Ok(Self {
            initial: Emotion::ALL[trace.predicted()],
            probabilities: trace.probabilities(),
            embedding: trace.embedding,
            profiles,
        })
    }

    pub fn profile(&self, fact: Emotion, contrast: Emotion) -> &[f64] {
        &self.profiles[fact.index() * NUM_EMOTIONS + contrast.index()]
    }

    pub fn mask(&self, fact: Emotion, contrast: Emotion, tau: f64) -> Vec<bool> {
        mask_from_bar(self.profile(fact, contrast), tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CounterfactualRef {
    /// Corpus index of a real clip.
    Sample { index: usize },
    /// Generator output for the target clip.
    Synthetic,
}

/// Cue comparison of a clip against one counterfactual.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCues {
    pub contrast: Emotion,
    pub counterfactual: CounterfactualRef,
    pub target: CueVector,
    pub counterfactual_cues: CueVector,
    pub diff: [f64; NUM_CUES],
    /// Base-model embedding of the counterfactual.
    pub z_contrast: Array1<f64>,
}

/// Lazily computed views, voicing analyses and cues for one base model.
pub struct CueContext<'a> {
    pub corpus: &'a Corpus,
    pub features: &'a FeatureSet,
    pub model: &'a CnnModel,
    pub gan: Option<&'a StarGan>,
    pub scale: CueScale,
    pub tau: f64,
    pub voicing_config: VoicingConfig,
    views: HashMap<usize, ClipView>,
    voicings: HashMap<usize, Voicing>,
    cues: HashMap<(usize, usize), Result<CueVector>>,
}

impl<'a> CueContext<'a> {
    pub fn new(
        corpus: &'a Corpus,
        features: &'a FeatureSet,
        model: &'a CnnModel,
        gan: Option<&'a StarGan>,
        scale: CueScale,
        tau: f64,
        voicing_config: VoicingConfig,
    ) -> Self {
        Self {
            corpus,
            features,
            model,
            gan,
            scale,
            tau,
            voicing_config,
            views: HashMap::new(),
            voicings: HashMap::new(),
            cues: HashMap::new(),
        }
    }

    pub fn view(&mut self, i: usize) -> Result<&ClipView> {
        if !self.views.contains_key(&i) {
            let v = ClipView::analyze(self.model, &self.features.inputs[i])?;
            self.views.insert(i, v);
        }
        Ok(&self.views[&i])
    }

    pub fn voicing(&mut self, i: usize) -> &Voicing {
        let cfg = self.voicing_config;
        let corpus = self.corpus;
        self.voicings
            .entry(i)
            .or_insert_with(|| analyze_waveform(&corpus.clips()[i].waveform, &cfg))
    }

    /// Word spans of clip `i`, empty when segmentation fails.
    pub fn word_spans(&mut self, i: usize) -> Vec<Span> {
        let words = self.corpus.clips()[i].meta.word_count;
        let cfg = self.voicing_config;
        segment_voicing(self.voicing(i), words, &cfg).unwrap_or_default()
    }

    /// Cues of clip `i` over the whole voiced region.
    pub fn plain_cues(&mut self, i: usize) -> Result<CueVector> {
        self.masked_cues(i, None)
    }

    fn masked_cues(&mut self, i: usize, pair: Option<(Emotion, Emotion)>) -> Result<CueVector> {
        let key = (i, pair.map_or(usize::MAX, |(a, b)| a.index() * NUM_EMOTIONS + b.index()));
        if let Some(c) = self.cues.get(&key) {
            return clone_result(c);
        }
        let tau = self.tau;
        let mask = match pair {
            Some((a, b)) => Some(self.view(i)?.mask(a, b, tau)),
            None => None,
        };
        let clip = &self.corpus.clips()[i];
        let spec = &self.features.spectrograms[i];
        let words = clip.meta.word_count;
        let c = if self.gan.is_some() {
            extract_cues_spectral(spec, mask.as_deref(), words, &self.voicing_config)
        } else {
            let v = self.voicing(i).clone();
            extract_cues_with_voicing(spec, &clip.waveform, &v, mask.as_deref(), words)
        };
        let out = clone_result(&c);
        self.cues.insert(key, c);
        out
    }

    /// Compares clip `i`, explained as `fact`, with a counterfactual of
    /// emotion `contrast`.
    pub fn pair(&mut self, i: usize, fact: Emotion, contrast: Emotion) -> Result<PairCues> {
        if fact == contrast {
            return Err(RexError::SelfContrast(fact.to_string()));
        }
        let target = self.masked_cues(i, Some((fact, contrast)))?;
        let (counterfactual, cf_cues, z_contrast) = match self.gan {
            None => {
                let j = select_peer(self.corpus, &self.corpus.clips()[i].meta, contrast)?;
                let cues = self.masked_cues(j, Some((contrast, fact)))?;
                let z = self.view(j)?.embedding.clone();
                (CounterfactualRef::Sample { index: j }, cues, z)
            }
            Some(gan) => {
                let log_power = gan.g.forward(&self.features.inputs[i], contrast.index(), &gan.norm).output;
                let input = self.features.norm.apply(&log_power);
                let view = ClipView::analyze(self.model, &input)?;
                let spec = MelSpectrogram::from_log_power(&log_power)?;
                let mask = view.mask(contrast, fact, self.tau);
                let words = self.corpus.clips()[i].meta.word_count;
                let cues = extract_cues_spectral(&spec, Some(&mask), words, &self.voicing_config)?;
                (CounterfactualRef::Synthetic, cues, view.embedding)
            }
        };
        Ok(PairCues {
            contrast,
            counterfactual,
            diff: cue_differences(&target, &cf_cues, &self.scale),
            target,
            counterfactual_cues: cf_cues,
            z_contrast,
        })
    }

    /// Cue-difference slots for `M_y`, explaining clip `i` as `fact`.
    /// Missing counterfactuals leave their slot at zero.
    pub fn slots(&mut self, i: usize, fact: Emotion) -> Result<Vec<Option<PairCues>>> {
        let mut out = Vec::with_capacity(NUM_EMOTIONS);
        for gamma in Emotion::ALL {
            if gamma == fact {
                out.push(None);
                continue;
            }
            match self.pair(i, fact, gamma) {
                Ok(p) => out.push(Some(p)),
                Err(RexError::NoCounterfactual { .. }) | Err(RexError::Unvoiced) => out.push(None),
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }
}

fn clone_result(r: &Result<CueVector>) -> Result<CueVector> {
    match r {
        Ok(c) => Ok(*c),
        Err(RexError::Unvoiced) => Err(RexError::Unvoiced),
        Err(e) => Err(RexError::InvalidArgument(e.to_string())),
    }
}

pub fn slot_diffs(slots: &[Option<PairCues>]) -> [[f64; NUM_CUES]; NUM_EMOTIONS] {
    let mut out = [[0.0; NUM_CUES]; NUM_EMOTIONS];
    for (o, s) in out.iter_mut().zip(slots) {
        if let Some(p) = s {
            *o = p.diff;
        }
    }
    out
}

/// Trained chain: base CNN, heads, ground-truth table and the cue scale.
#[derive(Debug, Clone, PartialEq)]
pub struct RexNet {
    pub base: CnnModel,
    pub heads: HeadsModel,
    pub table: RelationTable,
    pub scale: CueScale,
    pub tau: f64,
    pub voicing_config: VoicingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEvidence {
    pub counterfactual: CounterfactualRef,
    pub target_cues: CueVector,
    pub counterfactual_cues: CueVector,
    pub cue_differences: [f64; NUM_CUES],
    /// LRP relevance of this contrast's cue differences for the final class.
    pub attributions: [f64; NUM_CUES],
    /// Sigmoid outputs of `M_r`, two ordinal bits per cue.
    pub relation_probabilities: Vec<f64>,
    pub relations: CueRelationVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastExplanation {
    pub contrast: Emotion,
    pub saliency: SaliencyBar,
    pub evidence: Option<PairEvidence>,
    /// Why `evidence` is missing.
    pub unavailable: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub clip: usize,
    pub initial: Emotion,
    pub initial_probabilities: Vec<f64>,
    pub predicted: Emotion,
    pub probabilities: Vec<f64>,
    /// One entry per emotion other than `predicted`, in class order.
    pub contrasts: Vec<ContrastExplanation>,
}

impl Explanation {
    pub fn contrast(&self, gamma: Emotion) -> Option<&ContrastExplanation> {
        self.contrasts.iter().find(|c| c.contrast == gamma)
    }
}

impl RexNet {
    pub fn context<'a>(&'a self, corpus: &'a Corpus, features: &'a FeatureSet, gan: Option<&'a StarGan>) -> CueContext<'a> {
        CueContext::new(
            corpus,
            features,
            &self.base,
            gan,
            self.scale.clone(),
            self.tau,
            self.voicing_config,
        )
    }

    /// Explains clip `i` against every other emotion.
    pub fn explain(&self, ctx: &mut CueContext<'_>, i: usize) -> Result<Explanation> {
        let view = ctx.view(i)?.clone();
        let z = &view.embedding;
        let initial_slots = ctx.slots(i, view.initial)?;
        let my_in = my_input(&slot_diffs(&initial_slots), view.initial, z);
        let logits = self.heads.m_y.forward(my_in.view()).output;
        let predicted = Emotion::ALL[argmax(logits.view())];
        let attributions = self.heads.cue_attributions(&my_in, predicted);
        let slots = if predicted == view.initial {
            initial_slots
        } else {
            ctx.slots(i, predicted)?
        };
        let spans = ctx.word_spans(i);
        let mut contrasts = Vec::with_capacity(NUM_EMOTIONS - 1);
        for gamma in predicted.contrasts() {
            let saliency = bar_from_profile(view.profile(predicted, gamma).to_vec(), &spans);
            let (evidence, unavailable) = match &slots[gamma.index()] {
                Some(p) => (Some(self.evidence(p, &attributions[gamma.index()], z)), None),
                None => (None, Some(self.missing_reason(ctx, i, predicted, gamma))),
            };
            contrasts.push(ContrastExplanation {
                contrast: gamma,
                saliency,
                evidence,
                unavailable,
            });
        }
        Ok(Explanation {
            clip: i,
            initial: view.initial,
            initial_probabilities: view.probabilities.to_vec(),
            predicted,
            probabilities: softmax(logits.view()).to_vec(),
            contrasts,
        })
    }

    fn evidence(&self, p: &PairCues, attributions: &[f64; NUM_CUES], z: &Array1<f64>) -> PairEvidence {
        let weighted = weighted_cue_diffs(&p.diff, attributions);
        let logits = self.heads.m_r.forward(mr_input(&weighted, z, &p.z_contrast).view()).output;
        let probs: Vec<f64> = logits.iter().map(|&v| sigmoid(v)).collect();
        PairEvidence {
            counterfactual: p.counterfactual,
            target_cues: p.target,
            counterfactual_cues: p.counterfactual_cues,
            cue_differences: p.diff,
            attributions: *attributions,
            relations: decode_relations(&probs),
            relation_probabilities: probs,
        }
    }

    fn missing_reason(&self, ctx: &mut CueContext<'_>, i: usize, fact: Emotion, gamma: Emotion) -> String {
        match ctx.pair(i, fact, gamma) {
            Ok(_) => "counterfactual unavailable".into(),
            Err(e) => e.to_string(),
        }
    }
}
