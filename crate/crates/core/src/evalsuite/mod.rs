//! Held-out metrics: concept accuracies, saliency ablation, counterfactual
//! fidelity and cue-relation accuracy.

use std::fmt::Write as _;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio_io::{Corpus, NUM_EMOTIONS};
use crate::counterfactual::{mean_squared_error, select_sample, similarity_from_mse, CounterfactualSource, StarGan};
use crate::error::{Result, RexError};
use crate::relations::{CueContext, Relation, RexNet};
use crate::saliency::total_contrastive;
use crate::tensornet::{grad_cam_all, labels_for, CnnModel, FeatureSet, Target};

pub const DEFAULT_K_FRACTION: f64 = 0.2;
pub const K_SWEEP: [f64; 3] = [0.1, 0.2, 0.4];

/// An exact ratio of counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Fraction {
    pub numerator: usize,
    pub denominator: usize,
}

impl Fraction {
    pub fn new(numerator: usize, denominator: usize) -> Self {
        Self { numerator, denominator }
    }

    /// Zero when the denominator is zero.
    pub fn value(&self) -> f64 {
        if self.denominator == 0 {
            0.0
        } else {
            self.numerator as f64 / self.denominator as f64
        }
    }

    pub fn record(&mut self, hit: bool) {
        self.numerator += usize::from(hit);
        self.denominator += 1;
    }
}

/// Mean of the per-class accuracies, skipping classes without support.
pub fn macro_accuracy(per_class: &[Fraction]) -> f64 {
    let present: Vec<f64> = per_class.iter().filter(|f| f.denominator > 0).map(Fraction::value).collect();
    if present.is_empty() {
        0.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SaliencyKind {
    /// Grad-CAM of the predicted class.
    Absolute,
    /// Predicted-class Grad-CAM discounted by every other class.
    Contrastive,
    /// Uniformly random ranking.
    Random,
}

/// Flat indices of the `k` largest values, ties broken by lower index.
pub fn top_k_bins(values: &Array2<f64>, k: usize) -> Vec<usize> {
    let flat: Vec<f64> = values.iter().copied().collect();
    let mut order: Vec<usize> = (0..flat.len()).collect();
    order.sort_by(|&a, &b| flat[b].total_cmp(&flat[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Sets the given bins of a standardised input to zero, the feature mean.
pub fn ablate(input: &Array2<f64>, bins: &[usize]) -> Array2<f64> {
    let mut out = input.clone();
    let flat = out.as_slice_mut().expect("standard layout");
    for &b in bins {
        flat[b] = 0.0;
    }
    out
}

fn bins_for(fraction: f64, total: usize) -> usize {
    ((fraction * total as f64).round() as usize).min(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub kind: SaliencyKind,
    pub k_fraction: f64,
    pub clean: Fraction,
    pub ablated: Fraction,
    /// Clean minus ablated accuracy; negative values are kept.
    pub decrease: f64,
}

/// Accuracy drop when the top `k_fraction` of time-frequency bins, ranked by
/// the saliency of the predicted class, are ablated. The random arm ranks
/// bins with a generator seeded from `seed` and the clip index.
pub fn ablation_decrease(
    model: &CnnModel,
    inputs: &[Array2<f64>],
    labels: &[usize],
    idx: &[usize],
    kind: SaliencyKind,
    k_fraction: f64,
    seed: u64,
) -> Result<AblationResult> {
    let [result] = ablation_arms(model, inputs, labels, idx, &[kind], k_fraction, seed)?;
    Ok(result)
}

fn ablation_arms<const N: usize>(
    model: &CnnModel,
    inputs: &[Array2<f64>],
    labels: &[usize],
    idx: &[usize],
    kinds: &[SaliencyKind; N],
    k_fraction: f64,
    seed: u64,
) -> Result<[AblationResult; N]> {
    if !(0.0..1.0).contains(&k_fraction) {
        return Err(RexError::InvalidArgument(format!("k_fraction must lie in [0, 1), got {k_fraction}")));
    }
    let mut clean = Fraction::default();
    let mut ablated = [Fraction::default(); N];
    for &i in idx {
        let x = &inputs[i];
        let trace = model.forward(x)?;
        let predicted = trace.predicted();
        clean.record(predicted == labels[i]);
        let k = bins_for(k_fraction, x.len());
        let maps = if k > 0 && kinds.iter().any(|&k| k != SaliencyKind::Random) {
            grad_cam_all(model, &trace)
        } else {
            Vec::new()
        };
        for (arm, &kind) in kinds.iter().enumerate() {
            if k == 0 {
                ablated[arm].record(predicted == labels[i]);
                continue;
            }
            let ranking = match kind {
                SaliencyKind::Absolute => maps[predicted].values().clone(),
                SaliencyKind::Contrastive => {
                    let others: Vec<_> = maps
                        .iter()
                        .enumerate()
                        .filter(|(c, _)| *c != predicted)
                        .map(|(_, m)| m.clone())
                        .collect();
                    total_contrastive(&maps[predicted], &others)?.into_values()
                }
                SaliencyKind::Random => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
                    Array2::from_shape_simple_fn(x.dim(), || rng.random::<f64>())
                }
            };
            let out = model.predict(&ablate(x, &top_k_bins(&ranking, k)))?;
            ablated[arm].record(out == labels[i]);
        }
    }
    Ok(std::array::from_fn(|arm| AblationResult {
        kind: kinds[arm],
        k_fraction,
        clean,
        ablated: ablated[arm],
        decrease: clean.value() - ablated[arm].value(),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationSweep {
    pub k_fraction: f64,
    pub absolute: AblationResult,
    pub contrastive: AblationResult,
    pub random: AblationResult,
}

pub fn ablation_sweep(
    model: &CnnModel,
    inputs: &[Array2<f64>],
    labels: &[usize],
    idx: &[usize],
    k_fraction: f64,
    seed: u64,
) -> Result<AblationSweep> {
    let kinds = [SaliencyKind::Absolute, SaliencyKind::Contrastive, SaliencyKind::Random];
    let [absolute, contrastive, random] = ablation_arms(model, inputs, labels, idx, &kinds, k_fraction, seed)?;
    Ok(AblationSweep {
        k_fraction,
        absolute,
        contrastive,
        random,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualReport {
    pub source: CounterfactualSource,
    /// Mean `exp(-MSE)` between original and counterfactual; 1 for samples.
    pub similarity_mean: f64,
    pub mse_mean: f64,
    /// Speaker model recognises the original actor in the counterfactual.
    pub identity: Fraction,
    /// Emotion model assigns the counterfactual to its contrast emotion.
    pub emotion: Fraction,
    pub emotion_per_class: Vec<Fraction>,
    /// Pairs without a counterfactual sample.
    pub missing: usize,
}

/// Scores counterfactuals for every test clip and each of its 7 contrast
/// emotions: synthetics when `gan` is given, otherwise selected samples.
pub fn evaluate_counterfactuals(
    gan: Option<&StarGan>,
    speaker_model: &CnnModel,
    emotion_model: &CnnModel,
    corpus: &Corpus,
    features: &FeatureSet,
    idx: &[usize],
) -> Result<CounterfactualReport> {
    let (speakers, _) = labels_for(corpus, Target::Speaker);
    let mut identity = Fraction::default();
    let mut emotion = Fraction::default();
    let mut per_class = vec![Fraction::default(); NUM_EMOTIONS];
    let (mut mse_sum, mut sim_sum, mut scored, mut missing) = (0.0, 0.0, 0usize, 0usize);
    for &i in idx {
        let meta = &corpus.clips()[i].meta;
        for gamma in meta.emotion.contrasts() {
            let x_cf = match gan {
                Some(gan) => {
                    let fake = gan.generate_standardized(&features.inputs[i], gamma);
                    let mse = mean_squared_error(&features.inputs[i], &fake)?;
                    mse_sum += mse;
                    sim_sum += similarity_from_mse(mse);
                    fake
                }
                None => match select_sample(corpus, meta, gamma) {
                    Ok(j) => {
                        sim_sum += 1.0;
                        features.inputs[j].clone()
                    }
                    Err(RexError::NoCounterfactual { .. }) => {
                        missing += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                },
            };
            scored += 1;
            identity.record(speaker_model.predict(&x_cf)? == speakers[i]);
            let hit = emotion_model.predict(&x_cf)? == gamma.index();
            emotion.record(hit);
            per_class[gamma.index()].record(hit);
        }
    }
    let n = scored.max(1) as f64;
    Ok(CounterfactualReport {
        source: if gan.is_some() {
            CounterfactualSource::Synthetics
        } else {
            CounterfactualSource::Samples
        },
        similarity_mean: sim_sum / n,
        mse_mean: mse_sum / n,
        identity,
        emotion,
        emotion_per_class: per_class,
        missing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    /// Mean recall over the (cue, relation class) cells that occur.
    pub macro_accuracy: f64,
    /// Recall per relation class pooled over cues, lower/similar/higher.
    pub per_class: [Fraction; 3],
    /// Recall per cue and relation class.
    pub per_cue: Vec<[Fraction; 3]>,
    /// Contrast pairs scored.
    pub pairs: usize,
}

/// Accumulates decoded relations against ground truth.
#[derive(Debug, Clone, Default)]
pub struct RelationTally {
    cells: Vec<[Fraction; 3]>,
    pairs: usize,
}

impl RelationTally {
    pub fn record(&mut self, truth: &[Relation], decoded: &[Relation]) {
        if self.cells.len() < truth.len() {
            self.cells.resize(truth.len(), [Fraction::default(); 3]);
        }
        for (k, (t, d)) in truth.iter().zip(decoded).enumerate() {
            self.cells[k][t.index()].record(t == d);
        }
        self.pairs += 1;
    }

    pub fn report(&self) -> RelationReport {
        let mut per_class = [Fraction::default(); 3];
        for cue in &self.cells {
            for (c, f) in cue.iter().enumerate() {
                per_class[c].numerator += f.numerator;
                per_class[c].denominator += f.denominator;
            }
        }
        let flat: Vec<Fraction> = self.cells.iter().flatten().copied().collect();
        RelationReport {
            macro_accuracy: macro_accuracy(&flat),
            per_class,
            per_cue: self.cells.clone(),
            pairs: self.pairs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub initial: Fraction,
    pub final_concept: Fraction,
    pub initial_per_class: Vec<Fraction>,
    pub final_per_class: Vec<Fraction>,
    pub relations: RelationReport,
}

/// Runs the explanation chain on `idx` and scores both concepts and the
/// decoded cue relations against the table entry of the true emotion.
pub fn evaluate_chain(rexnet: &RexNet, ctx: &mut CueContext<'_>, idx: &[usize]) -> Result<ChainReport> {
    let mut initial = Fraction::default();
    let mut final_concept = Fraction::default();
    let mut initial_per_class = vec![Fraction::default(); NUM_EMOTIONS];
    let mut final_per_class = vec![Fraction::default(); NUM_EMOTIONS];
    let mut tally = RelationTally::default();
    for &i in idx {
        let truth = ctx.corpus.clips()[i].meta.emotion;
        let ex = rexnet.explain(ctx, i)?;
        initial.record(ex.initial == truth);
        initial_per_class[truth.index()].record(ex.initial == truth);
        final_concept.record(ex.predicted == truth);
        final_per_class[truth.index()].record(ex.predicted == truth);
        for c in &ex.contrasts {
            if let Some(e) = &c.evidence {
                tally.record(&rexnet.table.get(truth, c.contrast), &e.relations);
            }
        }
    }
    Ok(ChainReport {
        initial,
        final_concept,
        initial_per_class,
        final_per_class,
        relations: tally.report(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Test accuracy of the base CNN before joint training.
    pub base_accuracy: Option<f64>,
    pub initial_accuracy: f64,
    pub final_accuracy: f64,
    pub k_fraction: f64,
    pub absolute_ablation_decrease: f64,
    pub contrastive_ablation_decrease: f64,
    pub random_ablation_decrease: f64,
    /// From synthetics when a generator was evaluated, otherwise samples.
    pub reconstruction_similarity_mean: f64,
    pub identity_accuracy: f64,
    pub cf_emotion_accuracy: f64,
    pub relation_macro_accuracy: f64,
    pub chain: ChainReport,
    pub ablation: Vec<AblationSweep>,
    pub counterfactual_samples: CounterfactualReport,
    pub counterfactual_synthetics: Option<CounterfactualReport>,
}

impl MetricsReport {
    pub fn assemble(
        base_accuracy: Option<f64>,
        chain: ChainReport,
        k_fraction: f64,
        ablation: Vec<AblationSweep>,
        samples: CounterfactualReport,
        synthetics: Option<CounterfactualReport>,
    ) -> Result<Self> {
        let main = ablation
            .iter()
            .find(|s| s.k_fraction == k_fraction)
            .ok_or_else(|| RexError::InvalidArgument(format!("no ablation run at k = {k_fraction}")))?;
        let cf = synthetics.as_ref().unwrap_or(&samples);
        Ok(Self {
            base_accuracy,
            initial_accuracy: chain.initial.value(),
            final_accuracy: chain.final_concept.value(),
            k_fraction,
            absolute_ablation_decrease: main.absolute.decrease,
            contrastive_ablation_decrease: main.contrastive.decrease,
            random_ablation_decrease: main.random.decrease,
            reconstruction_similarity_mean: cf.similarity_mean,
            identity_accuracy: cf.identity.value(),
            cf_emotion_accuracy: cf.emotion.value(),
            relation_macro_accuracy: chain.relations.macro_accuracy,
            chain,
            ablation,
            counterfactual_samples: samples,
            counterfactual_synthetics: synthetics,
        })
    }

    /// Plain-text table: concepts, saliency, counterfactuals, relations.
    pub fn to_text_table(&self, actors: usize) -> String {
        let pct = |v: f64| format!("{:.1}%", 100.0 * v);
        let frac = |f: &Fraction| format!("{} ({}/{})", pct(f.value()), f.numerator, f.denominator);
        let chance_emotion = pct(1.0 / NUM_EMOTIONS as f64);
        let chance_identity = pct(1.0 / actors.max(1) as f64);
        let synth = self.counterfactual_synthetics.as_ref();
        let samples = &self.counterfactual_samples;
        let or_dash = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        let main = self.ablation.iter().find(|s| s.k_fraction == self.k_fraction);
        let rows: Vec<[String; 6]> = vec![
            [
                "Initial concept".into(),
                "Emotion accuracy (8 classes)".into(),
                chance_emotion.clone(),
                or_dash(self.base_accuracy.map(pct)),
                frac(&self.chain.initial),
                String::new(),
            ],
            [
                "Final concept".into(),
                "Emotion accuracy (8 classes)".into(),
                String::new(),
                String::new(),
                frac(&self.chain.final_concept),
                String::new(),
            ],
            [
                "Absolute saliency".into(),
                format!("Ablated accuracy decrease (k={})", self.k_fraction),
                or_dash(main.map(|m| pct(m.random.decrease))),
                String::new(),
                pct(self.absolute_ablation_decrease),
                String::new(),
            ],
            [
                "Contrastive saliency".into(),
                format!("Ablated accuracy decrease (k={})", self.k_fraction),
                or_dash(main.map(|m| pct(m.random.decrease))),
                String::new(),
                pct(self.contrastive_ablation_decrease),
                String::new(),
            ],
            [
                "Counterfactual".into(),
                "Reconstruction similarity".into(),
                String::new(),
                String::new(),
                or_dash(synth.map(|s| format!("{:.3}", s.similarity_mean))),
                format!("{:.3}", samples.similarity_mean),
            ],
            [
                String::new(),
                format!("Identity accuracy ({actors} classes)"),
                chance_identity,
                String::new(),
                or_dash(synth.map(|s| frac(&s.identity))),
                frac(&samples.identity),
            ],
            [
                String::new(),
                "Emotion accuracy (8 classes)".into(),
                chance_emotion,
                String::new(),
                or_dash(synth.map(|s| frac(&s.emotion))),
                frac(&samples.emotion),
            ],
            [
                "Cue difference relation".into(),
                "Cue accuracy (3 classes, 6 labels)".into(),
                pct(1.0 / 3.0),
                String::new(),
                pct(self.relation_macro_accuracy),
                String::new(),
            ],
        ];
        let header = [
            "Variable",
            "Metric",
            "Random",
            "Base CNN",
            "RexNet",
            "Samples",
        ]
        .map(String::from);
        let mut widths = [0usize; 6];
        for row in std::iter::once(&header).chain(&rows) {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        for row in std::iter::once(&header).chain(&rows) {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        let _ = writeln!(out, "\nablation sweep (absolute / contrastive / random decrease):");
        for s in &self.ablation {
            let _ = writeln!(
                out,
                "  k={:.1}: {} / {} / {}",
                s.k_fraction,
                pct(s.absolute.decrease),
                pct(s.contrastive.decrease),
                pct(s.random.decrease)
            );
        }
        out
    }
}
