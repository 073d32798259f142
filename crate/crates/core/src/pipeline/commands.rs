//! The four CLI commands as library calls.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use log::info;
use serde::{Deserialize, Serialize};

use super::bundle::{self, bundle_from_explanation, write_index, write_png, ExplanationBundle};
use super::config::Config;
use super::store::{self, CONFIG_FILE, REXNET_FILE, SPEAKER_FILE, STARGAN_FILE, TABLE_FILE, TRACE_FILE};
use crate::audio_io::{Corpus, Emotion, NUM_EMOTIONS};
use crate::counterfactual::{train_stargan, CounterfactualSource, GanEpochStats, StarGan};
use crate::error::{Result, RexError};
use crate::evalsuite::{
    ablation_sweep, evaluate_chain, evaluate_counterfactuals, ChainReport, MetricsReport, K_SWEEP,
};
use crate::relations::{derive_corpus_table, joint_train, JointEpochStats, RexNet};
use crate::tensornet::{accuracy, labels_for, train_classifier, CnnModel, EpochStats, FeatureSet, Target};

pub const METRICS_FILE: &str = "metrics.json";
pub const TABLE_TEXT_FILE: &str = "metrics.txt";

/// Everything `train` measured. Contains no timings so that reruns with the
/// same seed produce the same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTrace {
    pub seed: u64,
    pub clips: usize,
    pub train_clips: usize,
    pub test_clips: usize,
    pub pretrain: Vec<EpochStats>,
    pub base_train_accuracy: f64,
    pub base_test_accuracy: f64,
    /// Clips left out of the relation table for lack of voiced frames.
    pub table_unvoiced: usize,
    pub speaker: Vec<EpochStats>,
    pub gan_classifier: Option<Vec<EpochStats>>,
    pub gan: Option<Vec<GanEpochStats>>,
    pub joint: Vec<JointEpochStats>,
}

/// A finished training run loaded back from its directory.
pub struct TrainedRun {
    pub config: Config,
    pub corpus: Corpus,
    pub features: FeatureSet,
    pub rexnet: RexNet,
    pub gan: Option<StarGan>,
    pub speaker: CnnModel,
    pub actors: Vec<u8>,
    pub trace: MetricsTrace,
}

impl TrainedRun {
    /// Generator used for cue differences, if the run was configured for
    /// synthetic counterfactuals.
    pub fn cue_gan(&self) -> Option<&StarGan> {
        match self.config.counterfactual_source {
            CounterfactualSource::Synthetics => self.gan.as_ref(),
            CounterfactualSource::Samples => None,
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| RexError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| RexError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| RexError::io(path, e))
}

/// Pretrains the base CNN, derives the relation table, trains the speaker
/// model and (unless skipped) the generator, then trains the heads jointly.
/// Writes checkpoints, the table, the config and the trace into `out`.
pub fn cmd_train(config: &Config, out: &Path) -> Result<MetricsTrace> {
    config.validate()?;
    let corpus = config.corpus()?;
    create_dir(out)?;
    info!("corpus: {} clips", corpus.len());
    let features = FeatureSet::from_corpus(&corpus)?;
    let train = corpus.train_indices();
    let test = corpus.test_indices();

    let (base, pretrain) = train_classifier(&corpus, &features, Target::Emotion, &config.pretrain)?;
    let (labels, _) = labels_for(&corpus, Target::Emotion);
    let base_train_accuracy = accuracy(&base, &features.inputs, &labels, &train)?;
    let base_test_accuracy = accuracy(&base, &features.inputs, &labels, &test)?;
    info!("base CNN: train {base_train_accuracy:.3}, test {base_test_accuracy:.3}");

    let (table, cues) = derive_corpus_table(&corpus, &features.spectrograms, &config.voicing)?;
    let table_unvoiced = cues.iter().filter(|c| c.is_none()).count();

    let (speaker, speaker_trace) = train_classifier(&corpus, &features, Target::Speaker, &config.speaker)?;
    info!("speaker model trained");

    let (gan, gan_classifier, gan_trace) = if config.skip_gan {
        (None, None, None)
    } else {
        let (gan, m_trace, trace) = train_stargan(&corpus, &features, &config.gan)?;
        (Some(gan), Some(m_trace), Some(trace))
    };

    let cue_gan = match config.counterfactual_source {
        CounterfactualSource::Synthetics => gan.as_ref(),
        CounterfactualSource::Samples => None,
    };
    let (rexnet, joint) = joint_train(&corpus, &features, base, &table, cue_gan, config.voicing, &config.joint)?;

    store::save_rexnet(&out.join(REXNET_FILE), &rexnet, &features.norm)?;
    store::save_speaker(&out.join(SPEAKER_FILE), &speaker, &corpus.actors())?;
    let gan_path = out.join(STARGAN_FILE);
    match &gan {
        Some(gan) => store::save_stargan(&gan_path, gan, &config.gan)?,
        // A stale generator from an earlier run would otherwise be picked up.
        None if gan_path.exists() => std::fs::remove_file(&gan_path).map_err(|e| RexError::io(&gan_path, e))?,
        None => {}
    }
    write_json(&out.join(TABLE_FILE), &table)?;
    config.save(&out.join(CONFIG_FILE))?;
    let trace = MetricsTrace {
        seed: config.seed,
        clips: corpus.len(),
        train_clips: train.len(),
        test_clips: test.len(),
        pretrain,
        base_train_accuracy,
        base_test_accuracy,
        table_unvoiced,
        speaker: speaker_trace,
        gan_classifier,
        gan: gan_trace,
        joint,
    };
    write_json(&out.join(TRACE_FILE), &trace)?;
    Ok(trace)
}

/// Reloads a run written by [`cmd_train`], rebuilding the corpus from the
/// stored config.
pub fn load_run(dir: &Path) -> Result<TrainedRun> {
    let config = Config::load(&dir.join(CONFIG_FILE))?;
    let (rexnet, norm) = store::load_rexnet(&dir.join(REXNET_FILE))?;
    let gan_path = dir.join(STARGAN_FILE);
    let gan = if gan_path.exists() {
        Some(store::load_stargan(&gan_path)?)
    } else {
        None
    };
    let (speaker, actors) = store::load_speaker(&dir.join(SPEAKER_FILE))?;
    let trace: MetricsTrace = read_json(&dir.join(TRACE_FILE))?;
    let corpus = config.corpus()?;
    let features = FeatureSet::from_corpus(&corpus)?;
    if features.norm != norm {
        return Err(RexError::Checkpoint(
            "feature statistics of the rebuilt corpus differ from the checkpoint; was the dataset changed?".into(),
        ));
    }
    if corpus.actors() != actors {
        return Err(RexError::Checkpoint("speaker checkpoint lists different actors than the corpus".into()));
    }
    Ok(TrainedRun {
        config,
        corpus,
        features,
        rexnet,
        gan,
        speaker,
        actors,
        trace,
    })
}

/// Which contrast emotions an explanation should carry evidence for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContrastSelection {
    All,
    Only(Vec<Emotion>),
}

impl FromStr for ContrastSelection {
    type Err = RexError;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(Self::All);
        }
        let list = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(Emotion::from_str)
            .collect::<Result<Vec<_>>>()?;
        if list.is_empty() {
            return Err(RexError::InvalidArgument("empty contrast list".into()));
        }
        Ok(Self::Only(list))
    }
}

fn unknown_clip(corpus: &Corpus, clip_id: &str) -> RexError {
    const SHOWN: usize = 24;
    let ids: Vec<&str> = corpus.clips().iter().map(|c| c.meta.clip_id.as_str()).collect();
    let mut valid = ids.iter().take(SHOWN).copied().collect::<Vec<_>>().join(", ");
    if ids.len() > SHOWN {
        let _ = write!(valid, ", ... ({} in total)", ids.len());
    }
    RexError::UnknownClip {
        clip_id: clip_id.to_string(),
        valid,
    }
}

/// Explains one clip and writes its bundle, audio and images under `out`,
/// then regenerates `out/index.json`.
pub fn cmd_explain(run: &TrainedRun, clip_id: &str, contrasts: &ContrastSelection, out: &Path) -> Result<ExplanationBundle> {
    let corpus = &run.corpus;
    let i = corpus.index_of(clip_id).ok_or_else(|| unknown_clip(corpus, clip_id))?;
    let mut ctx = run.rexnet.context(corpus, &run.features, run.cue_gan());
    let ex = run.rexnet.explain(&mut ctx, i)?;
    let requested: Vec<Emotion> = match contrasts {
        ContrastSelection::All => ex.predicted.contrasts().collect(),
        ContrastSelection::Only(list) => {
            if list.contains(&ex.predicted) {
                return Err(RexError::SelfContrast(ex.predicted.to_string()));
            }
            list.clone()
        }
    };

    for sub in ["bundles", "audio", "images"] {
        create_dir(&out.join(sub))?;
    }
    let clip = &corpus.clips()[i];
    clip.waveform.write_wav(&out.join(bundle::audio_path(clip_id)))?;

    let mut images = Vec::new();
    for c in &ex.contrasts {
        let Some(e) = c.evidence.as_ref().filter(|_| requested.contains(&c.contrast)) else {
            continue;
        };
        if let crate::relations::CounterfactualRef::Sample { index } = e.counterfactual {
            let cf = &corpus.clips()[index];
            cf.waveform.write_wav(&out.join(bundle::audio_path(&cf.meta.clip_id)))?;
        }
        if let Some(gan) = &run.gan {
            let fake = gan.generate_standardized(&run.features.inputs[i], c.contrast);
            write_png(&out.join(bundle::image_path(clip_id, c.contrast)), &fake)?;
            images.push(c.contrast);
        }
    }

    let b = bundle_from_explanation(
        &clip.meta,
        &ex,
        |j| corpus.clips()[j].meta.clip_id.clone(),
        |g| images.contains(&g).then(|| bundle::image_path(clip_id, g)),
        &requested,
    );
    b.validate()?;
    let path = out.join(bundle::bundle_path(clip_id));
    std::fs::write(&path, b.to_json()?).map_err(|e| RexError::io(&path, e))?;
    write_index(out)?;
    Ok(b)
}

/// One pass/fail line of the evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: MetricsReport,
    /// Both concepts on the training split.
    pub train_chain: ChainReport,
    /// Domain classifier of the generator on synthetics of the test split.
    pub gan_classifier_accuracy: Option<f64>,
    pub checks: Vec<Check>,
}

impl Evaluation {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_text(&self, actors: usize) -> String {
        let mut out = self.report.to_text_table(actors);
        let _ = writeln!(out, "\nchecks:");
        for c in &self.checks {
            let _ = writeln!(out, "  {} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        out
    }
}

/// Non-monotone steps of a sequence that should increase.
pub fn non_monotone_steps(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] <= w[0]).count()
}

fn run_checks(run: &TrainedRun, ev: &Evaluation) -> Vec<Check> {
    let r = &ev.report;
    let train_initial = ev.train_chain.initial.value();
    let train_final = ev.train_chain.final_concept.value();
    let mut checks = vec![
        Check::new(
            "initial concept train accuracy >= 0.90",
            train_initial >= 0.90,
            format!("{train_initial:.3}"),
        ),
        Check::new(
            "final concept within 5 points of initial (train)",
            (train_final - train_initial).abs() <= 0.05,
            format!("initial {train_initial:.3}, final {train_final:.3}"),
        ),
        Check::new(
            "relation macro accuracy > 0.33 (test)",
            r.relation_macro_accuracy > 0.33,
            format!("{:.3}", r.relation_macro_accuracy),
        ),
        Check::new(
            "saliency ablation beats random ablation",
            r.absolute_ablation_decrease > r.random_ablation_decrease
                && r.contrastive_ablation_decrease > r.random_ablation_decrease,
            format!(
                "k={}: absolute {:.3}, contrastive {:.3}, random {:.3}",
                r.k_fraction, r.absolute_ablation_decrease, r.contrastive_ablation_decrease, r.random_ablation_decrease
            ),
        ),
    ];
    if let Some(trace) = &run.trace.gan {
        let cycle: Vec<f64> = trace.iter().take(10).map(|s| s.cycle_similarity).collect();
        let bad = non_monotone_steps(&cycle);
        checks.push(Check::new(
            "cycle similarity rises over the first 10 epochs",
            bad <= 2 && cycle.len() >= 2 && cycle.last() > cycle.first(),
            format!(
                "{bad} non-monotone steps, {:.3} -> {:.3}",
                cycle.first().copied().unwrap_or(f64::NAN),
                cycle.last().copied().unwrap_or(f64::NAN)
            ),
        ));
    }
    if let Some(acc) = ev.gan_classifier_accuracy {
        let chance = 1.0 / NUM_EMOTIONS as f64;
        checks.push(Check::new(
            "domain classifier on synthetics > 2x chance",
            acc > 2.0 * chance,
            format!("{acc:.3} vs {:.3}", 2.0 * chance),
        ));
    }
    checks
}

/// Runs the evaluation suite on a trained run. `k_fraction` overrides the
/// configured ablation fraction.
pub fn evaluate_run(run: &TrainedRun, k_fraction: Option<f64>) -> Result<Evaluation> {
    let k = k_fraction.unwrap_or(run.config.k_fraction);
    if !(0.0..1.0).contains(&k) {
        return Err(RexError::InvalidArgument(format!("k_fraction must lie in [0, 1), got {k}")));
    }
    let corpus = &run.corpus;
    let features = &run.features;
    let test = corpus.test_indices();
    let train = corpus.train_indices();
    let (labels, _) = labels_for(corpus, Target::Emotion);

    let mut ctx = run.rexnet.context(corpus, features, run.cue_gan());
    let chain = evaluate_chain(&run.rexnet, &mut ctx, &test)?;
    let train_chain = evaluate_chain(&run.rexnet, &mut ctx, &train)?;

    let mut ks: Vec<f64> = K_SWEEP.to_vec();
    if !ks.contains(&k) {
        ks.push(k);
        ks.sort_by(f64::total_cmp);
    }
    let ablation = ks
        .iter()
        .map(|&kf| ablation_sweep(&run.rexnet.base, &features.inputs, &labels, &test, kf, run.config.seed))
        .collect::<Result<Vec<_>>>()?;

    let samples = evaluate_counterfactuals(None, &run.speaker, &run.rexnet.base, corpus, features, &test)?;
    let (synthetics, gan_classifier_accuracy) = match &run.gan {
        Some(gan) => {
            let s = evaluate_counterfactuals(Some(gan), &run.speaker, &run.rexnet.base, corpus, features, &test)?;
            let m = evaluate_counterfactuals(Some(gan), &run.speaker, &gan.m, corpus, features, &test)?;
            (Some(s), Some(m.emotion.value()))
        }
        None => (None, None),
    };
    let report = MetricsReport::assemble(Some(run.trace.base_test_accuracy), chain, k, ablation, samples, synthetics)?;
    let mut ev = Evaluation {
        report,
        train_chain,
        gan_classifier_accuracy,
        checks: Vec::new(),
    };
    ev.checks = run_checks(run, &ev);
    Ok(ev)
}

/// [`evaluate_run`] plus `metrics.json` and `metrics.txt` in `dir`.
pub fn cmd_evaluate(dir: &Path, k_fraction: Option<f64>) -> Result<Evaluation> {
    let run = load_run(dir)?;
    let ev = evaluate_run(&run, k_fraction)?;
    write_json(&dir.join(METRICS_FILE), &ev)?;
    let text_path = dir.join(TABLE_TEXT_FILE);
    std::fs::write(&text_path, ev.to_text(run.actors.len())).map_err(|e| RexError::io(&text_path, e))?;
    Ok(ev)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contrast_selection_parses() {
        assert_eq!("all".parse::<ContrastSelection>().unwrap(), ContrastSelection::All);
        assert_eq!(
            "Angry, sad".parse::<ContrastSelection>().unwrap(),
            ContrastSelection::Only(vec![Emotion::Angry, Emotion::Sad])
        );
        assert!("angry,bored".parse::<ContrastSelection>().is_err());
        assert!(",".parse::<ContrastSelection>().is_err());
    }

    #[test]
    fn monotone_steps() {
        assert_eq!(non_monotone_steps(&[0.1, 0.2, 0.3]), 0);
        assert_eq!(non_monotone_steps(&[0.1, 0.3, 0.2, 0.2, 0.4]), 2);
        assert_eq!(non_monotone_steps(&[]), 0);
    }
}
