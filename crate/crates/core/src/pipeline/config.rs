//! Run configuration, stored as JSON next to the checkpoints.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio_io::{ingest_ravdess, synth_corpus, Corpus};
use crate::counterfactual::{CounterfactualSource, GanHyper};
use crate::dsp::VoicingConfig;
use crate::error::{Result, RexError};
use crate::evalsuite::DEFAULT_K_FRACTION;
use crate::relations::JointHyper;
use crate::tensornet::Hyper;

/// Every tunable of a run. Missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Master seed; copied into every stage by [`Config::with_seed`].
    pub seed: u64,
    /// Use the generated tone-burst corpus instead of RAVDESS.
    pub synthetic: bool,
    /// Clips per class of the generated corpus.
    pub synthetic_per_class: usize,
    /// RAVDESS root directory.
    pub data_dir: Option<PathBuf>,
    pub skip_gan: bool,
    /// Counterfactuals used for cue differences during joint training and
    /// explanation.
    pub counterfactual_source: CounterfactualSource,
    pub pretrain: Hyper,
    pub speaker: Hyper,
    pub gan: GanHyper,
    pub joint: JointHyper,
    pub voicing: VoicingConfig,
    /// Fraction of bins removed by the ablation metric.
    pub k_fraction: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 7,
            synthetic: false,
            synthetic_per_class: 16,
            data_dir: None,
            skip_gan: false,
            counterfactual_source: CounterfactualSource::Samples,
            pretrain: Hyper::default(),
            speaker: Hyper {
                epochs: 5,
                ..Hyper::default()
            },
            gan: GanHyper::default(),
            joint: JointHyper::default(),
            voicing: VoicingConfig::default(),
            k_fraction: DEFAULT_K_FRACTION,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| RexError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).map_err(|e| RexError::io(path, e))
    }

    /// Sets the master seed and every per-stage seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.pretrain.seed = seed;
        self.speaker.seed = seed ^ 0x5bea;
        self.gan.seed = seed;
        self.joint.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.k_fraction) {
            return Err(RexError::InvalidArgument(format!(
                "k_fraction must lie in [0, 1), got {}",
                self.k_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.joint.tau) {
            return Err(RexError::InvalidArgument(format!("tau must lie in [0, 1], got {}", self.joint.tau)));
        }
        if self.synthetic && self.synthetic_per_class < 4 {
            return Err(RexError::InvalidArgument(
                "the synthetic corpus needs at least 4 clips per class".into(),
            ));
        }
        if self.counterfactual_source == CounterfactualSource::Synthetics && self.skip_gan {
            return Err(RexError::InvalidArgument(
                "synthetic counterfactuals need the generator; drop skip_gan or use samples".into(),
            ));
        }
        Ok(())
    }

    /// Builds the corpus this configuration describes.
    pub fn corpus(&self) -> Result<Corpus> {
        if self.synthetic {
            return synth_corpus(self.seed, self.synthetic_per_class);
        }
        match &self.data_dir {
            Some(dir) if dir.is_dir() => Ok(ingest_ravdess(dir, self.seed)?.0),
            Some(dir) => Err(RexError::InvalidArgument(format!(
                "dataset directory {} does not exist; point --data at the RAVDESS speech folders or pass --synthetic",
                dir.display()
            ))),
            None => Err(RexError::InvalidArgument(
                "no dataset given; pass --data <RAVDESS dir> or --synthetic for the generated corpus".into(),
            )),
        }
    }
}
