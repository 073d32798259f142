//! Explanation bundles: one JSON document per clip plus the audio and
//! images it points to, laid out for static serving.
//!
//! ```text
//! <root>/index.json
//! <root>/bundles/<clip_id>.json
//! <root>/audio/<clip_id>.wav
//! <root>/images/<clip_id>_vs_<emotion>.png
//! ```
//!
//! Paths inside a bundle are relative to `<root>`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio_io::{ClipMeta, Emotion, NUM_EMOTIONS};
use crate::dsp::{Cue, CueVector, NUM_CUES};
use crate::error::{Result, RexError};
use crate::relations::{CueRelationVector, Explanation};
use crate::saliency::SaliencyBar;

pub const SCHEMA_VERSION: u32 = 1;
/// JSON Schema of a bundle document.
pub const BUNDLE_SCHEMA: &str = include_str!("../../../../docs/bundle.schema.json");
/// JSON Schema of `index.json`.
pub const INDEX_SCHEMA: &str = include_str!("../../../../docs/index.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipInfo {
    pub clip_id: String,
    pub actor: u8,
    /// Labelled emotion.
    pub emotion: Emotion,
    pub intensity: String,
    pub statement: String,
    pub repetition: u8,
    pub word_count: usize,
    pub audio: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prediction {
    /// Base CNN class.
    pub initial: Emotion,
    pub initial_probabilities: Vec<f64>,
    /// Class after the cue heads; the fact being explained.
    pub predicted: Emotion,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterfactualInfo {
    /// Real clip of the same actor and sentence.
    pub clip_id: Option<String>,
    pub audio: Option<String>,
    /// Generator output rendered as an image, never as audio.
    pub synthetic_image: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContrastEntry {
    pub contrast: Emotion,
    pub available: bool,
    pub unavailable_reason: Option<String>,
    pub counterfactual: Option<CounterfactualInfo>,
    pub target_cues: Option<CueVector>,
    pub counterfactual_cues: Option<CueVector>,
    pub cue_differences: Option<[f64; NUM_CUES]>,
    pub relations: Option<CueRelationVector>,
    pub relation_probabilities: Option<Vec<f64>>,
    pub attributions: Option<[f64; NUM_CUES]>,
    pub saliency: SaliencyBar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplanationBundle {
    pub schema_version: u32,
    pub clip: ClipInfo,
    /// Class names in probability order.
    pub emotions: Vec<Emotion>,
    /// Cue keys in the order used by differences and attributions.
    pub cues: Vec<String>,
    pub prediction: Prediction,
    pub contrasts: Vec<ContrastEntry>,
}

impl ExplanationBundle {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let b: Self = serde_json::from_str(text)?;
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(RexError::InvalidArgument(format!(
                "bundle schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.contrasts.len() != NUM_EMOTIONS - 1 {
            return Err(RexError::InvalidArgument(format!(
                "bundle has {} contrast entries, expected {}",
                self.contrasts.len(),
                NUM_EMOTIONS - 1
            )));
        }
        if self.contrasts.iter().any(|c| c.contrast == self.prediction.predicted) {
            return Err(RexError::InvalidArgument("bundle contrasts include the predicted emotion".into()));
        }
        for path in self.paths() {
            if Path::new(path).is_absolute() || path.split('/').any(|p| p == "..") {
                return Err(RexError::InvalidArgument(format!("bundle path {path} is not relative to the bundle root")));
            }
        }
        Ok(())
    }

    /// Every file path the bundle references.
    pub fn paths(&self) -> Vec<&str> {
        let mut out = vec![self.clip.audio.as_str()];
        for c in &self.contrasts {
            if let Some(cf) = &c.counterfactual {
                out.extend(cf.audio.as_deref());
                out.extend(cf.synthetic_image.as_deref());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexEntry {
    pub clip_id: String,
    pub emotion: Emotion,
    pub predicted: Emotion,
    pub bundle: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleIndex {
    pub schema_version: u32,
    pub clips: Vec<IndexEntry>,
}

pub fn audio_path(clip_id: &str) -> String {
    format!("audio/{clip_id}.wav")
}

pub fn bundle_path(clip_id: &str) -> String {
    format!("bundles/{clip_id}.json")
}

pub fn image_path(clip_id: &str, gamma: Emotion) -> String {
    format!("images/{clip_id}_vs_{gamma}.png")
}

pub fn clip_info(meta: &ClipMeta) -> ClipInfo {
    ClipInfo {
        clip_id: meta.clip_id.clone(),
        actor: meta.actor,
        emotion: meta.emotion,
        intensity: format!("{:?}", meta.intensity).to_lowercase(),
        statement: meta.statement.text().to_string(),
        repetition: meta.repetition,
        word_count: meta.word_count,
        audio: audio_path(&meta.clip_id),
    }
}

/// Converts an explanation into a bundle. `sample_id` names the clip
/// behind a corpus index; `image` names the synthetic image of a contrast
/// when one was rendered; `requested` limits which contrasts carry
/// evidence.
pub fn bundle_from_explanation(
    meta: &ClipMeta,
    ex: &Explanation,
    sample_id: impl Fn(usize) -> String,
    image: impl Fn(Emotion) -> Option<String>,
    requested: &[Emotion],
) -> ExplanationBundle {
    let contrasts = ex
        .contrasts
        .iter()
        .map(|c| {
            let wanted = requested.contains(&c.contrast);
            let evidence = c.evidence.as_ref().filter(|_| wanted);
            let reason = if !wanted {
                Some("contrast not requested".to_string())
            } else {
                c.unavailable.clone()
            };
            let counterfactual = evidence.map(|e| {
                let clip_id = match e.counterfactual {
                    crate::relations::CounterfactualRef::Sample { index } => Some(sample_id(index)),
                    crate::relations::CounterfactualRef::Synthetic => None,
                };
                CounterfactualInfo {
                    audio: clip_id.as_deref().map(audio_path),
                    clip_id,
                    synthetic_image: image(c.contrast),
                }
            });
            ContrastEntry {
                contrast: c.contrast,
                available: evidence.is_some(),
                unavailable_reason: if evidence.is_some() { None } else { reason },
                counterfactual,
                target_cues: evidence.map(|e| e.target_cues),
                counterfactual_cues: evidence.map(|e| e.counterfactual_cues),
                cue_differences: evidence.map(|e| e.cue_differences),
                relations: evidence.map(|e| e.relations),
                relation_probabilities: evidence.map(|e| e.relation_probabilities.clone()),
                attributions: evidence.map(|e| e.attributions),
                saliency: c.saliency.clone(),
            }
        })
        .collect();
    ExplanationBundle {
        schema_version: SCHEMA_VERSION,
        clip: clip_info(meta),
        emotions: Emotion::ALL.to_vec(),
        cues: Cue::ALL.iter().map(|c| c.name().to_string()).collect(),
        prediction: Prediction {
            initial: ex.initial,
            initial_probabilities: ex.initial_probabilities.clone(),
            predicted: ex.predicted,
            probabilities: ex.probabilities.clone(),
        },
        contrasts,
    }
}

/// Rebuilds `index.json` from every bundle under `root/bundles`, sorted by
/// clip id.
pub fn write_index(root: &Path) -> Result<BundleIndex> {
    let dir = root.join("bundles");
    let mut files: Vec<PathBuf> = match std::fs::read_dir(&dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(RexError::io(&dir, e)),
    };
    files.sort();
    let mut clips = Vec::with_capacity(files.len());
    for f in files {
        let text = std::fs::read_to_string(&f).map_err(|e| RexError::io(&f, e))?;
        let b = ExplanationBundle::from_json(&text)?;
        clips.push(IndexEntry {
            bundle: bundle_path(&b.clip.clip_id),
            clip_id: b.clip.clip_id,
            emotion: b.clip.emotion,
            predicted: b.prediction.predicted,
        });
    }
    let index = BundleIndex {
        schema_version: SCHEMA_VERSION,
        clips,
    };
    let path = root.join("index.json");
    std::fs::write(&path, serde_json::to_string_pretty(&index)? + "\n").map_err(|e| RexError::io(&path, e))?;
    Ok(index)
}

/// Writes a grayscale PNG of a `[rows, cols]` map, low rows at the bottom,
/// scaled to its own min..max.
pub fn write_png(path: &Path, values: &ndarray::Array2<f64>) -> Result<()> {
    let (rows, cols) = values.dim();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut pixels = Vec::with_capacity(rows * cols);
    for r in (0..rows).rev() {
        for c in 0..cols {
            pixels.push((255.0 * (values[[r, c]] - lo) / span).round() as u8);
        }
    }
    let file = std::fs::File::create(path).map_err(|e| RexError::io(path, e))?;
    let mut enc = png::Encoder::new(std::io::BufWriter::new(file), cols as u32, rows as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let png_err = |e: png::EncodingError| RexError::InvalidArgument(format!("png encoding failed: {e}"));
    let mut writer = enc.write_header().map_err(png_err)?;
    writer.write_image_data(&pixels).map_err(png_err)?;
    writer.finish().map_err(png_err)
}
