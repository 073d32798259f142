//! Ground-truth cue relations between emotions.

use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::audio_io::{ClipMeta, Corpus, Emotion, NUM_EMOTIONS};
use crate::dsp::{extract_cues, Cue, CueVector, MelSpectrogram, VoicingConfig, NUM_CUES};
use crate::error::{Result, RexError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Lower,
    Similar,
    Higher,
}

impl Relation {
    pub const ALL: [Relation; 3] = [Relation::Lower, Relation::Similar, Relation::Higher];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn opposite(self) -> Relation {
        match self {
            Relation::Lower => Relation::Higher,
            Relation::Similar => Relation::Similar,
            Relation::Higher => Relation::Lower,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Relation::Lower => "Lower",
            Relation::Similar => "Similar",
            Relation::Higher => "Higher",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One relation per cue, in [`Cue::ALL`] order.
pub type CueRelationVector = [Relation; NUM_CUES];

/// `relation[target][contrast][cue]`: how the target emotion's cue compares
/// with the contrast emotion's.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationTable {
    cells: [[CueRelationVector; NUM_EMOTIONS]; NUM_EMOTIONS],
}

impl Default for RelationTable {
    fn default() -> Self {
        Self {
            cells: [[[Relation::Similar; NUM_CUES]; NUM_EMOTIONS]; NUM_EMOTIONS],
        }
    }
}

impl RelationTable {
    pub fn get(&self, target: Emotion, contrast: Emotion) -> CueRelationVector {
        self.cells[target.index()][contrast.index()]
    }

    /// Sets a cell and its mirror image.
    pub fn set_pair(&mut self, target: Emotion, contrast: Emotion, cue: Cue, relation: Relation) {
        self.cells[target.index()][contrast.index()][cue as usize] = relation;
        self.cells[contrast.index()][target.index()][cue as usize] = relation.opposite();
    }

    /// Checks the similar diagonal and antisymmetry of every cell.
    pub fn validate(&self) -> Result<()> {
        for a in Emotion::ALL {
            for b in Emotion::ALL {
                for cue in Cue::ALL {
                    let r = self.get(a, b)[cue as usize];
                    if a == b && r != Relation::Similar {
                        return Err(RexError::InvalidArgument(format!(
                            "{a} vs itself is {r} for {}",
                            cue.name()
                        )));
                    }
                    if self.get(b, a)[cue as usize] != r.opposite() {
                        return Err(RexError::InvalidArgument(format!(
                            "{a}/{b} {} is not antisymmetric",
                            cue.name()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(s)?;
        t.validate()?;
        Ok(t)
    }
}

/// Family-wise significance level, split over the 28 unordered pairs.
pub const FAMILY_ALPHA: f64 = 0.005;
pub const UNORDERED_PAIRS: usize = NUM_EMOTIONS * (NUM_EMOTIONS - 1) / 2;

/// Two-sided Welch t-test p-value, or `None` when either group has fewer
/// than two values.
pub fn welch_p_value(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (n, m, var)
    };
    let (na, ma, va) = stats(a);
    let (nb, mb, vb) = stats(b);
    let se2 = va / na + vb / nb;
    if se2 <= 0.0 {
        return Some(if ma == mb { 1.0 } else { 0.0 });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df.max(1.0)).ok()?;
    Some((2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0))
}

/// Derives the table from the whole-clip cues of every voiced clip in
/// `corpus`. Returns the cues alongside, `None` for unvoiced clips.
pub fn derive_corpus_table(
    corpus: &Corpus,
    spectrograms: &[MelSpectrogram],
    cfg: &VoicingConfig,
) -> Result<(RelationTable, Vec<Option<CueVector>>)> {
    let mut all = Vec::with_capacity(corpus.len());
    for (clip, spec) in corpus.clips().iter().zip(spectrograms) {
        match extract_cues(spec, &clip.waveform, None, clip.meta.word_count, cfg) {
            Ok(c) => all.push(Some(c)),
            Err(RexError::Unvoiced) => all.push(None),
            Err(e) => return Err(e),
        }
    }
    let (metas, cues): (Vec<&ClipMeta>, Vec<CueVector>) = corpus
        .clips()
        .iter()
        .zip(&all)
        .filter_map(|(clip, c)| c.map(|c| (&clip.meta, c)))
        .unzip();
    Ok((derive_relation_table(&metas, &cues)?, all))
}

/// Derives the table from per-clip cues.
///
/// Cue values are first centred on each actor's mean, which removes
/// speaker offsets. Each unordered emotion pair is then compared with a
/// Welch t-test at `FAMILY_ALPHA / 28`; significant differences become
/// higher/lower and everything else stays similar.
pub fn derive_relation_table(metas: &[&ClipMeta], cues: &[CueVector]) -> Result<RelationTable> {
    if metas.len() != cues.len() {
        return Err(RexError::ShapeMismatch {
            expected: format!("{} cue vectors", metas.len()),
            actual: cues.len().to_string(),
        });
    }
    let mut actors: Vec<u8> = metas.iter().map(|m| m.actor).collect();
    actors.sort_unstable();
    actors.dedup();
    if actors.len() < 3 {
        return Err(RexError::InvalidArgument(format!(
            "relation derivation needs at least 3 actors, got {}",
            actors.len()
        )));
    }
    for &a in &actors {
        for e in Emotion::ALL {
            let n = metas.iter().filter(|m| m.actor == a && m.emotion == e).count();
            if n < 2 {
                warn!("actor {a} has {n} {e} clips; affected cells may default to similar");
            }
        }
    }
    let alpha = FAMILY_ALPHA / UNORDERED_PAIRS as f64;
    let mut table = RelationTable::default();
    for cue in Cue::ALL {
        let k = cue as usize;
        let mut centred = vec![Vec::new(); NUM_EMOTIONS];
        for &a in &actors {
            let idx: Vec<usize> = (0..metas.len()).filter(|&i| metas[i].actor == a).collect();
            let mean = idx.iter().map(|&i| cues[i].to_array()[k]).sum::<f64>() / idx.len() as f64;
            for &i in &idx {
                centred[metas[i].emotion.index()].push(cues[i].to_array()[k] - mean);
            }
        }
        for i in 0..NUM_EMOTIONS {
            for j in i + 1..NUM_EMOTIONS {
                let (a, b) = (&centred[i], &centred[j]);
                let relation = match welch_p_value(a, b) {
                    None => {
                        warn!(
                            "too few clips for {} vs {} on {}; using similar",
                            Emotion::ALL[i],
                            Emotion::ALL[j],
                            cue.name()
                        );
                        Relation::Similar
                    }
                    Some(p) if p < alpha => {
                        let ma = a.iter().sum::<f64>() / a.len() as f64;
                        let mb = b.iter().sum::<f64>() / b.len() as f64;
                        if ma > mb {
                            Relation::Higher
                        } else {
                            Relation::Lower
                        }
                    }
                    Some(_) => Relation::Similar,
                };
                table.set_pair(Emotion::ALL[i], Emotion::ALL[j], cue, relation);
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio_io::{Intensity, Statement};

    fn meta(actor: u8, emotion: Emotion, i: usize) -> ClipMeta {
        ClipMeta {
            clip_id: format!("{actor}-{}-{i}", emotion.code()),
            actor,
            emotion,
            intensity: Intensity::Normal,
            statement: Statement::Kids,
            repetition: 1,
            word_count: 6,
        }
    }

    #[test]
    fn welch_matches_hand_computation() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 4.0, 6.0, 8.0, 10.0];
        // t = (2.5 - 6) / sqrt(1.6667/4 + 10/5) = -2.2514; df ≈ 5.52
        let p = welch_p_value(&a, &b).unwrap();
        let va: f64 = 5.0 / 3.0;
        let se2 = va / 4.0 + 10.0 / 5.0;
        let t = -3.5 / se2.sqrt();
        let df = se2 * se2 / ((va / 4.0).powi(2) / 3.0 + (2.0f64).powi(2) / 4.0);
        let oracle = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, df).unwrap().cdf(t.abs()));
        assert!((p - oracle).abs() < 1e-12);
        assert!((t + 2.2514).abs() < 1e-3);
        assert!(p > 0.05 && p < 0.1);
        assert_eq!(welch_p_value(&[1.0], &b), None);
    }

    #[test]
    fn pitch_separated_classes() {
        // Pitch grows with class index; actors add their own offset.
        let mut metas = Vec::new();
        let mut cues = Vec::new();
        for actor in 1..=4u8 {
            for e in Emotion::ALL {
                for i in 0..4 {
                    metas.push(meta(actor, e, i));
                    let jitter = ((actor as usize * 31 + i * 7 + e.index()) % 5) as f64 - 2.0;
                    cues.push(CueVector {
                        shrillness: 0.2,
                        loudness: 0.1,
                        mean_pitch: 120.0 + 30.0 * e.index() as f64 + 15.0 * actor as f64 + jitter,
                        pitch_range: 5.0 + jitter,
                        speaking_rate: 2.5,
                        pause_proportion: 0.1,
                    });
                }
            }
        }
        let refs: Vec<&ClipMeta> = metas.iter().collect();
        let t = derive_relation_table(&refs, &cues).unwrap();
        t.validate().unwrap();
        let p = Cue::MeanPitch as usize;
        assert_eq!(t.get(Emotion::Surprised, Emotion::Neutral)[p], Relation::Higher);
        assert_eq!(t.get(Emotion::Neutral, Emotion::Surprised)[p], Relation::Lower);
        assert_eq!(t.get(Emotion::Happy, Emotion::Happy), [Relation::Similar; 6]);
        assert_eq!(t.get(Emotion::Angry, Emotion::Happy)[Cue::Loudness as usize], Relation::Similar);
        let back = RelationTable::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn too_few_actors_is_rejected() {
        let metas = [meta(1, Emotion::Happy, 0), meta(2, Emotion::Sad, 0)];
        let refs: Vec<&ClipMeta> = metas.iter().collect();
        let cues = vec![CueVector::from_array([0.0; 6]); 2];
        assert!(derive_relation_table(&refs, &cues).is_err());
    }

    #[test]
    fn json_is_nested_arrays_of_strings() {
        let t = RelationTable::default();
        let v: serde_json::Value = serde_json::from_str(&t.to_json().unwrap()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 8);
        assert_eq!(v[3][5][2], "similar");
    }
}
