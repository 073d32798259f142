use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::meta::{ClipMeta, Emotion};
use super::waveform::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone)]
pub struct Clip {
    pub meta: ClipMeta,
    pub waveform: Waveform,
    /// Original file, when the clip was ingested from disk.
    pub source: Option<PathBuf>,
}

/// Clips plus a stratified 80/20 train/test assignment.
#[derive(Debug, Clone)]
pub struct Corpus {
    clips: Vec<Clip>,
    split: BTreeMap<String, Split>,
}

/// Fraction of each emotion's clips held out for testing.
pub const TEST_FRACTION: f64 = 0.2;

impl Corpus {
    /// Builds a corpus and assigns splits deterministically from `seed`,
    /// stratified by emotion.
    pub fn new(mut clips: Vec<Clip>, seed: u64) -> Self {
        clips.sort_by(|a, b| a.meta.clip_id.cmp(&b.meta.clip_id));
        let split = stratified_split(&clips, seed);
        Self { clips, split }
    }

    pub fn clips(&self) -> &[Clip] {
        &self.clips
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn split_of(&self, clip_id: &str) -> Option<Split> {
        self.split.get(clip_id).copied()
    }

    pub fn split_assignment(&self) -> &BTreeMap<String, Split> {
        &self.split
    }

    pub fn index_of(&self, clip_id: &str) -> Option<usize> {
        self.clips
            .binary_search_by(|c| c.meta.clip_id.as_str().cmp(clip_id))
            .ok()
    }

    pub fn get(&self, clip_id: &str) -> Option<&Clip> {
        self.index_of(clip_id).map(|i| &self.clips[i])
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.clips
            .iter()
            .enumerate()
            .filter(|(_, c)| self.split[&c.meta.clip_id] == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn train_indices(&self) -> Vec<usize> {
        self.indices(Split::Train)
    }

    pub fn test_indices(&self) -> Vec<usize> {
        self.indices(Split::Test)
    }

    /// Distinct actors present, ascending.
    pub fn actors(&self) -> Vec<u8> {
        let mut a: Vec<u8> = self.clips.iter().map(|c| c.meta.actor).collect();
        a.sort_unstable();
        a.dedup();
        a
    }
}

fn stratified_split(clips: &[Clip], seed: u64) -> BTreeMap<String, Split> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5151_7e57);
    let mut out = BTreeMap::new();
    for emotion in Emotion::ALL {
        let mut ids: Vec<&str> = clips
            .iter()
            .filter(|c| c.meta.emotion == emotion)
            .map(|c| c.meta.clip_id.as_str())
            .collect();
        ids.shuffle(&mut rng);
        let n = ids.len();
        let mut n_test = (n as f64 * TEST_FRACTION).round() as usize;
        if n >= 2 {
            n_test = n_test.clamp(1, n - 1);
        } else {
            n_test = 0;
        }
        for (i, id) in ids.into_iter().enumerate() {
            let s = if i < n_test { Split::Test } else { Split::Train };
            out.insert(id.to_string(), s);
        }
    }
    out
}
