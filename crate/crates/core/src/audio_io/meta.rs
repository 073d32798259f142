//! Clip metadata: emotions, intensities and statements as coded by the
//! RAVDESS filename convention.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::RexError;

/// The eight emotion classes, ordered by their RAVDESS numeric code
/// (01 = neutral … 08 = surprised). The index of a variant is its code
/// minus one and is the class index used by every model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Neutral,
    Calm,
    Happy,
    Sad,
    Angry,
    Fearful,
    Disgust,
    Surprised,
}

pub const NUM_EMOTIONS: usize = 8;

impl Emotion {
    pub const ALL: [Emotion; NUM_EMOTIONS] = [
        Emotion::Neutral,
        Emotion::Calm,
        Emotion::Happy,
        Emotion::Sad,
        Emotion::Angry,
        Emotion::Fearful,
        Emotion::Disgust,
        Emotion::Surprised,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Emotion> {
        Self::ALL.get(index).copied()
    }

    /// RAVDESS numeric code, 1..=8.
    pub fn code(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_code(code: u8) -> Option<Emotion> {
        code.checked_sub(1).and_then(|i| Self::from_index(i as usize))
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Neutral => "neutral",
            Emotion::Calm => "calm",
            Emotion::Happy => "happy",
            Emotion::Sad => "sad",
            Emotion::Angry => "angry",
            Emotion::Fearful => "fearful",
            Emotion::Disgust => "disgust",
            Emotion::Surprised => "surprised",
        }
    }

    /// All emotions except `self`, in code order.
    pub fn contrasts(self) -> impl Iterator<Item = Emotion> {
        Self::ALL.into_iter().filter(move |&e| e != self)
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = RexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|e| e.name() == lower)
            .ok_or_else(|| RexError::InvalidArgument(format!("unknown emotion '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intensity {
    Normal,
    Strong,
}

impl Intensity {
    pub fn from_code(code: u8) -> Option<Intensity> {
        match code {
            1 => Some(Intensity::Normal),
            2 => Some(Intensity::Strong),
            _ => None,
        }
    }
}

/// The two fixed sentences read by every actor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Statement {
    /// "kids are talking by the door"
    #[serde(rename = "1")]
    Kids,
    /// "dogs are sitting by the door"
    #[serde(rename = "2")]
    Dogs,
}

impl Statement {
    pub fn from_code(code: u8) -> Option<Statement> {
        match code {
            1 => Some(Statement::Kids),
            2 => Some(Statement::Dogs),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Statement::Kids => 1,
            Statement::Dogs => 2,
        }
    }

    pub fn text(self) -> &'static str {
        match self {
            Statement::Kids => "kids are talking by the door",
            Statement::Dogs => "dogs are sitting by the door",
        }
    }
}

/// Both statements have six words.
pub const WORDS_PER_STATEMENT: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipMeta {
    pub clip_id: String,
    pub actor: u8,
    pub emotion: Emotion,
    pub intensity: Intensity,
    pub statement: Statement,
    pub repetition: u8,
    pub word_count: usize,
}

impl ClipMeta {
    /// Checks the metadata invariants (actor range, neutral intensity,
    /// word count).
    pub fn validate(&self) -> Result<(), RexError> {
        if !(1..=24).contains(&self.actor) {
            return Err(RexError::InvalidArgument(format!(
                "actor {} outside 1..=24",
                self.actor
            )));
        }
        if self.emotion == Emotion::Neutral && self.intensity != Intensity::Normal {
            return Err(RexError::InvalidArgument(
                "neutral clips have normal intensity only".into(),
            ));
        }
        if !(1..=2).contains(&self.repetition) {
            return Err(RexError::InvalidArgument(format!(
                "repetition {} outside 1..=2",
                self.repetition
            )));
        }
        if self.word_count != WORDS_PER_STATEMENT {
            return Err(RexError::InvalidArgument(format!(
                "word_count {} != {WORDS_PER_STATEMENT}",
                self.word_count
            )));
        }
        Ok(())
    }
}
