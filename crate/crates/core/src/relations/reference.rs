//! Published full-scale cue relations of every emotion against Happy,
//! kept as a fixture for bundles and display code. Not derived here.

use super::table::{CueRelationVector, Relation};
use crate::audio_io::Emotion;

use Relation::{Higher as H, Lower as L, Similar as S};

/// Relations of `target` against Happy on the full recorded corpus, in cue
/// order. One cell reported as "average" is read as similar.
pub fn reference_vs_happy(target: Emotion) -> CueRelationVector {
    match target {
        Emotion::Neutral => [L, L, L, L, S, S],
        Emotion::Calm => [L, L, L, L, L, S],
        Emotion::Happy => [S, S, S, S, S, S],
        Emotion::Fearful => [S, S, S, S, S, H],
        Emotion::Surprised => [L, S, S, S, S, S],
        Emotion::Sad => [L, L, L, L, S, H],
        Emotion::Disgust => [S, L, L, L, L, H],
        Emotion::Angry => [H, H, S, S, L, H],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angry_and_happy_rows() {
        assert_eq!(reference_vs_happy(Emotion::Angry), [H, H, S, S, L, H]);
        assert_eq!(reference_vs_happy(Emotion::Happy), [S; 6]);
    }
}
