//! Counterfactual samples: real clips of the same actor and sentence
//! portraying another emotion.

use crate::audio_io::{ClipMeta, Corpus, Emotion};
use crate::error::{Result, RexError};

/// Corpus index of the best clip with `clip`'s actor and statement and
/// emotion `gamma`.
///
/// Preference: same intensity, then same repetition, then lowest clip id.
/// A differing intensity is accepted when nothing else exists (neutral has
/// no strong portrayals).
pub fn select_sample(corpus: &Corpus, clip: &ClipMeta, gamma: Emotion) -> Result<usize> {
    if gamma == clip.emotion {
        return Err(RexError::SelfContrast(format!(
            "{} already portrays {gamma}",
            clip.clip_id
        )));
    }
    select_peer(corpus, clip, gamma)
}

/// Like [`select_sample`] but also accepts `gamma == clip.emotion`, in which
/// case another portrayal of the same emotion is returned. The clip itself
/// is never selected.
pub fn select_peer(corpus: &Corpus, clip: &ClipMeta, gamma: Emotion) -> Result<usize> {
    corpus
        .clips()
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            c.meta.actor == clip.actor
                && c.meta.statement == clip.statement
                && c.meta.emotion == gamma
                && c.meta.clip_id != clip.clip_id
        })
        .min_by_key(|(_, c)| {
            (
                c.meta.intensity != clip.intensity,
                c.meta.repetition != clip.repetition,
                c.meta.clip_id.clone(),
            )
        })
        .map(|(i, _)| i)
        .ok_or_else(|| RexError::NoCounterfactual {
            clip_id: clip.clip_id.clone(),
            emotion: gamma.to_string(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio_io::{Clip, Intensity, Statement, Waveform};

    fn clip(actor: u8, e: Emotion, int: Intensity, st: Statement, rep: u8) -> Clip {
        let meta = ClipMeta {
            clip_id: format!(
                "03-01-{:02}-{:02}-{:02}-{:02}-{:02}",
                e.code(),
                if int == Intensity::Strong { 2 } else { 1 },
                st.code(),
                rep,
                actor
            ),
            actor,
            emotion: e,
            intensity: int,
            statement: st,
            repetition: rep,
            word_count: 6,
        };
        Clip {
            meta,
            waveform: Waveform::silence(),
            source: None,
        }
    }

    /// Small inventory shaped like the recorded corpus: neutral has only
    /// normal intensity.
    fn inventory() -> Corpus {
        let mut clips = Vec::new();
        for actor in [3u8, 5] {
            for e in Emotion::ALL {
                for st in [Statement::Kids, Statement::Dogs] {
                    for rep in [1, 2] {
                        clips.push(clip(actor, e, Intensity::Normal, st, rep));
                        if e != Emotion::Neutral {
                            clips.push(clip(actor, e, Intensity::Strong, st, rep));
                        }
                    }
                }
            }
        }
        Corpus::new(clips, 1)
    }

    #[test]
    fn same_actor_and_statement() {
        let c = inventory();
        let src = clip(5, Emotion::Sad, Intensity::Normal, Statement::Dogs, 2).meta;
        let i = select_sample(&c, &src, Emotion::Happy).unwrap();
        let m = &c.clips()[i].meta;
        assert_eq!((m.actor, m.statement, m.emotion), (5, Statement::Dogs, Emotion::Happy));
        assert_eq!((m.intensity, m.repetition), (Intensity::Normal, 2));
    }

    #[test]
    fn self_contrast_is_rejected() {
        let c = inventory();
        let src = clip(5, Emotion::Sad, Intensity::Normal, Statement::Dogs, 2).meta;
        assert!(matches!(
            select_sample(&c, &src, Emotion::Sad),
            Err(RexError::SelfContrast(_))
        ));
        let peer = select_peer(&c, &src, Emotion::Sad).unwrap();
        assert_ne!(c.clips()[peer].meta.clip_id, src.clip_id);
    }

    #[test]
    fn strong_to_neutral_relaxes_intensity() {
        let c = inventory();
        let src = clip(3, Emotion::Angry, Intensity::Strong, Statement::Kids, 1).meta;
        let m = &c.clips()[select_sample(&c, &src, Emotion::Neutral).unwrap()].meta;
        assert_eq!((m.emotion, m.intensity, m.repetition), (Emotion::Neutral, Intensity::Normal, 1));
    }

    #[test]
    fn missing_actor_is_an_error() {
        let c = inventory();
        let src = clip(9, Emotion::Angry, Intensity::Normal, Statement::Kids, 1).meta;
        assert!(matches!(
            select_sample(&c, &src, Emotion::Calm),
            Err(RexError::NoCounterfactual { .. })
        ));
    }
}
