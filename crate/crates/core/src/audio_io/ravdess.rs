//! RAVDESS ingestion. Filenames follow
//! `MM-VC-EE-II-SS-RR-AA.wav` (modality, vocal channel, emotion, intensity,
//! statement, repetition, actor), every field two zero-padded digits.

use std::path::{Path, PathBuf};

use super::corpus::{Clip, Corpus};
use super::meta::{ClipMeta, Emotion, Intensity, Statement, WORDS_PER_STATEMENT};
use super::waveform::{read_wav, standardize};
use crate::error::{Result, RexError};

const AUDIO_ONLY: u8 = 3;
const SPEECH: u8 = 1;

/// Outcome of parsing one filename.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedName {
    Speech(ClipMeta),
    /// Well-formed but not audio-only speech (video modality, song, …).
    Filtered,
    Malformed(String),
}

pub fn parse_filename(name: &str) -> ParsedName {
    let stem = match name.strip_suffix(".wav").or_else(|| name.strip_suffix(".WAV")) {
        Some(s) => s,
        None => return ParsedName::Malformed(format!("{name}: not a .wav file")),
    };
    let fields: Vec<&str> = stem.split('-').collect();
    if fields.len() != 7 || fields.iter().any(|f| f.len() != 2) {
        return ParsedName::Malformed(format!("{name}: expected 7 two-digit fields"));
    }
    let mut codes = [0u8; 7];
    for (slot, f) in codes.iter_mut().zip(&fields) {
        match f.parse::<u8>() {
            Ok(v) => *slot = v,
            Err(_) => return ParsedName::Malformed(format!("{name}: non-numeric field '{f}'")),
        }
    }
    let [modality, channel, emotion, intensity, statement, repetition, actor] = codes;
    if modality != AUDIO_ONLY || channel != SPEECH {
        return ParsedName::Filtered;
    }
    let (Some(emotion), Some(intensity), Some(statement)) = (
        Emotion::from_code(emotion),
        Intensity::from_code(intensity),
        Statement::from_code(statement),
    ) else {
        return ParsedName::Malformed(format!("{name}: field out of range"));
    };
    let meta = ClipMeta {
        clip_id: stem.to_string(),
        actor,
        emotion,
        intensity,
        statement,
        repetition,
        word_count: WORDS_PER_STATEMENT,
    };
    match meta.validate() {
        Ok(()) => ParsedName::Speech(meta),
        Err(e) => ParsedName::Malformed(format!("{name}: {e}")),
    }
}

/// Counters reported after ingestion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub loaded: usize,
    pub filtered: usize,
    pub malformed: usize,
    pub unreadable: usize,
}

/// Loads every audio-only speech clip below `root`, standardizes it and
/// assigns a seeded stratified split.
pub fn ingest_ravdess(root: &Path, seed: u64) -> Result<(Corpus, IngestReport)> {
    let mut files = Vec::new();
    collect_wavs(root, &mut files)?;
    files.sort();
    let mut report = IngestReport::default();
    let mut clips = Vec::new();
    for path in files {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let meta = match parse_filename(name) {
            ParsedName::Speech(m) => m,
            ParsedName::Filtered => {
                report.filtered += 1;
                continue;
            }
            ParsedName::Malformed(why) => {
                log::warn!("skipping {why}");
                report.malformed += 1;
                continue;
            }
        };
        let waveform = match read_wav(&path).and_then(|(s, r)| standardize(&s, r)) {
            Ok(w) => w,
            Err(e) => {
                log::warn!("skipping unreadable {}: {e}", path.display());
                report.unreadable += 1;
                continue;
            }
        };
        report.loaded += 1;
        clips.push(Clip {
            meta,
            waveform,
            source: Some(path),
        });
    }
    if clips.is_empty() {
        return Err(RexError::EmptyCorpus(root.to_path_buf()));
    }
    Ok((Corpus::new(clips, seed), report))
}

fn collect_wavs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| RexError::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| RexError::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            collect_wavs(&path, out)?;
        } else if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
        {
            out.push(path);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_speech_filename() {
        let ParsedName::Speech(m) = parse_filename("03-01-05-01-02-01-12.wav") else {
            panic!("expected speech clip");
        };
        assert_eq!(m.emotion, Emotion::Angry);
        assert_eq!(m.intensity, Intensity::Normal);
        assert_eq!(m.statement, Statement::Dogs);
        assert_eq!(m.repetition, 1);
        assert_eq!(m.actor, 12);
        assert_eq!(m.word_count, 6);
    }

    #[test]
    fn video_and_song_are_filtered() {
        assert_eq!(parse_filename("01-01-05-01-02-01-12.wav"), ParsedName::Filtered);
        assert_eq!(parse_filename("03-02-05-01-02-01-12.wav"), ParsedName::Filtered);
    }

    #[test]
    fn malformed_names_are_rejected() {
        for name in [
            "03-01-05-01-02-01.wav",
            "03-01-09-01-02-01-12.wav",
            "03-01-01-02-01-01-12.wav",
            "03-01-05-01-02-01-25.wav",
            "3-1-5-1-2-1-12.wav",
            "readme.txt",
        ] {
            assert!(matches!(parse_filename(name), ParsedName::Malformed(_)), "{name}");
        }
    }

    #[test]
    fn empty_directory_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            ingest_ravdess(dir.path(), 0),
            Err(RexError::EmptyCorpus(_))
        ));
    }
}
