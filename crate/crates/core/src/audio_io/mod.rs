//! Dataset ingestion and waveform standardization.

mod corpus;
mod meta;
mod ravdess;
mod synth;
mod waveform;

pub use corpus::{Clip, Corpus, Split, TEST_FRACTION};
pub use meta::{ClipMeta, Emotion, Intensity, Statement, NUM_EMOTIONS, WORDS_PER_STATEMENT};
pub use ravdess::{ingest_ravdess, parse_filename, IngestReport, ParsedName};
pub use synth::{synth_clip, synth_corpus, SynthProfile, SYNTH_ACTORS};
pub use waveform::{read_wav, standardize, Waveform, CLIP_SAMPLES, SAMPLE_RATE};
