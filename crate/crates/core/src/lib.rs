//! Relatable contrastive explanations for vocal emotion recognition.
//!
//! The crate predicts an emotion from a 3 s voice clip and explains the
//! prediction against any contrast emotion in three ways: a contrastive
//! saliency bar aligned to words, a counterfactual example of the same
//! speaker and sentence, and ordinal relations between six prosodic cues.

pub mod audio_io;
pub mod counterfactual;
pub mod dsp;
pub mod evalsuite;
pub mod pipeline;
pub mod relations;
pub mod saliency;
pub mod tensornet;
pub mod error;

pub use error::{Result, RexError};
