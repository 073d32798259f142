//! Counterfactual examples: real samples and generator synthetics.

mod samples;
mod stargan;

use serde::{Deserialize, Serialize};

pub use samples::{select_peer, select_sample};
pub use stargan::{
    cycle_report, mean_squared_error, reconstruction_similarity, similarity_from_mse, synthetic_class_accuracy,
    train_adversarial, train_stargan, CycleReport, DiscTrace, Discriminator, GanEpochStats, GanHyper, GenTrace,
    Generator, StarGan,
};

/// Where counterfactuals for cue differences come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CounterfactualSource {
    #[default]
    Samples,
    Synthetics,
}
