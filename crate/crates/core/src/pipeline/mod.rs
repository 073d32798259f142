//! Configuration, training/explanation/evaluation commands, explanation
//! bundles and static serving.

pub mod bundle;
mod commands;
mod config;
pub mod serve;
pub mod store;

pub use bundle::{BundleIndex, ContrastEntry, ExplanationBundle, IndexEntry, BUNDLE_SCHEMA, INDEX_SCHEMA, SCHEMA_VERSION};
pub use commands::{
    cmd_evaluate, cmd_explain, cmd_train, evaluate_run, load_run, non_monotone_steps, Check, ContrastSelection,
    Evaluation, MetricsTrace, TrainedRun, METRICS_FILE, TABLE_TEXT_FILE,
};
pub use config::Config;
pub use serve::{ServerHandle, StaticServer};
