//! Cue relations: ground truth, ordinal encoding, the relation and
//! final-concept heads, and joint training.

mod chain;
mod heads;
mod joint;
mod nnrank;
mod reference;
mod table;

pub use chain::{
    slot_diffs, ClipView, ContrastExplanation, CounterfactualRef, CueContext, Explanation, PairCues, PairEvidence,
    RexNet,
};
pub use heads::{
    cue_differences, mr_input, my_input, weighted_cue_diffs, CueScale, HeadsModel, HEAD_HIDDEN,
    MR_INPUTS, MR_OUTPUTS, MY_INPUTS,
};
pub use joint::{fit_cue_scale, joint_train, JointEpochStats, JointHyper};
pub use nnrank::{decode_relations, encode_relations, nnrank_decode, nnrank_encode, RELATION_BITS};
pub use reference::reference_vs_happy;
pub use table::{
    derive_corpus_table, derive_relation_table, welch_p_value, CueRelationVector, Relation, RelationTable, FAMILY_ALPHA,
    UNORDERED_PAIRS,
};
