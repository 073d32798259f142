//! Ordinal encoding of relations as cumulative binary indicators.

use super::table::{CueRelationVector, Relation};
use crate::dsp::NUM_CUES;

pub const RELATION_BITS: usize = 2;

pub fn nnrank_encode(r: Relation) -> [f64; RELATION_BITS] {
    match r {
        Relation::Lower => [0.0, 0.0],
        Relation::Similar => [1.0, 0.0],
        Relation::Higher => [1.0, 1.0],
    }
}

/// Counts leading bits at or above 0.5: none is lower, one similar, two
/// higher. A sub-threshold first bit ends the scan whatever the second.
pub fn nnrank_decode(probs: [f64; RELATION_BITS]) -> Relation {
    let ones = probs.iter().take_while(|&&p| p >= 0.5).count();
    match ones {
        0 => Relation::Lower,
        1 => Relation::Similar,
        _ => Relation::Higher,
    }
}

/// Twelve targets, two per cue.
pub fn encode_relations(r: &CueRelationVector) -> [f64; NUM_CUES * RELATION_BITS] {
    let mut out = [0.0; NUM_CUES * RELATION_BITS];
    for (k, rel) in r.iter().enumerate() {
        out[2 * k..2 * k + 2].copy_from_slice(&nnrank_encode(*rel));
    }
    out
}

pub fn decode_relations(probs: &[f64]) -> CueRelationVector {
    let mut out = [Relation::Similar; NUM_CUES];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = nnrank_decode([probs[2 * k], probs[2 * k + 1]]);
    }
    out
}
