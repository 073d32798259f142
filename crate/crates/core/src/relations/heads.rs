//! Cue differences and the two dense heads: `M_y` re-predicts the emotion
//! from cue differences against every other class, `M_r` predicts the
//! ordinal relation of each cue for one contrast pair.

use ndarray::{concatenate, Array1, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nnrank::RELATION_BITS;
use crate::audio_io::{Emotion, NUM_EMOTIONS};
use crate::dsp::{CueVector, NUM_CUES};
use crate::error::{Result, RexError};
use crate::tensornet::{lrp_attribute, DenseNet, Parameterized, EMBEDDING_DIM};
use ndarray::{ArrayViewD, ArrayViewMutD};

pub const HEAD_HIDDEN: usize = 64;
/// Eight cue-difference slots plus the target embedding.
pub const MY_INPUTS: usize = NUM_EMOTIONS * NUM_CUES + EMBEDDING_DIM;
/// Weighted cue differences plus target and contrast embeddings.
pub const MR_INPUTS: usize = 2 * NUM_CUES + 2 * EMBEDDING_DIM;
pub const MR_OUTPUTS: usize = NUM_CUES * RELATION_BITS;

/// Per-cue standard deviations over the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueScale {
    pub std: [f64; NUM_CUES],
}

impl CueScale {
    pub fn fit(cues: &[CueVector]) -> Result<Self> {
        if cues.len() < 2 {
            return Err(RexError::InvalidArgument(
                "cue scale needs at least two cue vectors".into(),
            ));
        }
        let n = cues.len() as f64;
        let mut std = [0.0; NUM_CUES];
        for (k, s) in std.iter_mut().enumerate() {
            let mean = cues.iter().map(|c| c.to_array()[k]).sum::<f64>() / n;
            let var = cues.iter().map(|c| (c.to_array()[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            *s = var.sqrt().max(1e-9);
        }
        Ok(Self { std })
    }
}

/// `(target - contrast) / sd`, per cue.
pub fn cue_differences(target: &CueVector, contrast: &CueVector, scale: &CueScale) -> [f64; NUM_CUES] {
    let (a, b) = (target.to_array(), contrast.to_array());
    let mut out = [0.0; NUM_CUES];
    for k in 0..NUM_CUES {
        out[k] = (a[k] - b[k]) / scale.std[k];
    }
    out
}

/// Cue differences followed by their attributions.
pub fn weighted_cue_diffs(diff: &[f64; NUM_CUES], attributions: &[f64; NUM_CUES]) -> [f64; 2 * NUM_CUES] {
    let mut out = [0.0; 2 * NUM_CUES];
    out[..NUM_CUES].copy_from_slice(diff);
    out[NUM_CUES..].copy_from_slice(attributions);
    out
}

/// `M_y` input: the 8 cue-difference slots in class order, with the slot of
/// `own` zeroed, followed by the target embedding.
pub fn my_input(diffs: &[[f64; NUM_CUES]; NUM_EMOTIONS], own: Emotion, z_target: &Array1<f64>) -> Array1<f64> {
    let mut slots = Array1::zeros(NUM_EMOTIONS * NUM_CUES);
    for (e, d) in diffs.iter().enumerate() {
        if e == own.index() {
            continue;
        }
        for k in 0..NUM_CUES {
            slots[e * NUM_CUES + k] = d[k];
        }
    }
    concatenate(Axis(0), &[slots.view(), z_target.view()]).expect("1-D concat")
}

pub fn mr_input(weighted: &[f64; 2 * NUM_CUES], z_target: &Array1<f64>, z_contrast: &Array1<f64>) -> Array1<f64> {
    let w = Array1::from_vec(weighted.to_vec());
    concatenate(Axis(0), &[w.view(), z_target.view(), z_contrast.view()]).expect("1-D concat")
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadsModel {
    pub m_y: DenseNet,
    pub m_r: DenseNet,
}

impl HeadsModel {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            m_y: DenseNet::new(&mut rng, &[MY_INPUTS, HEAD_HIDDEN, NUM_EMOTIONS]),
            m_r: DenseNet::new(&mut rng, &[MR_INPUTS, HEAD_HIDDEN, MR_OUTPUTS]),
        }
    }

    /// Relevance of each cue-difference input in the slot of `contrast`,
    /// for `M_y`'s logit of class `explained`.
    pub fn cue_attributions(&self, my_in: &Array1<f64>, explained: Emotion) -> [[f64; NUM_CUES]; NUM_EMOTIONS] {
        let r = lrp_attribute(&self.m_y, my_in, explained.index());
        let mut out = [[0.0; NUM_CUES]; NUM_EMOTIONS];
        for (e, slot) in out.iter_mut().enumerate() {
            for k in 0..NUM_CUES {
                slot[k] = r[e * NUM_CUES + k];
            }
        }
        out
    }
}

impl Parameterized for HeadsModel {
    fn params(&self) -> Vec<ArrayViewD<'_, f64>> {
        let mut v = self.m_y.params();
        v.extend(self.m_r.params());
        v
    }

    fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        let mut v = self.m_y.params_mut();
        v.extend(self.m_r.params_mut());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensornet::{sigmoid, Dense};
    use ndarray::Array2;

    fn cv(a: [f64; 6]) -> CueVector {
        CueVector::from_array(a)
    }

    #[test]
    fn differences_standardise_and_flip_sign() {
        let mut scale = CueScale { std: [1.0; 6] };
        scale.std[2] = 40.0;
        let a = cv([0.3, 0.1, 250.0, 10.0, 2.0, 0.1]);
        let b = cv([0.2, 0.1, 200.0, 12.0, 2.5, 0.3]);
        let d = cue_differences(&a, &b, &scale);
        assert!((d[2] - 1.25).abs() < 1e-12);
        let r = cue_differences(&b, &a, &scale);
        for k in 0..6 {
            assert_eq!(d[k], -r[k]);
        }
        assert_eq!(cue_differences(&a, &a, &scale), [0.0; 6]);
    }

    #[test]
    fn scale_uses_sample_std() {
        let s = CueScale::fit(&[cv([0.0; 6]), cv([2.0; 6])]).unwrap();
        assert!((s.std[0] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn weighted_is_concatenation() {
        assert_eq!(weighted_cue_diffs(&[0.0; 6], &[0.0; 6]), [0.0; 12]);
        let w = weighted_cue_diffs(&[1.0; 6], &[2.0; 6]);
        assert_eq!(w.len(), 12);
        assert_eq!(w[5], 1.0);
        assert_eq!(w[6], 2.0);
    }

    #[test]
    fn layout_zeroes_own_slot() {
        let mut diffs = [[1.0; 6]; 8];
        diffs[3] = [5.0; 6];
        let z = Array1::from_elem(EMBEDDING_DIM, 0.5);
        let x = my_input(&diffs, Emotion::ALL[3], &z);
        assert_eq!(x.len(), MY_INPUTS);
        assert!(x.slice(ndarray::s![18..24]).iter().all(|&v| v == 0.0));
        assert_eq!(x[0], 1.0);
        assert_eq!(x[48], 0.5);
        assert_eq!(mr_input(&[0.0; 12], &z, &z).len(), MR_INPUTS);
    }

    #[test]
    fn linear_my_attributions_are_w_times_x() {
        // Single bias-free linear M_y: relevance of input i is w_i x_i.
        let mut h = HeadsModel::new(1);
        let w = Array2::from_shape_fn((NUM_EMOTIONS, MY_INPUTS), |(o, i)| ((o * 7 + i * 3) % 11) as f64 / 10.0 - 0.5);
        h.m_y = DenseNet {
            layers: vec![Dense { weight: w.clone(), bias: Array1::zeros(NUM_EMOTIONS) }],
        };
        let mut diffs = [[0.0; 6]; 8];
        for (e, d) in diffs.iter_mut().enumerate() {
            for (k, v) in d.iter_mut().enumerate() {
                *v = (e as f64 - 3.5) * 0.3 + k as f64 * 0.1;
            }
        }
        let z = Array1::from_shape_fn(EMBEDDING_DIM, |i| (i % 5) as f64 * 0.1);
        let x = my_input(&diffs, Emotion::Calm, &z);
        let attr = h.cue_attributions(&x, Emotion::Sad);
        for e in 0..8 {
            for k in 0..6 {
                let i = e * 6 + k;
                assert!((attr[e][k] - w[[Emotion::Sad.index(), i]] * x[i]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn relation_head_outputs_are_probabilities() {
        let h = HeadsModel::new(3);
        let z = Array1::from_elem(EMBEDDING_DIM, 1.0);
        let out = h.m_r.forward(mr_input(&[0.5; 12], &z, &z).view()).output;
        assert_eq!(out.len(), MR_OUTPUTS);
        for v in out.iter().map(|&l| sigmoid(l)) {
            assert!(v > 0.0 && v < 1.0);
        }
    }
}
