//! The three-block CNN shared by the emotion model and the speaker model.

use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayViewD, ArrayViewMutD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    flatten3, max_pool2, max_pool2_backward, relu, relu3, relu_backward, Conv2d, Conv2dCache,
    Dense, MaxPoolCache, Parameterized,
};
use super::loss::{argmax, softmax};
use crate::dsp::{N_FRAMES, N_MELS};
use crate::error::{Result, RexError};

pub const EMBEDDING_DIM: usize = 64;

/// Shape hyper-parameters. The defaults give the full-size model; tests
/// shrink the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnArch {
    pub input_hw: (usize, usize),
    pub channels: [usize; 3],
    pub embedding: usize,
    pub classes: usize,
}

impl CnnArch {
    pub fn new(classes: usize) -> Self {
        Self {
            input_hw: (N_MELS, N_FRAMES),
            channels: [8, 16, 32],
            embedding: EMBEDDING_DIM,
            classes,
        }
    }

    /// `[channels, h, w]` after the last pooling stage.
    pub fn pooled_shape(&self) -> (usize, usize, usize) {
        let (mut h, mut w) = self.input_hw;
        for _ in 0..3 {
            h /= 2;
            w /= 2;
        }
        (self.channels[2], h, w)
    }

    pub fn flat_dim(&self) -> usize {
        let (c, h, w) = self.pooled_shape();
        c * h * w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub arch: CnnArch,
    pub conv: Vec<Conv2d>,
    pub fc1: Dense,
    pub fc2: Dense,
}

/// Everything the backward pass and Grad-CAM need from one forward pass.
#[derive(Debug, Clone)]
pub struct CnnTrace {
    conv_caches: Vec<Conv2dCache>,
    /// Post-ReLU output of each conv block, before pooling.
    conv_out: Vec<Array3<f64>>,
    pool_caches: Vec<MaxPoolCache>,
    flat: Array1<f64>,
    pub embedding: Array1<f64>,
    pub logits: Array1<f64>,
}

impl CnnTrace {
    /// Post-ReLU activations of the final conv block.
    pub fn last_conv(&self) -> &Array3<f64> {
        self.conv_out.last().expect("three blocks")
    }

    pub fn probabilities(&self) -> Array1<f64> {
        softmax(self.logits.view())
    }

    pub fn predicted(&self) -> usize {
        argmax(self.logits.view())
    }
}

impl CnnModel {
    pub fn new(arch: CnnArch, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut prev = 1;
        let conv = arch
            .channels
            .iter()
            .map(|&c| {
                let layer = Conv2d::new(&mut rng, prev, c);
                prev = c;
                layer
            })
            .collect();
        Self {
            conv,
            fc1: Dense::new(&mut rng, arch.flat_dim(), arch.embedding),
            fc2: Dense::new(&mut rng, arch.embedding, arch.classes),
            arch,
        }
    }

    /// All parameters zero: logits are zero and the softmax is uniform.
    pub fn zeros(arch: CnnArch) -> Self {
        Self::new(arch, 0).zeroed()
    }

    pub fn classes(&self) -> usize {
        self.arch.classes
    }

    pub fn forward(&self, input: &Array2<f64>) -> Result<CnnTrace> {
        if input.dim() != self.arch.input_hw {
            return Err(RexError::ShapeMismatch {
                expected: format!("{:?}", self.arch.input_hw),
                actual: format!("{:?}", input.dim()),
            });
        }
        let mut x = input.clone().insert_axis(ndarray::Axis(0));
        let mut conv_caches = Vec::with_capacity(3);
        let mut conv_out = Vec::with_capacity(3);
        let mut pool_caches = Vec::with_capacity(3);
        for layer in &self.conv {
            let (y, cache) = layer.forward(&x);
            let a = relu3(&y);
            let (p, pc) = max_pool2(&a);
            conv_caches.push(cache);
            conv_out.push(a);
            pool_caches.push(pc);
            x = p;
        }
        let flat = flatten3(&x);
        let embedding = relu(&self.fc1.forward(flat.view()));
        let logits = self.fc2.forward(embedding.view());
        Ok(CnnTrace {
            conv_caches,
            conv_out,
            pool_caches,
            flat,
            embedding,
            logits,
        })
    }

    pub fn predict(&self, input: &Array2<f64>) -> Result<usize> {
        Ok(self.forward(input)?.predicted())
    }

    /// Accumulates parameter gradients into `grad` given `dL/dlogits` and an
    /// optional extra `dL/dembedding` from downstream heads.
    pub fn backward(
        &self,
        trace: &CnnTrace,
        dlogits: ArrayView1<f64>,
        dembedding: Option<ArrayView1<f64>>,
        grad: &mut CnnModel,
    ) {
        self.backward_inner(trace, dlogits, dembedding, grad, false);
    }

    /// As [`CnnModel::backward`], also returning `dL/dinput`.
    pub fn backward_with_input(
        &self,
        trace: &CnnTrace,
        dlogits: ArrayView1<f64>,
        grad: &mut CnnModel,
    ) -> Array2<f64> {
        let d = self
            .backward_inner(trace, dlogits, None, grad, true)
            .expect("input gradient requested");
        d.index_axis_move(ndarray::Axis(0), 0)
    }

    fn backward_inner(
        &self,
        trace: &CnnTrace,
        dlogits: ArrayView1<f64>,
        dembedding: Option<ArrayView1<f64>>,
        grad: &mut CnnModel,
        need_input: bool,
    ) -> Option<Array3<f64>> {
        let mut demb = self
            .fc2
            .backward(trace.embedding.view(), dlogits, &mut grad.fc2);
        if let Some(extra) = dembedding {
            demb += &extra;
        }
        relu_backward(&mut demb, &trace.embedding);
        let dflat = self.fc1.backward(trace.flat.view(), demb.view(), &mut grad.fc1);
        let mut d = dflat
            .into_shape_with_order(self.arch.pooled_shape())
            .expect("pooled shape");
        for i in (0..self.conv.len()).rev() {
            let mut da = max_pool2_backward(&trace.pool_caches[i], &d);
            relu_backward(&mut da, &trace.conv_out[i]);
            let need_dx = i > 0 || need_input;
            match self.conv[i].backward(&trace.conv_caches[i], &da, &mut grad.conv[i], need_dx) {
                Some(dx) => d = dx,
                None => return None,
            }
        }
        Some(d)
    }

    /// Gradient of `logits[class]` with respect to the post-ReLU activations
    /// of the final conv block. Parameters are untouched.
    pub fn last_conv_gradient(&self, trace: &CnnTrace, class: usize) -> Array3<f64> {
        let mut demb = self.fc2.weight.row(class).to_owned();
        relu_backward(&mut demb, &trace.embedding);
        let dflat = self.fc1.weight.t().dot(&demb);
        let d = dflat
            .into_shape_with_order(self.arch.pooled_shape())
            .expect("pooled shape");
        max_pool2_backward(trace.pool_caches.last().expect("three blocks"), &d)
    }
}

impl Parameterized for CnnModel {
    fn params(&self) -> Vec<ArrayViewD<'_, f64>> {
        let mut v: Vec<_> = self.conv.iter().flat_map(|c| c.params()).collect();
        v.extend(self.fc1.params());
        v.extend(self.fc2.params());
        v
    }

    fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        let mut v: Vec<_> = self.conv.iter_mut().flat_map(|c| c.params_mut()).collect();
        v.extend(self.fc1.params_mut());
        v.extend(self.fc2.params_mut());
        v
    }
}
