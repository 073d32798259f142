//! Mini-batch SGD with momentum and the classifier training loop.

use log::info;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureSet;
use super::layers::Parameterized;
use super::loss::cross_entropy;
use super::model::{CnnArch, CnnModel};
use crate::audio_io::Corpus;
use crate::error::{Result, RexError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyper {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            epochs: 15,
            batch_size: 16,
            learning_rate: 0.01,
            momentum: 0.9,
            seed: 7,
        }
    }
}

/// `v <- mu v + g; p <- p - lr v`
#[derive(Debug, Clone)]
pub struct Sgd<M> {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: M,
}

impl<M: Parameterized> Sgd<M> {
    pub fn new(model: &M, learning_rate: f64, momentum: f64) -> Self {
        Self {
            learning_rate,
            momentum,
            velocity: model.zeroed(),
        }
    }

    pub fn step(&mut self, model: &mut M, grad: &M) {
        self.velocity.scale(self.momentum);
        self.velocity.add_scaled(grad, 1.0);
        model.add_scaled(&self.velocity, -self.learning_rate);
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<M> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    steps: i32,
    first: M,
    second: M,
}

impl<M: Parameterized> Adam<M> {
    pub fn new(model: &M, learning_rate: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            epsilon: 1e-8,
            steps: 0,
            first: model.zeroed(),
            second: model.zeroed(),
        }
    }

    pub fn step(&mut self, model: &mut M, grad: &M) {
        self.steps += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.steps);
        let c2 = 1.0 - b2.powi(self.steps);
        let lr = self.learning_rate;
        let eps = self.epsilon;
        let grads = grad.params();
        let firsts = self.first.params_mut();
        let seconds = self.second.params_mut();
        for (((mut p, g), mut m), mut v) in model.params_mut().into_iter().zip(grads).zip(firsts).zip(seconds) {
            ndarray::Zip::from(&mut p)
                .and(&g)
                .and(&mut m)
                .and(&mut v)
                .for_each(|p, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Emotion,
    Speaker,
}

/// Class index of every clip and the number of classes.
pub fn labels_for(corpus: &Corpus, target: Target) -> (Vec<usize>, usize) {
    match target {
        Target::Emotion => (
            corpus.clips().iter().map(|c| c.meta.emotion.index()).collect(),
            crate::audio_io::NUM_EMOTIONS,
        ),
        Target::Speaker => {
            let actors = corpus.actors();
            let labels = corpus
                .clips()
                .iter()
                .map(|c| actors.binary_search(&c.meta.actor).expect("actor listed"))
                .collect();
            (labels, actors.len())
        }
    }
}

pub fn accuracy(model: &CnnModel, inputs: &[Array2<f64>], labels: &[usize], idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0;
    for &i in idx {
        if model.predict(&inputs[i])? == labels[i] {
            hits += 1;
        }
    }
    Ok(hits as f64 / idx.len() as f64)
}

/// Trains the three-block CNN on the corpus's train split.
pub fn train_classifier(
    corpus: &Corpus,
    features: &FeatureSet,
    target: Target,
    hyper: &Hyper,
) -> Result<(CnnModel, Vec<EpochStats>)> {
    let (labels, classes) = labels_for(corpus, target);
    let train = corpus.train_indices();
    let mut per_class = vec![0usize; classes];
    for &i in &train {
        per_class[labels[i]] += 1;
    }
    if let Some(c) = per_class.iter().position(|&n| n < 2) {
        return Err(RexError::InvalidArgument(format!(
            "class {c} has {} training examples, need at least 2",
            per_class[c]
        )));
    }
    let arch = CnnArch::new(classes);
    fit_classifier(
        CnnModel::new(arch, hyper.seed),
        &features.inputs,
        &labels,
        &train,
        &corpus.test_indices(),
        hyper,
    )
}

/// Training loop over explicit inputs and labels.
pub fn fit_classifier(
    mut model: CnnModel,
    inputs: &[Array2<f64>],
    labels: &[usize],
    train: &[usize],
    test: &[usize],
    hyper: &Hyper,
) -> Result<(CnnModel, Vec<EpochStats>)> {
    if hyper.batch_size == 0 {
        return Err(RexError::InvalidArgument("batch size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed ^ 0x7a11_0c0d);
    let mut opt = Sgd::new(&model, hyper.learning_rate, hyper.momentum);
    let mut order = train.to_vec();
    let mut trace = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut hits = 0;
        for batch in order.chunks(hyper.batch_size) {
            let mut grad = model.zeroed();
            for &i in batch {
                let t = model.forward(&inputs[i])?;
                let (loss, dl) = cross_entropy(t.logits.view(), labels[i]);
                if !loss.is_finite() {
                    return Err(RexError::Diverged(format!(
                        "cross-entropy became {loss} at epoch {epoch}"
                    )));
                }
                loss_sum += loss;
                hits += usize::from(t.predicted() == labels[i]);
                model.backward(&t, dl.view(), None, &mut grad);
            }
            grad.scale(1.0 / batch.len() as f64);
            opt.step(&mut model, &grad);
            if !model.all_finite() {
                return Err(RexError::Diverged(format!(
                    "non-finite parameters at epoch {epoch}"
                )));
            }
        }
        let stats = EpochStats {
            epoch,
            train_loss: loss_sum / order.len().max(1) as f64,
            train_accuracy: hits as f64 / order.len().max(1) as f64,
            test_accuracy: accuracy(&model, inputs, labels, test)?,
        };
        info!(
            "epoch {epoch}: loss {:.4} train {:.3} test {:.3}",
            stats.train_loss, stats.train_accuracy, stats.test_accuracy
        );
        trace.push(stats);
    }
    Ok((model, trace))
}
