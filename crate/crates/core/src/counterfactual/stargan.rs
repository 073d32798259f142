//! A small StarGAN over mel spectrograms.
//!
//! The generator treats mel bins as channels and convolves over time, with
//! the target class appended as constant one-hot channels. It predicts a
//! residual on the standardised input and clamps the result at zero in
//! `log(1 + power)` space, so every synthetic spectrogram is non-negative. The discriminator scores realness from time-averaged
//! features, and the domain classifier is a separately trained CNN.

use log::info;
use ndarray::{s, Array1, Array2, ArrayViewD, ArrayViewMutD, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio_io::{Corpus, Emotion, NUM_EMOTIONS};
use crate::dsp::MelSpectrogram;
use crate::error::{Result, RexError};
use crate::tensornet::layers::{relu_backward, Conv1d, Conv1dCache, Dense};
use crate::tensornet::{
    argmax, bce_with_logits, cross_entropy, fit_classifier, labels_for, CnnArch, CnnModel,
    Adam, EpochStats, FeatureNorm, FeatureSet, Hyper, Parameterized, Target,
};

const KERNEL: usize = 5;

/// Appends `classes` constant rows, the one at `target` set to 1.
fn with_condition(x: &Array2<f64>, target: usize, classes: usize) -> Array2<f64> {
    let (c, t) = x.dim();
    let mut out = Array2::zeros((c + classes, t));
    out.slice_mut(s![..c, ..]).assign(x);
    out.row_mut(c + target).fill(1.0);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub c1: Conv1d,
    pub c2: Conv1d,
    pub c3: Conv1d,
    pub classes: usize,
}

#[derive(Debug, Clone)]
pub struct GenTrace {
    k1: Conv1dCache,
    h1: Array2<f64>,
    k2: Conv1dCache,
    h2: Array2<f64>,
    k3: Conv1dCache,
    /// `log(1 + power)`, non-negative.
    pub output: Array2<f64>,
}

impl Generator {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, bins: usize, hidden: usize, classes: usize) -> Self {
        Self {
            c1: Conv1d::new(rng, bins + classes, hidden, KERNEL),
            c2: Conv1d::new(rng, hidden + classes, hidden, KERNEL),
            c3: Conv1d::new(rng, hidden, bins, KERNEL),
            classes,
        }
    }

    /// `x` is a spectrogram `[bins, frames]` standardised with `norm`.
    pub fn forward(&self, x: &Array2<f64>, target: usize, norm: &FeatureNorm) -> GenTrace {
        let (z1, k1) = self.c1.forward(&with_condition(x, target, self.classes));
        let h1 = z1.mapv(|v| v.max(0.0));
        let (z2, k2) = self.c2.forward(&with_condition(&h1, target, self.classes));
        let h2 = z2.mapv(|v| v.max(0.0));
        let (delta, k3) = self.c3.forward(&h2);
        let output = norm.invert(&(x + &delta)).mapv(|v| v.max(0.0));
        GenTrace {
            k1,
            h1,
            k2,
            h2,
            k3,
            output,
        }
    }

    /// Accumulates gradients given `dL/doutput` and returns `dL/dx`.
    pub fn backward(&self, trace: &GenTrace, d_out: &Array2<f64>, grad: &mut Generator, norm: &FeatureNorm) -> Array2<f64> {
        let mut d_pre = d_out.clone();
        relu_backward(&mut d_pre, &trace.output);
        for (mut row, &sd) in d_pre.rows_mut().into_iter().zip(&norm.std) {
            row *= sd;
        }
        let mut d_h2 = self
            .c3
            .backward(&trace.k3, &d_pre, &mut grad.c3, true)
            .expect("input gradient");
        relu_backward(&mut d_h2, &trace.h2);
        let d_in2 = self
            .c2
            .backward(&trace.k2, &d_h2, &mut grad.c2, true)
            .expect("input gradient");
        let hidden = trace.h1.nrows();
        let mut d_h1 = d_in2.slice(s![..hidden, ..]).to_owned();
        relu_backward(&mut d_h1, &trace.h1);
        let d_in1 = self
            .c1
            .backward(&trace.k1, &d_h1, &mut grad.c1, true)
            .expect("input gradient");
        let bins = d_in1.nrows() - self.classes;
        d_in1.slice(s![..bins, ..]).to_owned() + &d_pre
    }
}

impl Parameterized for Generator {
    fn params(&self) -> Vec<ArrayViewD<'_, f64>> {
        let mut v = self.c1.params();
        v.extend(self.c2.params());
        v.extend(self.c3.params());
        v
    }

    fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        let mut v = self.c1.params_mut();
        v.extend(self.c2.params_mut());
        v.extend(self.c3.params_mut());
        v
    }
}

/// Realness critic: temporal conv, ReLU, mean over time, one logit.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub conv: Conv1d,
    pub fc: Dense,
}

#[derive(Debug, Clone)]
pub struct DiscTrace {
    k: Conv1dCache,
    h: Array2<f64>,
    pooled: Array1<f64>,
    pub logit: f64,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, bins: usize, hidden: usize) -> Self {
        Self {
            conv: Conv1d::new(rng, bins, hidden, KERNEL),
            fc: Dense::new(rng, hidden, 1),
        }
    }

    pub fn forward(&self, x: &Array2<f64>) -> DiscTrace {
        let (z, k) = self.conv.forward(x);
        let h = z.mapv(|v| v.max(0.0));
        let pooled = h.mean_axis(Axis(1)).expect("non-empty time axis");
        let logit = self.fc.forward(pooled.view())[0];
        DiscTrace { k, h, pooled, logit }
    }

    pub fn backward(&self, trace: &DiscTrace, d_logit: f64, grad: &mut Discriminator) -> Array2<f64> {
        let d_pooled = self
            .fc
            .backward(trace.pooled.view(), Array1::from_elem(1, d_logit).view(), &mut grad.fc);
        let frames = trace.h.ncols() as f64;
        let mut d_h = Array2::from_shape_fn(trace.h.dim(), |(c, _)| d_pooled[c] / frames);
        relu_backward(&mut d_h, &trace.h);
        self.conv
            .backward(&trace.k, &d_h, &mut grad.conv, true)
            .expect("input gradient")
    }
}

impl Parameterized for Discriminator {
    fn params(&self) -> Vec<ArrayViewD<'_, f64>> {
        let mut v = self.conv.params();
        v.extend(self.fc.params());
        v
    }

    fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        let mut v = self.conv.params_mut();
        v.extend(self.fc.params_mut());
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanHyper {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub disc_learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub lambda_cls: f64,
    pub lambda_cyc: f64,
    pub hidden: usize,
    pub disc_hidden: usize,
    /// Epochs for the domain classifier, trained on real clips first.
    pub classifier_epochs: usize,
    pub seed: u64,
}

impl Default for GanHyper {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 8,
            learning_rate: 1e-3,
            disc_learning_rate: 3e-5,
            beta1: 0.5,
            beta2: 0.999,
            lambda_cls: 1.0,
            lambda_cyc: 10.0,
            hidden: 64,
            disc_hidden: 32,
            classifier_epochs: 10,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GanEpochStats {
    pub epoch: usize,
    pub d_loss: f64,
    pub g_adv: f64,
    pub g_cls: f64,
    pub g_cyc: f64,
    /// Mean `exp(-MSE(x, G(G(x, gamma), y)))` on the held-out split.
    pub cycle_similarity: f64,
}

/// Generator, discriminator, domain classifier and the feature statistics
/// they were trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct StarGan {
    pub g: Generator,
    pub d: Discriminator,
    pub m: CnnModel,
    pub norm: FeatureNorm,
}

impl StarGan {
    pub fn new(norm: FeatureNorm, hyper: &GanHyper) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed ^ 0x57a2_6a4e);
        let bins = norm.mean.len();
        Self {
            g: Generator::new(&mut rng, bins, hyper.hidden, NUM_EMOTIONS),
            d: Discriminator::new(&mut rng, bins, hyper.disc_hidden),
            m: CnnModel::new(CnnArch::new(NUM_EMOTIONS), hyper.seed ^ 0x3d),
            norm,
        }
    }

    /// Generator output for a standardised input, standardised.
    pub fn generate_standardized(&self, x: &Array2<f64>, gamma: Emotion) -> Array2<f64> {
        self.norm.apply(&self.g.forward(x, gamma.index(), &self.norm).output)
    }

    /// `G(x, gamma)` as a power spectrogram.
    pub fn synthesize(&self, x: &MelSpectrogram, gamma: Emotion) -> Result<MelSpectrogram> {
        let out = self.g.forward(&self.norm.input(x), gamma.index(), &self.norm).output;
        MelSpectrogram::from_log_power(&out)
    }
}

pub fn mean_squared_error(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(RexError::ShapeMismatch {
            expected: format!("{:?}", a.dim()),
            actual: format!("{:?}", b.dim()),
        });
    }
    Ok((a - b).mapv(|v| v * v).mean().unwrap_or(0.0))
}

pub fn similarity_from_mse(mse: f64) -> f64 {
    (-mse).exp()
}

/// `exp(-MSE)` between two standardised spectrograms.
pub fn reconstruction_similarity(x: &Array2<f64>, x_tilde: &Array2<f64>) -> Result<f64> {
    Ok(similarity_from_mse(mean_squared_error(x, x_tilde)?))
}

fn random_contrast<R: Rng + ?Sized>(rng: &mut R, y: usize) -> usize {
    let k = rng.random_range(0..NUM_EMOTIONS - 1);
    if k >= y {
        k + 1
    } else {
        k
    }
}

/// Mean `exp(-MSE)` to the original over `idx`, for the converted clip
/// `G(x, gamma)` and for its reconstruction `G(G(x, gamma), y)`. Each clip
/// is paired with one contrast drawn from `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub converted: f64,
    pub reconstructed: f64,
}

pub fn cycle_report(
    gan: &StarGan,
    inputs: &[Array2<f64>],
    labels: &[usize],
    idx: &[usize],
    seed: u64,
) -> Result<CycleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut converted, mut reconstructed) = (0.0, 0.0);
    for &i in idx {
        let gamma = random_contrast(&mut rng, labels[i]);
        let fake = gan.generate_standardized(&inputs[i], Emotion::ALL[gamma]);
        let back = gan.generate_standardized(&fake, Emotion::ALL[labels[i]]);
        converted += reconstruction_similarity(&inputs[i], &fake)?;
        reconstructed += reconstruction_similarity(&inputs[i], &back)?;
    }
    let n = idx.len().max(1) as f64;
    Ok(CycleReport {
        converted: converted / n,
        reconstructed: reconstructed / n,
    })
}

/// Trains the domain classifier on real clips, then alternates
/// discriminator and generator updates.
pub fn train_stargan(
    corpus: &Corpus,
    features: &FeatureSet,
    hyper: &GanHyper,
) -> Result<(StarGan, Vec<EpochStats>, Vec<GanEpochStats>)> {
    let (labels, _) = labels_for(corpus, Target::Emotion);
    let train = corpus.train_indices();
    let test = corpus.test_indices();
    let mut gan = StarGan::new(features.norm.clone(), hyper);
    let m_hyper = Hyper {
        epochs: hyper.classifier_epochs,
        seed: hyper.seed ^ 0x3d,
        ..Hyper::default()
    };
    let (m, m_trace) = fit_classifier(gan.m.clone(), &features.inputs, &labels, &train, &test, &m_hyper)?;
    gan.m = m;
    let trace = train_adversarial(&mut gan, &features.inputs, &labels, &train, &test, hyper)?;
    Ok((gan, m_trace, trace))
}

/// Adversarial phase with a fixed, already trained domain classifier.
pub fn train_adversarial(
    gan: &mut StarGan,
    inputs: &[Array2<f64>],
    labels: &[usize],
    train: &[usize],
    eval: &[usize],
    hyper: &GanHyper,
) -> Result<Vec<GanEpochStats>> {
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed ^ 0x6a11);
    let mut g_opt = Adam::new(&gan.g, hyper.learning_rate, hyper.beta1, hyper.beta2);
    let mut d_opt = Adam::new(&gan.d, hyper.disc_learning_rate, hyper.beta1, hyper.beta2);
    let inv_std: Array1<f64> = gan.norm.std.iter().map(|s| 1.0 / s).collect();
    let inv_std = inv_std.insert_axis(Axis(1));
    let mut m_scratch = gan.m.zeroed();
    let mut d_scratch = gan.d.zeroed();
    let one = Array1::from_elem(1, 1.0);
    let zero = Array1::from_elem(1, 0.0);
    let eval_seed = hyper.seed ^ 0xe7a1;
    let mut order = train.to_vec();
    let mut stats = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let (mut d_sum, mut adv_sum, mut cls_sum, mut cyc_sum) = (0.0, 0.0, 0.0, 0.0);
        for batch in order.chunks(hyper.batch_size) {
            let n = batch.len() as f64;
            let mut d_grad = gan.d.zeroed();
            let mut g_grad = gan.g.zeroed();
            for &i in batch {
                let x = &inputs[i];
                let y = labels[i];
                let gamma = random_contrast(&mut rng, y);

                let fwd = gan.g.forward(x, gamma, &gan.norm);
                let fake = gan.norm.apply(&fwd.output);

                // Discriminator: real -> 1, fake -> 0.
                let real_t = gan.d.forward(x);
                let (l_real, d_real) = bce_with_logits(Array1::from_elem(1, real_t.logit).view(), one.view());
                gan.d.backward(&real_t, d_real[0], &mut d_grad);
                let fake_t = gan.d.forward(&fake);
                let (l_fake, d_fake) = bce_with_logits(Array1::from_elem(1, fake_t.logit).view(), zero.view());
                gan.d.backward(&fake_t, d_fake[0], &mut d_grad);
                d_sum += l_real + l_fake;

                // Generator: fool D, be classified as gamma, survive the cycle.
                let (l_adv, g_adv) = bce_with_logits(Array1::from_elem(1, fake_t.logit).view(), one.view());
                let mut d_fake_std = gan.d.backward(&fake_t, g_adv[0], &mut d_scratch);

                let m_t = gan.m.forward(&fake)?;
                let (l_cls, g_cls) = cross_entropy(m_t.logits.view(), gamma);
                let dm = gan
                    .m
                    .backward_with_input(&m_t, (&g_cls * hyper.lambda_cls).view(), &mut m_scratch);
                d_fake_std += &dm;

                let back = gan.g.forward(&fake, y, &gan.norm);
                let rec = gan.norm.apply(&back.output);
                let elems = rec.len() as f64;
                let diff = &rec - x;
                let l_cyc = diff.mapv(f64::abs).sum() / elems;
                let d_rec_std = diff.mapv(|v| hyper.lambda_cyc * v.signum() / elems);
                let d_back_out = &d_rec_std * &inv_std;
                let d_fake_from_cycle = gan.g.backward(&back, &d_back_out, &mut g_grad, &gan.norm);
                d_fake_std += &d_fake_from_cycle;

                let d_out = &d_fake_std * &inv_std;
                gan.g.backward(&fwd, &d_out, &mut g_grad, &gan.norm);

                adv_sum += l_adv;
                cls_sum += l_cls;
                cyc_sum += l_cyc;
                let total = l_real + l_fake + l_adv + l_cls + l_cyc;
                if !total.is_finite() {
                    return Err(RexError::Diverged(format!("GAN loss became {total} at epoch {epoch}")));
                }
            }
            d_grad.scale(1.0 / n);
            g_grad.scale(1.0 / n);
            d_opt.step(&mut gan.d, &d_grad);
            g_opt.step(&mut gan.g, &g_grad);
            if !gan.g.all_finite() || !gan.d.all_finite() {
                return Err(RexError::Diverged(format!("non-finite GAN parameters at epoch {epoch}")));
            }
        }
        let n = order.len().max(1) as f64;
        let s = GanEpochStats {
            epoch,
            d_loss: d_sum / n,
            g_adv: adv_sum / n,
            g_cls: cls_sum / n,
            g_cyc: cyc_sum / n,
            cycle_similarity: cycle_report(gan, inputs, labels, eval, eval_seed)?.reconstructed,
        };
        info!(
            "gan epoch {epoch}: d {:.3} adv {:.3} cls {:.3} cyc {:.3} sim {:.4}",
            s.d_loss, s.g_adv, s.g_cls, s.g_cyc, s.cycle_similarity
        );
        stats.push(s);
    }
    Ok(stats)
}

/// Fraction of `(clip, gamma)` pairs, over all contrasts, for which the
/// domain classifier assigns `G(x, gamma)` to `gamma`.
pub fn synthetic_class_accuracy(gan: &StarGan, inputs: &[Array2<f64>], labels: &[usize], idx: &[usize]) -> Result<f64> {
    let mut hits = 0usize;
    let mut total = 0usize;
    for &i in idx {
        for gamma in Emotion::ALL {
            if gamma.index() == labels[i] {
                continue;
            }
            let fake = gan.generate_standardized(&inputs[i], gamma);
            hits += usize::from(argmax(gan.m.forward(&fake)?.logits.view()) == gamma.index());
            total += 1;
        }
    }
    Ok(hits as f64 / total.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::N_MELS;
    use crate::tensornet::{grad_check, GRAD_CHECK_STEP};

    #[test]
    fn exp_neg_mse_fixtures() {
        let x = Array2::from_elem((3, 4), 0.25);
        assert_eq!(reconstruction_similarity(&x, &x).unwrap(), 1.0);
        assert!((similarity_from_mse(0.680) - 0.507).abs() < 1e-3);
        assert!(reconstruction_similarity(&x, &Array2::zeros((3, 5))).is_err());
    }

    #[test]
    fn generator_shapes_and_nonnegativity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = Generator::new(&mut rng, 12, 6, NUM_EMOTIONS);
        let x = Array2::from_shape_simple_fn((12, 20), || rng.random_range(-2.0..2.0));
        let norm = FeatureNorm::identity(12);
        let a = g.forward(&x, 3, &norm);
        assert_eq!(a.output.dim(), (12, 20));
        assert!(a.output.iter().all(|&v| v >= 0.0));
        assert!(a.output.iter().any(|&v| v > 0.0));
        let b = g.forward(&x, 3, &norm);
        assert_eq!(a.output, b.output);
        assert_ne!(g.forward(&x, 4, &norm).output, a.output);
    }

    #[test]
    fn generator_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = Generator::new(&mut rng, 6, 4, NUM_EMOTIONS);
        let x = Array2::from_shape_simple_fn((6, 9), || rng.random_range(-1.0..1.0));
        let w = Array2::from_shape_simple_fn((6, 9), || rng.random_range(-1.0..1.0));
        let norm = FeatureNorm {
            mean: vec![3.0; 6],
            std: (0..6).map(|b| 0.5 + 0.1 * b as f64).collect(),
        };
        let loss = |g: &Generator| (&g.forward(&x, 2, &norm).output * &w).sum();
        let t = g.forward(&x, 2, &norm);
        assert!(t.output.iter().all(|&v| v > 0.0));
        let mut grad = g.zeroed();
        let dx = g.backward(&t, &w, &mut grad, &norm);
        grad_check(&g, &grad, loss, 60, 1e-3, 5).unwrap();
        let h = GRAD_CHECK_STEP;
        for idx in [(0, 0), (3, 4), (5, 8)] {
            let mut up = x.clone();
            up[idx] += h;
            let mut dn = x.clone();
            dn[idx] -= h;
            let num = ((&g.forward(&up, 2, &norm).output - &g.forward(&dn, 2, &norm).output) * &w).sum() / (2.0 * h);
            assert!((num - dx[idx]).abs() < 1e-5 * num.abs().max(1.0));
        }
    }

    #[test]
    fn discriminator_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = Discriminator::new(&mut rng, 5, 4);
        let x = Array2::from_shape_simple_fn((5, 11), || rng.random_range(-1.0..1.0));
        let loss = |d: &Discriminator| d.forward(&x).logit;
        let t = d.forward(&x);
        let mut grad = d.zeroed();
        let dx = d.backward(&t, 1.0, &mut grad);
        grad_check(&d, &grad, loss, 60, 1e-3, 6).unwrap();
        let h = GRAD_CHECK_STEP;
        let mut up = x.clone();
        up[(2, 5)] += h;
        let mut dn = x.clone();
        dn[(2, 5)] -= h;
        let num = (d.forward(&up).logit - d.forward(&dn).logit) / (2.0 * h);
        assert!((num - dx[(2, 5)]).abs() < 1e-6);
    }

    #[test]
    fn contrast_never_equals_label() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for y in 0..NUM_EMOTIONS {
            for _ in 0..50 {
                let g = random_contrast(&mut rng, y);
                assert!(g != y && g < NUM_EMOTIONS);
            }
        }
    }

    #[test]
    fn full_size_generator_keeps_shape() {
        let gan = StarGan::new(FeatureNorm::identity(N_MELS), &GanHyper::default());
        let spec = MelSpectrogram::from_power(Array2::from_elem((N_MELS, 297), 0.5)).unwrap();
        let out = gan.synthesize(&spec, Emotion::Angry).unwrap();
        assert_eq!(out.power().dim(), (N_MELS, 297));
    }
}
