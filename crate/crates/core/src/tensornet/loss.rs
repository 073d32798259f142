//! Softmax, cross-entropy and binary cross-entropy with their gradients.

use ndarray::{Array1, ArrayView1};

/// Numerically stable softmax.
pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = logits.mapv(|v| (v - max).exp());
    let s = e.sum();
    e / s
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Cross-entropy of `softmax(logits)` against class `target`, with
/// `dL/dlogits`.
pub fn cross_entropy(logits: ArrayView1<f64>, target: usize) -> (f64, Array1<f64>) {
    let p = softmax(logits);
    let loss = -(p[target].max(f64::MIN_POSITIVE)).ln();
    let mut grad = p;
    grad[target] -= 1.0;
    (loss, grad)
}

/// Mean binary cross-entropy over `logits.len()` independent sigmoid
/// outputs, with `dL/dlogits`.
pub fn bce_with_logits(logits: ArrayView1<f64>, targets: ArrayView1<f64>) -> (f64, Array1<f64>) {
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let mut grad = Array1::zeros(logits.len());
    for (i, (&z, &t)) in logits.iter().zip(targets.iter()).enumerate() {
        // max(z,0) - z t + log(1 + e^{-|z|})
        loss += z.max(0.0) - z * t + (-z.abs()).exp().ln_1p();
        grad[i] = (sigmoid(z) - t) / n;
    }
    (loss / n, grad)
}

pub fn argmax(v: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
