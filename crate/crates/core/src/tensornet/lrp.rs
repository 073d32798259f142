//! Layer-wise relevance propagation with the epsilon rule.

use ndarray::Array1;

use super::layers::DenseNet;

pub const LRP_EPSILON: f64 = 1e-6;

fn stabilize(z: f64, eps: f64) -> f64 {
    // sign(0) taken as +1 so the denominator never vanishes.
    if z >= 0.0 {
        z + eps
    } else {
        z - eps
    }
}

/// Relevance of every input for `net`'s output `output_index`.
///
/// The chosen logit is the starting relevance; each dense layer passes it
/// back in proportion to the contributions `x_j w_ij`. Biases absorb part of
/// the relevance, so conservation is exact only for bias-free layers.
pub fn lrp_attribute(net: &DenseNet, input: &Array1<f64>, output_index: usize) -> Array1<f64> {
    lrp_attribute_eps(net, input, output_index, LRP_EPSILON)
}

pub fn lrp_attribute_eps(
    net: &DenseNet,
    input: &Array1<f64>,
    output_index: usize,
    eps: f64,
) -> Array1<f64> {
    let trace = net.forward(input.view());
    let last = net.layers.len() - 1;
    let mut relevance = Array1::zeros(net.outputs());
    relevance[output_index] = trace.output[output_index];
    for i in (0..=last).rev() {
        let layer = &net.layers[i];
        let x = &trace.activations[i];
        let z = layer.forward(x.view());
        let s = Array1::from_shape_fn(z.len(), |k| relevance[k] / stabilize(z[k], eps));
        let c = layer.weight.t().dot(&s);
        relevance = x * &c;
    }
    relevance
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensornet::layers::Dense;
    use ndarray::{array, Array2};

    fn linear(w: Vec<f64>) -> DenseNet {
        let n = w.len();
        DenseNet {
            layers: vec![Dense {
                weight: Array2::from_shape_vec((1, n), w).unwrap(),
                bias: Array1::zeros(1),
            }],
        }
    }

    #[test]
    fn single_linear_layer_gives_w_times_x() {
        let net = linear(vec![0.5, -1.5, 2.0]);
        let x = array![1.0, 2.0, -0.25];
        let r = lrp_attribute(&net, &x, 0);
        let y = 0.5 - 3.0 - 0.5;
        for (ri, wx) in r.iter().zip([0.5, -3.0, -0.5]) {
            assert!((ri - wx).abs() < 1e-5);
        }
        assert!((r.sum() - y).abs() < 1e-5);
    }

    #[test]
    fn zero_input_gives_zero_relevance() {
        let net = linear(vec![1.0, 2.0]);
        let r = lrp_attribute(&net, &Array1::zeros(2), 0);
        assert!(r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_layer_matches_hand_unrolled_rule() {
        let w1 = array![[1.0, -0.5, 0.25], [0.5, 1.0, -1.0], [-0.75, 0.5, 1.5]];
        let w2 = array![[1.0, 2.0, -0.5], [0.3, -0.2, 0.9]];
        let net = DenseNet {
            layers: vec![
                Dense { weight: w1.clone(), bias: Array1::zeros(3) },
                Dense { weight: w2.clone(), bias: Array1::zeros(2) },
            ],
        };
        let x = array![0.8, 0.4, 0.6];
        let eps = LRP_EPSILON;
        // Hidden activations.
        let mut h = [0.0; 3];
        for j in 0..3 {
            let mut z = 0.0;
            for i in 0..3 {
                z += w1[[j, i]] * x[i];
            }
            h[j] = f64::max(z, 0.0);
        }
        let mut y = 0.0;
        for j in 0..3 {
            y += w2[[0, j]] * h[j];
        }
        let ys = y + if y >= 0.0 { eps } else { -eps };
        let mut rh = [0.0; 3];
        for j in 0..3 {
            rh[j] = h[j] * w2[[0, j]] * y / ys;
        }
        let mut rx = [0.0; 3];
        for j in 0..3 {
            let mut zj = 0.0;
            for i in 0..3 {
                zj += w1[[j, i]] * x[i];
            }
            let zs = zj + if zj >= 0.0 { eps } else { -eps };
            for i in 0..3 {
                rx[i] += x[i] * w1[[j, i]] * rh[j] / zs;
            }
        }
        let r = lrp_attribute(&net, &x, 0);
        for i in 0..3 {
            assert!((r[i] - rx[i]).abs() < 1e-12, "{i}: {} vs {}", r[i], rx[i]);
        }
        assert!((r.sum() - y).abs() <= 1e-3 * y.abs());
    }
}
