//! Class activation maps from gradients of a class logit.

use ndarray::{Array2, Array3, Axis};

use super::model::{CnnModel, CnnTrace};
use crate::audio_io::Emotion;
use crate::error::Result;
use crate::saliency::{min_max_normalize, SaliencyMap};

/// `ReLU(sum_k w_k A_k)` with `w_k` the spatial mean of channel `k`'s
/// gradient. Not normalised.
pub fn cam_from_parts(activations: &Array3<f64>, gradients: &Array3<f64>) -> Array2<f64> {
    let (_, h, w) = activations.dim();
    let weights = gradients
        .mean_axis(Axis(1))
        .and_then(|m| m.mean_axis(Axis(1)))
        .expect("non-empty feature map");
    let mut cam = Array2::<f64>::zeros((h, w));
    for (k, a) in activations.outer_iter().enumerate() {
        cam.scaled_add(weights[k], &a);
    }
    cam.mapv_inplace(|v| v.max(0.0));
    cam
}

/// Bilinear resize with half-pixel centres and edge clamping.
pub fn upsample_bilinear(src: &Array2<f64>, (oh, ow): (usize, usize)) -> Array2<f64> {
    let (ih, iw) = src.dim();
    let coord = |o: usize, n_in: usize, n_out: usize| {
        let x = ((o as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
        let i0 = x.floor() as usize;
        let i1 = (i0 + 1).min(n_in - 1);
        (i0, i1, x - i0 as f64)
    };
    let cols: Vec<_> = (0..ow).map(|x| coord(x, iw, ow)).collect();
    let mut out = Array2::zeros((oh, ow));
    for y in 0..oh {
        let (y0, y1, fy) = coord(y, ih, oh);
        for (x, &(x0, x1, fx)) in cols.iter().enumerate() {
            let top = src[[y0, x0]] * (1.0 - fx) + src[[y0, x1]] * fx;
            let bot = src[[y1, x0]] * (1.0 - fx) + src[[y1, x1]] * fx;
            out[[y, x]] = top * (1.0 - fy) + bot * fy;
        }
    }
    out
}

/// Normalised map at input resolution for one class, reusing a forward pass.
pub fn grad_cam_from_trace(model: &CnnModel, trace: &CnnTrace, class: Emotion) -> SaliencyMap {
    let grads = model.last_conv_gradient(trace, class.index());
    let cam = cam_from_parts(trace.last_conv(), &grads);
    let mut up = upsample_bilinear(&cam, model.arch.input_hw);
    min_max_normalize(up.as_slice_mut().expect("fresh array"));
    SaliencyMap::new(up, class).expect("normalised to [0, 1]")
}

pub fn grad_cam(model: &CnnModel, input: &Array2<f64>, class: Emotion) -> Result<SaliencyMap> {
    let trace = model.forward(input)?;
    Ok(grad_cam_from_trace(model, &trace, class))
}

/// Maps for all classes from a single forward pass, in class order.
pub fn grad_cam_all(model: &CnnModel, trace: &CnnTrace) -> Vec<SaliencyMap> {
    Emotion::ALL
        .iter()
        .take(model.classes())
        .map(|&e| grad_cam_from_trace(model, trace, e))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensornet::model::CnnArch;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_channel_toy_matches_hand_evaluation() {
        let a0 = array![[1.0, 0.0, 2.0, 0.0], [0.0, 1.0, 0.0, 3.0], [1.0, 1.0, 0.0, 0.0], [0.0, 2.0, 1.0, 0.0]];
        let a1 = array![[0.0, 2.0, 0.0, 1.0], [1.0, 0.0, 1.0, 0.0], [0.0, 0.0, 4.0, 0.0], [2.0, 0.0, 0.0, 1.0]];
        let mut acts = Array3::zeros((2, 4, 4));
        acts.index_axis_mut(Axis(0), 0).assign(&a0);
        acts.index_axis_mut(Axis(0), 1).assign(&a1);
        // Channel gradients with means 0.5 and -0.25.
        let mut grads = Array3::zeros((2, 4, 4));
        grads.index_axis_mut(Axis(0), 0).fill(0.5);
        grads.index_axis_mut(Axis(0), 1).fill(-0.25);
        grads[[1, 0, 0]] = -0.5;
        grads[[1, 0, 1]] = 0.0;
        let cam = cam_from_parts(&acts, &grads);
        for y in 0..4 {
            for x in 0..4 {
                let hand = f64::max(0.5 * a0[[y, x]] - 0.25 * a1[[y, x]], 0.0);
                assert!((cam[[y, x]] - hand).abs() < 1e-12);
            }
        }
        let mut v = cam.clone();
        min_max_normalize(v.as_slice_mut().unwrap());
        // max of hand map is 1.5 at (1,3); min 0.
        assert!((v[[1, 3]] - 1.0).abs() < 1e-12);
        assert!((v[[0, 0]] - 0.5 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn upsample_preserves_constants_and_shape() {
        let src = Array2::from_elem((3, 5), 0.4);
        let up = upsample_bilinear(&src, (128, 297));
        assert_eq!(up.dim(), (128, 297));
        assert!(up.iter().all(|&v| (v - 0.4).abs() < 1e-12));
    }

    #[test]
    fn upsample_keeps_peak_location() {
        let mut src = Array2::zeros((4, 8));
        src[[2, 5]] = 1.0;
        let up = upsample_bilinear(&src, (16, 32));
        let (mut best, mut at) = (0.0, (0, 0));
        for ((y, x), &v) in up.indexed_iter() {
            if v > best {
                best = v;
                at = (y, x);
            }
        }
        assert_eq!((at.0 / 4, at.1 / 4), (2, 5));
    }

    fn tiny() -> CnnArch {
        CnnArch {
            input_hw: (16, 24),
            channels: [2, 3, 4],
            embedding: 6,
            classes: 8,
        }
    }

    #[test]
    fn maps_are_bounded_and_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = CnnModel::new(tiny(), 4);
        let x = Array2::from_shape_simple_fn((16, 24), || rng.random_range(-1.0..1.0));
        let a = grad_cam(&m, &x, Emotion::Sad).unwrap();
        assert!(a.values().iter().all(|v| (0.0..=1.0).contains(v)));
        let mut scaled = m.clone();
        scaled.fc2.weight.mapv_inplace(|w| w * 3.5);
        scaled.fc2.bias.mapv_inplace(|w| w * 3.5);
        let b = grad_cam(&scaled, &x, Emotion::Sad).unwrap();
        for (p, q) in a.values().iter().zip(b.values()) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn single_channel_peak_locates_frame() {
        // One conv channel that copies the input; the dense head sums the
        // pooled features with positive weight.
        let arch = CnnArch {
            input_hw: (8, 32),
            channels: [1, 1, 1],
            embedding: 1,
            classes: 8,
        };
        let mut m = CnnModel::zeros(arch);
        for c in &mut m.conv {
            c.weight[[0, 4]] = 1.0;
        }
        m.fc1.weight.fill(1.0);
        m.fc2.weight.fill(1.0);
        let mut x = Array2::from_elem((8, 32), 0.01);
        // Frames 20..24 form one cell of the final 8x downsampled grid.
        for f in 0..8 {
            for t in 20..24 {
                x[[f, t]] = 1.0;
            }
        }
        let cam = grad_cam(&m, &x, Emotion::Neutral).unwrap();
        let bar = cam.frame_means();
        let best = (0..32).max_by(|&a, &b| bar[a].total_cmp(&bar[b])).unwrap();
        assert!((20..24).contains(&best), "{best}");
    }
}
