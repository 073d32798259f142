//! Central finite-difference check of analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::Parameterized;
use crate::error::{Result, RexError};

pub const GRAD_CHECK_STEP: f64 = 1e-4;
pub const GRAD_CHECK_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_error: f64,
    /// `(tensor, offset, analytic, numeric)` per sampled parameter.
    pub checked: Vec<(usize, usize, f64, f64)>,
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Compares `analytic` (the gradient of `loss` at `model`, stored in a
/// model-shaped container) against central differences on `samples`
/// randomly chosen parameters.
pub fn grad_check<M, F>(
    model: &M,
    analytic: &M,
    loss: F,
    samples: usize,
    tolerance: f64,
    seed: u64,
) -> Result<GradCheckReport>
where
    M: Parameterized,
    F: Fn(&M) -> f64,
{
    let sizes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return Err(RexError::InvalidArgument("model has no parameters".into()));
    }
    let grads: Vec<Vec<f64>> = analytic.params().iter().map(|p| p.iter().copied().collect()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = model.clone();
    let mut checked = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut flat = rng.random_range(0..total);
        let mut tensor = 0;
        while flat >= sizes[tensor] {
            flat -= sizes[tensor];
            tensor += 1;
        }
        let original = nth(&mut probe, tensor, flat, None);
        nth(&mut probe, tensor, flat, Some(original + GRAD_CHECK_STEP));
        let up = loss(&probe);
        nth(&mut probe, tensor, flat, Some(original - GRAD_CHECK_STEP));
        let down = loss(&probe);
        nth(&mut probe, tensor, flat, Some(original));
        let numeric = (up - down) / (2.0 * GRAD_CHECK_STEP);
        checked.push((tensor, flat, grads[tensor][flat], numeric));
    }
    let max_error = checked
        .iter()
        .map(|&(_, _, a, n)| relative_error(a, n))
        .fold(0.0, f64::max);
    if max_error > tolerance {
        let offending = checked
            .iter()
            .filter(|&&(_, _, a, n)| relative_error(a, n) > tolerance)
            .map(|&(t, i, _, _)| (t, i))
            .collect();
        return Err(RexError::GradCheck {
            max_error,
            tolerance,
            offending,
        });
    }
    Ok(GradCheckReport { max_error, checked })
}

/// Reads element `i` of tensor `t`, optionally overwriting it.
fn nth<M: Parameterized>(m: &mut M, t: usize, i: usize, set: Option<f64>) -> f64 {
    let mut params = m.params_mut();
    let slot = params[t].iter_mut().nth(i).expect("index in range");
    let old = *slot;
    if let Some(v) = set {
        *slot = v;
    }
    old
}
