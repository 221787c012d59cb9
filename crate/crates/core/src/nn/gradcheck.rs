//! Central finite-difference check of the analytic gradient.

use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use super::autoencoder::{forward_cached, loss_and_grad, AutoencoderModel};
use super::rng::{seeded, shuffle};

/// Gradients smaller than this are compared in absolute terms.
const ABS_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub tolerance: f64,
    pub passed: bool,
}

fn loss_at(model: &AutoencoderModel, params: &[f64], window: &[f64], mask_seed: Option<u64>) -> f64 {
    let mut rng = mask_seed.map(seeded);
    let out = forward_cached(&model.arch, params, window, rng.as_mut().map(|r| r as &mut dyn RngCore)).output;
    out.iter().zip(window).map(|(y, x)| (y - x) * (y - x)).sum::<f64>() / window.len() as f64
}

/// Analytic gradient of the window loss. Dropout masks are drawn from
/// `mask_seed` so that every loss evaluation sees the same masks.
pub fn analytic_gradient(model: &AutoencoderModel, window: &[f64], mask_seed: Option<u64>) -> Vec<f64> {
    let mut grad = vec![0.0; model.params.len()];
    let mut rng = mask_seed.map(seeded);
    loss_and_grad(&model.arch, &model.params, window, rng.as_mut().map(|r| r as &mut dyn RngCore), &mut grad);
    grad
}

/// Compares `analytic` against `(f(θ+ε) − f(θ−ε)) / 2ε` at `indices`.
pub fn compare_gradient(
    model: &AutoencoderModel,
    window: &[f64],
    mask_seed: Option<u64>,
    analytic: &[f64],
    indices: &[usize],
    eps: f64,
    tol: f64,
) -> GradCheckReport {
    let mut params = model.params.clone();
    let mut worst = (0.0f64, None);
    for &i in indices {
        let orig = params[i];
        params[i] = orig + eps;
        let up = loss_at(model, &params, window, mask_seed);
        params[i] = orig - eps;
        let down = loss_at(model, &params, window, mask_seed);
        params[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(ABS_FLOOR);
        if rel > worst.0 || worst.1.is_none() {
            worst = (rel, Some(i));
        }
    }
    GradCheckReport {
        checked: indices.len(),
        max_rel_error: worst.0,
        worst_index: worst.1,
        tolerance: tol,
        passed: worst.0 <= tol,
    }
}

/// Checks `n_params` randomly chosen parameters (all of them if fewer).
pub fn numeric_gradient_check(
    model: &AutoencoderModel,
    window: &[f64],
    eps: f64,
    tol: f64,
    n_params: usize,
    seed: u64,
) -> GradCheckReport {
    let mask_seed = (model.arch.dropout > 0.0).then_some(seed.wrapping_add(1));
    let analytic = analytic_gradient(model, window, mask_seed);
    let indices = sample_indices(model.params.len(), n_params, seed);
    compare_gradient(model, window, mask_seed, &analytic, &indices, eps, tol)
}

pub fn sample_indices(total: usize, n: usize, seed: u64) -> Vec<usize> {
    let mut all: Vec<usize> = (0..total).collect();
    shuffle(&mut seeded(seed), &mut all);
    all.truncate(n.min(total));
    all.sort_unstable();
    all
}
