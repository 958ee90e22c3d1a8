//! Shared helpers for the integration tests.
#![allow(dead_code)]

use fbg_core::nn::{Layer, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

/// Relative difference with a small absolute floor so that two gradients
/// that are both numerically zero compare equal.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Inputs kept away from zero so ReLU kinks sit outside the difference stencil.
pub fn away_from_zero(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v: f64 = rng.gen_range(0.05..1.0);
            if rng.gen::<bool>() {
                v
            } else {
                -v
            }
        })
        .collect()
}

/// Checks `backward` against central differences of `Σ r·forward(p, x)` for
/// up to `max_coords` parameters and inputs. Returns the worst relative error.
pub fn check_layer<L: Layer>(layer: &L, x: &Tensor, params: &[f64], rng: &mut ChaCha8Rng, max_coords: usize) -> f64 {
    let (y, cache) = layer.forward(params, x).unwrap();
    let r = random_vec(rng, y.data().len(), 1.0);
    let dy = Tensor::new(y.shape(), r.clone()).unwrap();
    let mut grad = vec![0.0; params.len()];
    let dx = layer.backward(params, &cache, &dy, &mut grad).unwrap();
    let objective = |p: &[f64], x: &Tensor| -> f64 {
        let (y, _) = layer.forward(p, x).unwrap();
        y.data().iter().zip(&r).map(|(a, b)| a * b).sum()
    };
    let pick = |n: usize, rng: &mut ChaCha8Rng| -> Vec<usize> {
        if n <= max_coords {
            (0..n).collect()
        } else {
            (0..max_coords).map(|_| rng.gen_range(0..n)).collect()
        }
    };
    let mut worst = 0.0f64;
    for i in pick(params.len(), rng) {
        let mut p = params.to_vec();
        p[i] += FD_STEP;
        let up = objective(&p, x);
        p[i] -= 2.0 * FD_STEP;
        let down = objective(&p, x);
        worst = worst.max(rel_err(grad[i], (up - down) / (2.0 * FD_STEP)));
    }
    for i in pick(x.data().len(), rng) {
        let mut xp = x.clone();
        xp.data_mut()[i] += FD_STEP;
        let up = objective(params, &xp);
        xp.data_mut()[i] -= 2.0 * FD_STEP;
        let down = objective(params, &xp);
        worst = worst.max(rel_err(dx.data()[i], (up - down) / (2.0 * FD_STEP)));
    }
    worst
}

/// Central-difference check of a scalar loss `f(pred) -> (loss, grad)`.
pub fn check_loss(f: impl Fn(&[f64]) -> (f64, Vec<f64>), pred: &[f64]) -> f64 {
    let (_, grad) = f(pred);
    let mut worst = 0.0f64;
    for i in 0..pred.len() {
        let mut p = pred.to_vec();
        p[i] += FD_STEP;
        let up = f(&p).0;
        p[i] -= 2.0 * FD_STEP;
        let down = f(&p).0;
        worst = worst.max(rel_err(grad[i], (up - down) / (2.0 * FD_STEP)));
    }
    worst
}
