//! Training objectives. Every function returns the loss and its gradient
//! with respect to the predictions.

use crate::error::{ensure_len, Error, Result};

/// Mean of squared residuals.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    ensure_len("prediction", target.len(), pred.len())?;
    if pred.is_empty() {
        return Err(Error::invalid("loss over an empty prediction"));
    }
    let n = pred.len() as f64;
    let loss = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Ok((loss, grad))
}

/// `MSE(κ) + MSE(φ)` on `[0, 1]`-scaled labels.
pub fn shape_loss(kappa: &[f64], phi: &[f64], kappa_target: &[f64], phi_target: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let (lk, gk) = mse(kappa, kappa_target)?;
    let (lp, gp) = mse(phi, phi_target)?;
    Ok((lk + lp, gk, gp))
}

/// Squared error summed over the force grid, averaged over the batch.
pub fn force_loss(pred: &[f64], target: &[f64], batch: usize) -> Result<(f64, Vec<f64>)> {
    ensure_len("force prediction", target.len(), pred.len())?;
    if batch == 0 || pred.len() % batch != 0 {
        return Err(Error::invalid("force grid does not divide into the batch"));
    }
    let b = batch as f64;
    let loss = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / b;
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / b).collect();
    Ok((loss, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub shape: f64,
    pub force: f64,
    pub magnitude: f64,
    pub total: f64,
}

/// Joint objective over stacked head outputs `[κ̂ (M) | φ̂ (M) | f̂ (M) | F̂]`:
/// `shape + w_f · (force + magnitude)`.
pub fn joint_loss(output: &[f64], target: &[f64], nodes: usize, force_weight: f64) -> Result<(LossParts, Vec<f64>)> {
    let width = 3 * nodes + 1;
    ensure_len("head output", target.len(), output.len())?;
    if nodes == 0 || output.is_empty() || output.len() % width != 0 {
        return Err(Error::invalid("head output does not match the node count"));
    }
    let batch = output.len() / width;
    let gather = |v: &[f64], lo: usize, hi: usize| -> Vec<f64> { v.chunks_exact(width).flat_map(|r| r[lo..hi].iter().copied()).collect() };
    let m = nodes;
    let (shape, gk, gp) = shape_loss(
        &gather(output, 0, m),
        &gather(output, m, 2 * m),
        &gather(target, 0, m),
        &gather(target, m, 2 * m),
    )?;
    let (force, gf) = force_loss(&gather(output, 2 * m, 3 * m), &gather(target, 2 * m, 3 * m), batch)?;
    let (magnitude, gm) = mse(&gather(output, 3 * m, width), &gather(target, 3 * m, width))?;
    let mut grad = vec![0.0; output.len()];
    for (b, row) in grad.chunks_exact_mut(width).enumerate() {
        row[..m].copy_from_slice(&gk[b * m..][..m]);
        row[m..2 * m].copy_from_slice(&gp[b * m..][..m]);
        for i in 0..m {
            row[2 * m + i] = force_weight * gf[b * m + i];
        }
        row[3 * m] = force_weight * gm[b];
    }
    Ok((
        LossParts {
            shape,
            force,
            magnitude,
            total: shape + force_weight * (force + magnitude),
        },
        grad,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_loss_cases() {
        let t = [0.2, 0.4, 0.6];
        let (l, _, _) = shape_loss(&t, &t, &t, &t).unwrap();
        assert_eq!(l, 0.0);
        let off: Vec<f64> = t.iter().map(|v| v + 0.1).collect();
        let (l, _, _) = shape_loss(&off, &t, &t, &t).unwrap();
        assert!((l - 0.01).abs() < 1e-15);
        let (l2, _, _) = shape_loss(&t, &off, &t, &t).unwrap();
        assert_eq!(l, l2);
    }

    #[test]
    fn force_loss_sums_over_grid() {
        let target = [0.5, 1.0, 0.5, 0.0, 0.0, 0.0];
        let (l, _) = force_loss(&[0.0; 6], &target, 2).unwrap();
        assert_eq!(l, (0.25 + 1.0 + 0.25) / 2.0);
        let half: Vec<f64> = target.iter().map(|v| v / 2.0).collect();
        let (lh, _) = force_loss(&half, &target, 2).unwrap();
        assert!((lh - l / 4.0).abs() < 1e-15);
        assert!(force_loss(&[0.0; 5], &[0.0; 5], 2).is_err());
    }

    #[test]
    fn joint_weights_force_terms() {
        let m = 2;
        let target = vec![0.5, 0.5, 0.5, 0.5, 1.0, 0.0, 0.3];
        let mut out = target.clone();
        out[4] = 0.0;
        out[6] = 0.1;
        let (p1, _) = joint_loss(&out, &target, m, 1.0).unwrap();
        let (p2, g2) = joint_loss(&out, &target, m, 2.0).unwrap();
        assert_eq!(p1.shape, 0.0);
        assert!((p1.force - 1.0).abs() < 1e-15);
        assert!((p1.magnitude - 0.04).abs() < 1e-15);
        assert!((p2.total - 2.0 * p1.total).abs() < 1e-15);
        assert!((g2[4] + 4.0).abs() < 1e-15);
    }
}
