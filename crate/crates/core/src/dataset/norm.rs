use crate::error::{ensure_finite, ensure_len, Error, Result};

use super::Sample;

/// Floor applied to per-channel standard deviations.
pub const NORM_EPSILON: f64 = 1e-9;

/// Per-channel label scaling onto `[0, 1]`. Channels with no spread are
/// flagged and widened to `value ± 0.5` so they map to the middle.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRange {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub constant: Vec<bool>,
}

impl LabelRange {
    pub fn from_columns<'a>(rows: impl Iterator<Item = &'a [f64]>, width: usize) -> Result<Self> {
        let mut min = vec![f64::INFINITY; width];
        let mut max = vec![f64::NEG_INFINITY; width];
        let mut seen = false;
        for row in rows {
            ensure_len("label row", width, row.len())?;
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
            seen = true;
        }
        if !seen {
            return Err(Error::invalid("no labels to fit a range on"));
        }
        Ok(Self::widened(min, max))
    }

    /// A single-channel range, e.g. the force range of the workspace.
    pub fn scalar(lo: f64, hi: f64) -> Self {
        Self::widened(vec![lo], vec![hi])
    }

    fn widened(mut min: Vec<f64>, mut max: Vec<f64>) -> Self {
        let constant: Vec<bool> = min.iter().zip(&max).map(|(a, b)| b - a <= 0.0).collect();
        for j in 0..min.len() {
            if constant[j] {
                let c = min[j];
                min[j] = c - 0.5;
                max[j] = c + 0.5;
            }
        }
        Self { min, max, constant }
    }

    pub fn width(&self) -> usize {
        self.min.len()
    }

    pub fn to_unit(&self, y: &[f64]) -> Result<Vec<f64>> {
        ensure_len("label vector", self.width(), y.len())?;
        Ok(y.iter()
            .enumerate()
            .map(|(j, v)| (v - self.min[j]) / (self.max[j] - self.min[j]))
            .collect())
    }

    pub fn from_unit(&self, u: &[f64]) -> Result<Vec<f64>> {
        ensure_len("label vector", self.width(), u.len())?;
        Ok(u.iter()
            .enumerate()
            .map(|(j, v)| v * (self.max[j] - self.min[j]) + self.min[j])
            .collect())
    }
}

/// Input standardization and label scaling fitted on a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    /// Population standard deviation, floored at `epsilon`.
    pub std: Vec<f64>,
    pub epsilon: f64,
    /// Input channels whose spread fell below `epsilon`.
    pub constant: Vec<bool>,
    pub curvature: LabelRange,
    pub twist: LabelRange,
    pub force: LabelRange,
}

impl NormStats {
    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.channels();
        ensure_len("std", m, self.std.len())?;
        ensure_len("constant flags", m, self.constant.len())?;
        ensure_len("curvature range", m, self.curvature.width())?;
        ensure_len("twist range", m, self.twist.width())?;
        ensure_len("force range", 1, self.force.width())?;
        ensure_finite("mean", &self.mean)?;
        if !(self.epsilon > 0.0) || self.std.iter().any(|&s| !(s >= self.epsilon) || !s.is_finite()) {
            return Err(Error::invalid("std must be finite and above the epsilon floor"));
        }
        for r in [&self.curvature, &self.twist, &self.force] {
            if r.min.iter().zip(&r.max).any(|(a, b)| !(a < b)) {
                return Err(Error::invalid("label range with min >= max"));
            }
        }
        Ok(())
    }
}

/// Fits per-channel mean and population std of the strains, and per-channel
/// label ranges, on `samples`. The force label uses the workspace range.
pub fn fit_norm_stats(samples: &[Sample], force_range: (f64, f64)) -> Result<NormStats> {
    let first = samples
        .first()
        .ok_or_else(|| Error::invalid("cannot fit statistics on an empty set"))?;
    let m = first.node_count();
    if m == 0 {
        return Err(Error::invalid("samples have no strain channels"));
    }
    let n = samples.len() as f64;
    let mut mean = vec![0.0; m];
    for s in samples {
        ensure_len("strain frame", m, s.strains.len())?;
        ensure_finite("strains", &s.strains)?;
        for (acc, v) in mean.iter_mut().zip(&s.strains) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n);
    let mut var = vec![0.0; m];
    for s in samples {
        for j in 0..m {
            let d = s.strains[j] - mean[j];
            var[j] += d * d;
        }
    }
    let raw_std: Vec<f64> = var.iter().map(|v| (v / n).sqrt()).collect();
    let constant: Vec<bool> = raw_std.iter().map(|&s| s < NORM_EPSILON).collect();
    let std = raw_std.iter().map(|&s| s.max(NORM_EPSILON)).collect();

    let (lo, hi) = force_range;
    if !(lo < hi) {
        return Err(Error::Workspace(format!("force range ({lo}, {hi}) is empty")));
    }
    Ok(NormStats {
        mean,
        std,
        epsilon: NORM_EPSILON,
        constant,
        curvature: LabelRange::from_columns(samples.iter().map(|s| s.gt_curvatures.as_slice()), m)?,
        twist: LabelRange::from_columns(samples.iter().map(|s| s.gt_twists.as_slice()), m)?,
        force: LabelRange::scalar(lo, hi),
    })
}

/// `(ε − mean) / std`, channel-wise.
pub fn normalize(strains: &[f64], stats: &NormStats) -> Result<Vec<f64>> {
    ensure_len("strain frame", stats.channels(), strains.len())?;
    Ok(strains
        .iter()
        .zip(stats.mean.iter().zip(&stats.std))
        .map(|(e, (m, s))| (e - m) / s)
        .collect())
}

pub fn denormalize(normalized: &[f64], stats: &NormStats) -> Result<Vec<f64>> {
    ensure_len("normalized frame", stats.channels(), normalized.len())?;
    Ok(normalized
        .iter()
        .zip(stats.mean.iter().zip(&stats.std))
        .map(|(z, (m, s))| z * s + m)
        .collect())
}
