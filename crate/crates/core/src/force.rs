//! Point contact forces, their Gaussian grid encoding, and the cantilever
//! coupling used by the simulator.

use crate::error::{ensure_finite, Error, Result};
use crate::geometry::{integrate_shape, RodShape, WorkspaceConfig};

/// Default width of the force bump, in grid samples.
pub const DEFAULT_FORCE_SIGMA: f64 = 3.0;

/// Default bending stiffness of the instrumented rod, N·m².
pub const DEFAULT_STIFFNESS: f64 = 1e-3;

/// A point contact. Inactive contacts are labelled `(0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ContactForce {
    /// N
    pub magnitude: f64,
    /// Arc length from the base, m.
    pub location: f64,
    pub active: bool,
}

impl ContactForce {
    pub fn new(magnitude: f64, location: f64) -> Self {
        Self {
            magnitude,
            location,
            active: true,
        }
    }

    pub fn inactive() -> Self {
        Self::default()
    }

    pub fn validate(&self, workspace: &WorkspaceConfig) -> Result<()> {
        if !self.active {
            if self.magnitude != 0.0 || self.location != 0.0 {
                return Err(Error::invalid("inactive contact must be labelled (0, 0)"));
            }
            return Ok(());
        }
        let hi = workspace.force_range.1;
        if !(self.magnitude >= 0.0 && self.magnitude <= hi) {
            return Err(Error::Workspace(format!(
                "force {} N outside [0, {hi}] N",
                self.magnitude
            )));
        }
        if !(self.location >= 0.0 && self.location <= workspace.contact_span) {
            return Err(Error::Workspace(format!(
                "contact at {} m outside the {} m span",
                self.location, workspace.contact_span
            )));
        }
        Ok(())
    }
}

/// Force spread over the node grid as a Gaussian bump.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceDistribution {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Bump width in grid samples.
    pub sigma: f64,
}

impl ForceDistribution {
    /// Index of the largest value; the lowest index wins ties.
    pub fn peak_index(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in self.values.iter().enumerate() {
            match best {
                Some((_, b)) if v <= b => {}
                _ => best = Some((i, v)),
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Fractional grid index of `x` on an ascending grid (linear interpolation,
/// extrapolated beyond the ends).
pub fn fractional_index(grid: &[f64], x: f64) -> f64 {
    match grid.len() {
        0 => 0.0,
        1 => 0.0,
        n => {
            let hi = grid.partition_point(|&g| g <= x).clamp(1, n - 1);
            let lo = hi - 1;
            lo as f64 + (x - grid[lo]) / (grid[hi] - grid[lo])
        }
    }
}

pub fn encode_force(force: &ContactForce, grid: &[f64], sigma: f64) -> Result<ForceDistribution> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("force sigma must be positive, got {sigma}")));
    }
    ensure_finite("force grid", grid)?;
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("force grid must be strictly ascending"));
    }
    let values = if force.active && force.magnitude != 0.0 {
        let centre = fractional_index(grid, force.location);
        (0..grid.len())
            .map(|i| {
                let d = i as f64 - centre;
                force.magnitude * (-d * d / (2.0 * sigma * sigma)).exp()
            })
            .collect()
    } else {
        vec![0.0; grid.len()]
    };
    Ok(ForceDistribution {
        grid: grid.to_vec(),
        values,
        sigma,
    })
}

/// Recovers a contact from a (predicted) distribution and a raw magnitude in
/// `[0, 1]` that is re-scaled into `force_range`. A distribution whose peak
/// stays below `threshold` newtons decodes as no contact.
pub fn decode_force(
    dist: &ForceDistribution,
    magnitude_raw: f64,
    force_range: (f64, f64),
    threshold: f64,
) -> Result<ContactForce> {
    if dist.grid.is_empty() || dist.grid.len() != dist.values.len() {
        return Err(Error::invalid("force distribution has an empty or inconsistent grid"));
    }
    let peak = dist.peak_index().expect("grid is not empty");
    if !(dist.values[peak] >= threshold) || dist.values[peak] <= 0.0 {
        return Ok(ContactForce::inactive());
    }
    let (lo, hi) = force_range;
    let magnitude = (magnitude_raw * (hi - lo) + lo).clamp(lo, hi);
    Ok(ContactForce::new(magnitude, dist.grid[peak]))
}

/// Curvature perturbation of a cantilever loaded at `force.location`:
/// `Δκ(s) = F·max(x_c − s, 0)/EI` at the start `s` of every segment.
pub fn deflection_curvature(force: &ContactForce, node_count: usize, step: f64, stiffness: f64) -> Result<Vec<f64>> {
    if !(stiffness > 0.0 && stiffness.is_finite()) {
        return Err(Error::invalid(format!("bending stiffness must be positive, got {stiffness}")));
    }
    if !force.active {
        return Ok(vec![0.0; node_count]);
    }
    Ok((0..node_count)
        .map(|i| force.magnitude * (force.location - i as f64 * step).max(0.0) / stiffness)
        .collect())
}

/// Adds the contact deflection to `base` (clamped to ±`max_curvature`) and
/// re-integrates.
pub fn apply_force_deflection(
    base: &RodShape,
    force: &ContactForce,
    stiffness: f64,
    max_curvature: f64,
) -> Result<RodShape> {
    let delta = deflection_curvature(force, base.node_count(), base.step(), stiffness)?;
    if delta.iter().all(|&d| d == 0.0) {
        return Ok(base.clone());
    }
    let curvatures: Vec<f64> = base
        .curvatures()
        .iter()
        .zip(&delta)
        .map(|(k, d)| (k + d).clamp(-max_curvature, max_curvature))
        .collect();
    integrate_shape(&curvatures, base.twists(), base.step())
}
