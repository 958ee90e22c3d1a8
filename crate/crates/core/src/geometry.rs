//! Discretized rod shapes.
//!
//! A rod of `M` nodes is a chain of `M` constant-curvature segments of equal
//! arc length `step`. Node `s` carries the curvature `κ_s` and the azimuth
//! `φ_s` of its bending plane, both expressed in the frame at the start of
//! the segment. Positions hold `M + 1` points: the base at the origin followed
//! by the end point of every segment, so a straight rod of 40 nodes at 3.3 mm
//! ends 132 mm up the base tangent.
//!
//! Frame convention: the base frame is the identity with the tangent along
//! `+z`. A segment with azimuth `φ` bends toward `cos φ·e1 + sin φ·e2` of the
//! current frame (toward `+x` for `φ = 0` at the base). Frames are carried
//! from segment to segment by rotating about the bending-plane normal only,
//! so a constant azimuth keeps the whole rod in one plane.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_len, Error, Result};

/// Bending workspace of the instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkspaceConfig {
    /// Largest admissible curvature, 1/m.
    pub max_curvature: f64,
    /// Largest admissible total bend angle magnitude, rad.
    pub bend_angle_range: f64,
    /// Smallest bend radius of the instrument, m.
    pub min_bend_radius: f64,
    pub rod_length: f64,
    pub endoscope_outer_diameter: f64,
    /// Contact force magnitude range, N.
    pub force_range: (f64, f64),
    /// Contacts can only occur within this arc length from the base, m.
    pub contact_span: f64,
}

impl Default for WorkspaceConfig {
    fn default() -> Self {
        let min_bend_radius = 7.5e-3;
        Self {
            max_curvature: 1.0 / min_bend_radius,
            bend_angle_range: 270f64.to_radians(),
            min_bend_radius,
            rod_length: 0.132,
            endoscope_outer_diameter: 3e-3,
            force_range: (0.0, 0.5),
            contact_span: 0.090,
        }
    }
}

impl WorkspaceConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("max_curvature", self.max_curvature),
            ("bend_angle_range", self.bend_angle_range),
            ("min_bend_radius", self.min_bend_radius),
            ("rod_length", self.rod_length),
            ("endoscope_outer_diameter", self.endoscope_outer_diameter),
            ("contact_span", self.contact_span),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("workspace {name} must be positive, got {v}")));
            }
        }
        let rel = (self.max_curvature * self.min_bend_radius - 1.0).abs();
        if rel > 1e-6 {
            return Err(Error::invalid(format!(
                "max_curvature {} is not 1/min_bend_radius ({})",
                self.max_curvature,
                1.0 / self.min_bend_radius
            )));
        }
        let (lo, hi) = self.force_range;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo) {
            return Err(Error::invalid(format!("bad force range [{lo}, {hi}]")));
        }
        if self.contact_span > self.rod_length {
            return Err(Error::invalid(format!(
                "contact span {} exceeds rod length {}",
                self.contact_span, self.rod_length
            )));
        }
        Ok(())
    }
}

/// A discretized rod: per-segment curvature and bending azimuth plus the
/// integrated node positions.
#[derive(Debug, Clone, PartialEq)]
pub struct RodShape {
    step: f64,
    curvatures: Vec<f64>,
    twists: Vec<f64>,
    positions: Vec<Vector3<f64>>,
}

impl RodShape {
    pub fn node_count(&self) -> usize {
        self.curvatures.len()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn curvatures(&self) -> &[f64] {
        &self.curvatures
    }

    pub fn twists(&self) -> &[f64] {
        &self.twists
    }

    /// Base point followed by the end point of every segment (`M + 1` entries).
    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    /// Arc length of every entry of [`positions`](Self::positions).
    pub fn arc_lengths(&self) -> Vec<f64> {
        (0..=self.node_count()).map(|i| i as f64 * self.step).collect()
    }

    pub fn total_length(&self) -> f64 {
        self.node_count() as f64 * self.step
    }

    pub fn tip(&self) -> Vector3<f64> {
        *self.positions.last().expect("shapes always hold the base point")
    }

    /// Straight rod of `node_count` segments.
    pub fn straight(node_count: usize, step: f64) -> Result<Self> {
        integrate_shape(&vec![0.0; node_count], &vec![0.0; node_count], step)
    }

    /// Returns a copy translated by `offset` (used to build reference estimators).
    pub fn translated(&self, offset: Vector3<f64>) -> Self {
        let mut out = self.clone();
        for p in &mut out.positions {
            *p += offset;
        }
        out
    }
}

/// Integrates per-node curvature and bending azimuth into positions, starting
/// from the identity base frame.
pub fn integrate_shape(curvatures: &[f64], twists: &[f64], step: f64) -> Result<RodShape> {
    integrate_shape_from(&Rotation3::identity(), curvatures, twists, step)
}

/// Same as [`integrate_shape`] with an arbitrary base orientation.
pub fn integrate_shape_from(
    base: &Rotation3<f64>,
    curvatures: &[f64],
    twists: &[f64],
    step: f64,
) -> Result<RodShape> {
    if curvatures.is_empty() {
        return Err(Error::invalid("cannot integrate an empty curvature sequence"));
    }
    ensure_len("twists", curvatures.len(), twists.len())?;
    ensure_finite("curvatures", curvatures)?;
    ensure_finite("twists", twists)?;
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::invalid(format!("integration step must be positive, got {step}")));
    }

    let mut frame: Matrix3<f64> = *base.matrix();
    let mut p = Vector3::zeros();
    let mut positions = Vec::with_capacity(curvatures.len() + 1);
    positions.push(p);
    for (&kappa, &phi) in curvatures.iter().zip(twists) {
        let (local_step, local_rot) = segment(kappa, phi, step);
        p += frame * local_step;
        frame *= local_rot;
        positions.push(p);
    }

    Ok(RodShape {
        step,
        curvatures: curvatures.to_vec(),
        twists: twists.to_vec(),
        positions,
    })
}

/// Displacement and frame rotation of one constant-curvature segment,
/// expressed in the frame at its start.
fn segment(kappa: f64, phi: f64, length: f64) -> (Vector3<f64>, Matrix3<f64>) {
    let angle = kappa * length;
    let normal = Vector3::new(phi.cos(), phi.sin(), 0.0);
    // (1 - cos θ)/κ and sin θ/κ, with series near θ = 0
    let (lateral, axial) = if angle.abs() < 1e-6 {
        let a2 = angle * angle;
        (length * angle * (0.5 - a2 / 24.0), length * (1.0 - a2 / 6.0))
    } else {
        ((1.0 - angle.cos()) / kappa, angle.sin() / kappa)
    };
    let displacement = normal * lateral + Vector3::z() * axial;
    let axis = Unit::new_unchecked(Vector3::new(-phi.sin(), phi.cos(), 0.0));
    let rot = Rotation3::from_axis_angle(&axis, angle);
    (displacement, *rot.matrix())
}

fn check_same_nodes(estimated: &RodShape, truth: &RodShape) -> Result<()> {
    ensure_len("shape nodes", truth.positions.len(), estimated.positions.len())
}

/// Euclidean distance between the two tips, m.
pub fn tip_position_error(estimated: &RodShape, truth: &RodShape) -> Result<f64> {
    check_same_nodes(estimated, truth)?;
    Ok((estimated.tip() - truth.tip()).norm())
}

/// Mean node position error over the sensing points (every segment end; the
/// clamped base is excluded), m.
pub fn shape_error(estimated: &RodShape, truth: &RodShape) -> Result<f64> {
    check_same_nodes(estimated, truth)?;
    let n = truth.node_count();
    let total: f64 = estimated.positions[1..]
        .iter()
        .zip(&truth.positions[1..])
        .map(|(a, b)| (a - b).norm())
        .sum();
    Ok(total / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BendProfile {
    /// Uniform curvature over the whole rod.
    Constant,
    /// Curvature growing linearly from zero at the base.
    Ramp,
}

/// Planar curvature profile whose integral over `length` equals `total_angle`.
/// Twists are all zero.
pub fn bend_profile(
    total_angle: f64,
    profile: BendProfile,
    node_count: usize,
    length: f64,
    workspace: &WorkspaceConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if node_count == 0 {
        return Err(Error::invalid("bend profile needs at least one node"));
    }
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::invalid(format!("rod length must be positive, got {length}")));
    }
    if !total_angle.is_finite() || total_angle.abs() > workspace.bend_angle_range + 1e-12 {
        return Err(Error::Workspace(format!(
            "bend angle {:.2}° exceeds ±{:.2}°",
            total_angle.to_degrees(),
            workspace.bend_angle_range.to_degrees()
        )));
    }
    let step = length / node_count as f64;
    let curvatures: Vec<f64> = match profile {
        BendProfile::Constant => vec![total_angle / length; node_count],
        BendProfile::Ramp => {
            // κ(s) = g·s sampled at segment midpoints; Σ κ·step = g·L²/2
            let gain = 2.0 * total_angle / (length * length);
            (0..node_count).map(|i| gain * (i as f64 + 0.5) * step).collect()
        }
    };
    if let Some(k) = curvatures.iter().find(|k| k.abs() > workspace.max_curvature * (1.0 + 1e-12)) {
        return Err(Error::Workspace(format!(
            "profile curvature {k:.3} exceeds max {:.3}",
            workspace.max_curvature
        )));
    }
    Ok((curvatures, vec![0.0; node_count]))
}
