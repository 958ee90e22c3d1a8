//! Helical single-core FBG fiber: layout, strain forward model, and bias
//! removal.
//!
//! Each sample `s` sits on the helix at orientation `α_s = α_0 + 2π·s·Δh/h`.
//! Physically the fiber lies at cross-section angle `π/2 − α_s` from the local
//! `e1` axis, so that bending with azimuth `φ` (see [`crate::geometry`])
//! stretches it by `ε_v = −κ·r·sin(φ + α)`. The scalar reading combines the
//! axial and shear components through the helix lead angle `θ_h`:
//! `ε = cos θ_h·ε_v + sin θ_h·ε_h + ε_0`.

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::geometry::RodShape;

/// Smallest bend radius the fiber tolerates before reflectivity degrades, m.
pub const MIN_FIBER_BEND_RADIUS: f64 = 6e-3;

/// Sanity bound on any strain sample.
pub const MAX_STRAIN: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorLayout {
    /// Number of strain samples along the fiber (M).
    pub node_count: usize,
    /// Axial distance between samples (Δh), m.
    pub sample_spacing: f64,
    /// Radial position of the fiber at every sample (r_s), m.
    pub helix_radii: Vec<f64>,
    /// Helix pitch (h_s), m.
    pub helix_pitch: f64,
    /// Orientation of the first sample (α_0), rad.
    pub base_azimuth: f64,
    /// Bragg wavelength at every sample, nm.
    pub wavelengths: Vec<f64>,
    /// Photo-elastic strain coefficient (p_ε).
    pub strain_coefficient: f64,
    /// Shear strain material coefficient (g_ε).
    pub shear_coefficient: f64,
    /// Common-mode strain bias per sample (ε_0,s).
    pub strain_bias: Vec<f64>,
    /// Outer diameter of the sensing tube (d_t), m.
    pub tube_outer_diameter: f64,
    /// Number of physical gratings written in the fiber (N).
    pub physical_fbg_count: usize,
    pub fiber_length: f64,
}

impl Default for SensorLayout {
    fn default() -> Self {
        Self::uniform(40, 3.3e-3, 4e-3, 30e-3)
    }
}

impl SensorLayout {
    /// Layout with the fiber at the tube surface on every sample, 1550 nm
    /// gratings and no bias.
    pub fn uniform(node_count: usize, sample_spacing: f64, tube_outer_diameter: f64, pitch: f64) -> Self {
        Self {
            node_count,
            sample_spacing,
            helix_radii: vec![tube_outer_diameter / 2.0; node_count],
            helix_pitch: pitch,
            base_azimuth: 0.0,
            wavelengths: vec![1550.0; node_count],
            strain_coefficient: 0.22,
            shear_coefficient: 1.0,
            strain_bias: vec![0.0; node_count],
            tube_outer_diameter,
            physical_fbg_count: 14,
            fiber_length: node_count as f64 * sample_spacing,
        }
    }

    /// Tube radius r_t.
    pub fn tube_radius(&self) -> f64 {
        self.tube_outer_diameter / 2.0
    }

    /// Helix lead angle θ_h: the fiber's angle to the cross-section plane.
    pub fn lead_angle(&self) -> f64 {
        (self.helix_pitch / (TAU * self.tube_radius())).atan()
    }

    pub fn fbg_azimuth(&self, s: usize) -> f64 {
        (self.base_azimuth + TAU * s as f64 * self.sample_spacing / self.helix_pitch).rem_euclid(TAU)
    }

    pub fn fbg_azimuths(&self) -> Vec<f64> {
        (0..self.node_count).map(|s| self.fbg_azimuth(s)).collect()
    }

    /// Arc position of every sample along the rod, starting at the base.
    pub fn node_grid(&self) -> Vec<f64> {
        (0..self.node_count).map(|i| i as f64 * self.sample_spacing).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_count == 0 {
            return Err(Error::invalid("layout needs at least one sample"));
        }
        ensure_len("helix_radii", self.node_count, self.helix_radii.len())?;
        ensure_len("wavelengths", self.node_count, self.wavelengths.len())?;
        ensure_len("strain_bias", self.node_count, self.strain_bias.len())?;
        let scalars = [
            ("sample_spacing", self.sample_spacing),
            ("helix_pitch", self.helix_pitch),
            ("tube_outer_diameter", self.tube_outer_diameter),
            ("fiber_length", self.fiber_length),
            ("shear_coefficient", self.shear_coefficient),
        ];
        for (name, v) in scalars {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("layout {name} must be positive, got {v}")));
            }
        }
        if self.helix_radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::invalid("helix radii must be positive"));
        }
        if self.wavelengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::invalid("Bragg wavelengths must be positive"));
        }
        ensure_finite("strain_bias", &self.strain_bias)?;
        if !(self.strain_coefficient < 1.0) {
            return Err(Error::invalid(format!(
                "strain coefficient must be below 1, got {}",
                self.strain_coefficient
            )));
        }
        let bend = helix_bend_radius(self)?;
        if bend < MIN_FIBER_BEND_RADIUS {
            return Err(Error::invalid(format!(
                "helix bends the fiber to {:.2} mm, below the {:.1} mm minimum",
                bend * 1e3,
                MIN_FIBER_BEND_RADIUS * 1e3
            )));
        }
        let covered = self.node_count as f64 * self.sample_spacing;
        if covered > self.fiber_length + self.sample_spacing * (1.0 + 1e-9) {
            return Err(Error::invalid(format!(
                "{} samples at {} m do not fit on a {} m fiber",
                self.node_count, self.sample_spacing, self.fiber_length
            )));
        }
        Ok(())
    }

    /// CRC of the layout's binary encoding, used to tie files to a layout.
    pub fn fingerprint(&self) -> u32 {
        let mut w = crate::binio::Writer::new();
        crate::binio::write_layout(&mut w, self);
        crc32fast::hash(w.as_bytes())
    }
}

/// Bending radius of the fiber wound as a helix of radius r_t and pitch h_s.
pub fn helix_bend_radius(layout: &SensorLayout) -> Result<f64> {
    let r = layout.tube_radius();
    let h = layout.helix_pitch;
    if !(r > 0.0 && h > 0.0) {
        return Err(Error::invalid("helix radius and pitch must be positive"));
    }
    let lead = h / TAU;
    Ok((r * r + lead * lead) / r)
}

/// Strain from a Bragg wavelength shift.
pub fn strain_from_wavelength(wavelength: f64, shift: f64, strain_coefficient: f64) -> Result<f64> {
    check_optics(wavelength, strain_coefficient)?;
    Ok(shift / (wavelength * (1.0 - strain_coefficient)))
}

/// Inverse of [`strain_from_wavelength`].
pub fn wavelength_from_strain(wavelength: f64, strain: f64, strain_coefficient: f64) -> Result<f64> {
    check_optics(wavelength, strain_coefficient)?;
    Ok(strain * wavelength * (1.0 - strain_coefficient))
}

fn check_optics(wavelength: f64, strain_coefficient: f64) -> Result<()> {
    if !(wavelength > 0.0) {
        return Err(Error::invalid(format!("Bragg wavelength must be positive, got {wavelength}")));
    }
    if !(strain_coefficient < 1.0) {
        return Err(Error::invalid(format!(
            "strain coefficient must be below 1, got {strain_coefficient}"
        )));
    }
    Ok(())
}

/// One acquisition along the fiber.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainFrame {
    pub strains: Vec<f64>,
    pub wavelength_shifts: Option<Vec<f64>>,
    pub index: u64,
}

impl StrainFrame {
    pub fn new(strains: Vec<f64>, index: u64) -> Result<Self> {
        let frame = Self {
            strains,
            wavelength_shifts: None,
            index,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn len(&self) -> usize {
        self.strains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strains.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("strain frame", &self.strains)?;
        if let Some(v) = self.strains.iter().find(|v| v.abs() > MAX_STRAIN) {
            return Err(Error::invalid(format!("strain {v} beyond the ±{MAX_STRAIN} sanity bound")));
        }
        if let Some(shifts) = &self.wavelength_shifts {
            ensure_len("wavelength shifts", self.strains.len(), shifts.len())?;
            ensure_finite("wavelength shifts", shifts)?;
        }
        Ok(())
    }

    /// Converts per-sample wavelength shifts into a strain frame.
    pub fn from_wavelength_shifts(shifts: Vec<f64>, layout: &SensorLayout, index: u64) -> Result<Self> {
        ensure_len("wavelength shifts", layout.node_count, shifts.len())?;
        let strains = shifts
            .iter()
            .zip(&layout.wavelengths)
            .map(|(&d, &l)| strain_from_wavelength(l, d, layout.strain_coefficient))
            .collect::<Result<Vec<_>>>()?;
        let frame = Self {
            strains,
            wavelength_shifts: Some(shifts),
            index,
        };
        frame.validate()?;
        Ok(frame)
    }
}

/// Axial and shear strain at every sample for a given shape.
pub fn axial_shear_strains(shape: &RodShape, layout: &SensorLayout) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = layout.node_count;
    ensure_len("shape nodes", m, shape.node_count())?;
    let kappa = shape.curvatures();
    let phi = shape.twists();
    let axial = (0..m)
        .map(|s| -kappa[s] * layout.helix_radii[s] * (phi[s] + layout.fbg_azimuth(s)).sin())
        .collect();
    let shear = (0..m)
        .map(|s| {
            let dphi = if m < 2 {
                0.0
            } else if s + 1 < m {
                phi[s + 1] - phi[s]
            } else {
                phi[s] - phi[s - 1]
            };
            dphi * layout.helix_radii[s] * layout.shear_coefficient / layout.sample_spacing
        })
        .collect();
    Ok((axial, shear))
}

/// Measurement noise: i.i.d. Gaussian per sample, optionally inflated with
/// the local bending (`σ_s = std·(1 + curvature_gain·|κ_s|/κ_ref)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub std: f64,
    pub curvature_gain: f64,
    /// Curvature at which the inflation factor reaches `1 + curvature_gain`.
    pub reference_curvature: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            std: 1e-5,
            curvature_gain: 0.0,
            reference_curvature: 1.0 / 7.5e-3,
        }
    }
}

impl NoiseModel {
    pub fn gaussian(std: f64) -> Self {
        Self {
            std,
            ..Self::default()
        }
    }

    pub fn none() -> Self {
        Self::gaussian(0.0)
    }

    fn validate(&self) -> Result<()> {
        if !(self.std >= 0.0 && self.std.is_finite()) {
            return Err(Error::invalid(format!("noise std must be non-negative, got {}", self.std)));
        }
        if !(self.curvature_gain >= 0.0 && self.reference_curvature > 0.0) {
            return Err(Error::invalid("noise inflation parameters must be non-negative"));
        }
        Ok(())
    }
}

/// Simulated acquisition with Gaussian noise of `noise_std`; frame index 0.
pub fn measure(shape: &RodShape, layout: &SensorLayout, noise_std: f64, seed: u64) -> Result<StrainFrame> {
    measure_with(shape, layout, &NoiseModel::gaussian(noise_std), seed, 0)
}

/// Simulated acquisition. The noise stream depends only on `(seed, index)`,
/// so frames can be generated in any order.
pub fn measure_with(
    shape: &RodShape,
    layout: &SensorLayout,
    noise: &NoiseModel,
    seed: u64,
    index: u64,
) -> Result<StrainFrame> {
    noise.validate()?;
    let (axial, shear) = axial_shear_strains(shape, layout)?;
    let (sin_t, cos_t) = layout.lead_angle().sin_cos();
    let mut rng = frame_rng(seed, index);
    let strains: Vec<f64> = (0..layout.node_count)
        .map(|s| {
            let mut e = cos_t * axial[s] + sin_t * shear[s] + layout.strain_bias[s];
            if noise.std > 0.0 {
                let inflation =
                    1.0 + noise.curvature_gain * shape.curvatures()[s].abs() / noise.reference_curvature;
                let z: f64 = StandardNormal.sample(&mut rng);
                e += noise.std * inflation * z;
            }
            e
        })
        .collect();
    let shifts = strains
        .iter()
        .zip(&layout.wavelengths)
        .map(|(&e, &l)| wavelength_from_strain(l, e, layout.strain_coefficient))
        .collect::<Result<Vec<_>>>()?;
    let frame = StrainFrame {
        strains,
        wavelength_shifts: Some(shifts),
        index,
    };
    frame.validate()?;
    Ok(frame)
}

pub(crate) fn frame_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Noiseless acquisition of the straight rod: the bias every frame carries.
pub fn baseline_frame(layout: &SensorLayout) -> Result<StrainFrame> {
    let straight = RodShape::straight(layout.node_count, layout.sample_spacing)?;
    measure_with(&straight, layout, &NoiseModel::none(), 0, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecomposeMode {
    /// In-plane bending: the whole reading is axial strain.
    #[default]
    Planar,
    /// Minimum-norm split along the fixed lead-angle projection.
    Projection,
}

/// Removes the straight-configuration baseline and splits the reading into
/// axial and shear strain.
pub fn decompose(
    frame: &StrainFrame,
    layout: &SensorLayout,
    baseline: &StrainFrame,
    mode: DecomposeMode,
) -> Result<(Vec<f64>, Vec<f64>)> {
    ensure_len("strain frame", layout.node_count, frame.len())?;
    ensure_len("baseline frame", layout.node_count, baseline.len())?;
    ensure_finite("strain frame", &frame.strains)?;
    ensure_finite("baseline frame", &baseline.strains)?;
    let (sin_t, cos_t) = layout.lead_angle().sin_cos();
    let corrected = frame.strains.iter().zip(&baseline.strains).map(|(e, b)| e - b);
    Ok(match mode {
        DecomposeMode::Planar => (corrected.map(|e| e / cos_t).collect(), vec![0.0; layout.node_count]),
        DecomposeMode::Projection => corrected.map(|e| (cos_t * e, sin_t * e)).unzip(),
    })
}

/// Wraps an angle into `[0, 2π)`.
pub(crate) fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU - 1e-15 || w.is_nan() {
        0.0
    } else {
        w
    }
}
