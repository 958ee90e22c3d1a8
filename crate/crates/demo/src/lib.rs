//! Browser bindings: simulate a bent rod with a contact, reconstruct it from
//! the strain frame, and round-trip a contact through the force codec.
//!
//! Shapes cross the boundary as flat `[x0, y0, z0, x1, …]` arrays in metres.

use fbg_core::fbg::{baseline_frame, measure, SensorLayout, StrainFrame};
use fbg_core::force::{apply_force_deflection, decode_force, encode_force, DEFAULT_FORCE_SIGMA, DEFAULT_STIFFNESS};
use fbg_core::geometry::{bend_profile, integrate_shape, BendProfile, WorkspaceConfig};
use fbg_core::model_based::reconstruct;
use fbg_core::{ContactForce, RodShape};
use wasm_bindgen::prelude::*;

fn js(e: fbg_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn flatten(shape: &RodShape) -> Vec<f64> {
    shape.positions().iter().flat_map(|p| [p.x, p.y, p.z]).collect()
}

/// A simulated acquisition and the shape that produced it.
#[wasm_bindgen]
pub struct Simulation {
    strains: Vec<f64>,
    shape: Vec<f64>,
}

#[wasm_bindgen]
impl Simulation {
    #[wasm_bindgen(getter)]
    pub fn strains(&self) -> Vec<f64> {
        self.strains.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn shape(&self) -> Vec<f64> {
        self.shape.clone()
    }
}

/// Planar constant-curvature bend of `bend_angle_deg`, deflected by a contact
/// of `force_n` at `location_mm` (no contact when `force_n` is zero), then
/// measured with Gaussian noise.
#[wasm_bindgen]
pub fn simulate(bend_angle_deg: f64, force_n: f64, location_mm: f64, noise_std: f64, seed: u64) -> Result<Simulation, JsError> {
    let ws = WorkspaceConfig::default();
    let layout = SensorLayout::default();
    let m = layout.node_count;
    let (k, t) = bend_profile(
        bend_angle_deg.to_radians(),
        BendProfile::Constant,
        m,
        m as f64 * layout.sample_spacing,
        &ws,
    )
    .map_err(js)?;
    let base = integrate_shape(&k, &t, layout.sample_spacing).map_err(js)?;
    let force = if force_n > 0.0 {
        ContactForce::new(force_n, location_mm * 1e-3)
    } else {
        ContactForce::inactive()
    };
    force.validate(&ws).map_err(js)?;
    let shape = apply_force_deflection(&base, &force, DEFAULT_STIFFNESS, ws.max_curvature).map_err(js)?;
    let frame = measure(&shape, &layout, noise_std, seed).map_err(js)?;
    Ok(Simulation {
        strains: frame.strains,
        shape: flatten(&shape),
    })
}

/// Closed-form reconstruction of a strain frame against the straight rod.
#[wasm_bindgen]
pub fn reconstruct_shape(strains: Vec<f64>) -> Result<Vec<f64>, JsError> {
    let layout = SensorLayout::default();
    let frame = StrainFrame::new(strains, 0).map_err(js)?;
    let baseline = baseline_frame(&layout).map_err(js)?;
    Ok(flatten(&reconstruct(&frame, &baseline, &layout).map_err(js)?))
}

/// Gaussian force distribution over the sensing nodes.
#[wasm_bindgen]
pub fn force_distribution(force_n: f64, location_mm: f64) -> Result<Vec<f64>, JsError> {
    let grid = SensorLayout::default().node_grid();
    let d = encode_force(&ContactForce::new(force_n, location_mm * 1e-3), &grid, DEFAULT_FORCE_SIGMA).map_err(js)?;
    Ok(d.values)
}

/// Contact location (mm) decoded from a distribution; negative when no node
/// exceeds `threshold_n`.
#[wasm_bindgen]
pub fn decode_location(values: Vec<f64>, threshold_n: f64) -> Result<f64, JsError> {
    let grid = SensorLayout::default().node_grid();
    let d = fbg_core::force::ForceDistribution {
        grid,
        values,
        sigma: DEFAULT_FORCE_SIGMA,
    };
    let c = decode_force(&d, 0.0, WorkspaceConfig::default().force_range, threshold_n).map_err(js)?;
    Ok(if c.active { c.location * 1e3 } else { -1.0 })
}

/// Node arc lengths in mm, for plot axes.
#[wasm_bindgen]
pub fn node_positions_mm() -> Vec<f64> {
    SensorLayout::default().node_grid().iter().map(|x| x * 1e3).collect()
}
