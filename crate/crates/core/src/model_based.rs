//! Model-based reconstruction: invert the strain/curvature/twist relation
//! triad by triad and integrate from base to tip.

use crate::error::{ensure_len, Error, Result};
use crate::fbg::{decompose, wrap_angle, DecomposeMode, SensorLayout, StrainFrame};
use crate::geometry::{integrate_shape, RodShape};

/// Curvature and bending azimuth shared by three consecutive samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriadSolution {
    pub triad: usize,
    /// Always non-negative; the sign is folded into `phase`.
    pub curvature: f64,
    /// In `[0, 2π)`.
    pub phase: f64,
    pub residual: f64,
    pub converged: bool,
}

/// Least-squares fit of `ε_j = −κ·r_j·sin(φ + α_j)` over one triad.
///
/// With `A = κ cos φ` and `B = κ sin φ` the model is linear,
/// `ε_j = −r_j·(A sin α_j + B cos α_j)`, and the 2×2 normal equations give the
/// exact solution whenever the orientations are not all equal modulo π.
pub fn solve_triad(axial: &[f64; 3], azimuths: &[f64; 3], radii: &[f64; 3]) -> Result<TriadSolution> {
    solve_triad_indexed(0, axial, azimuths, radii)
}

fn solve_triad_indexed(
    triad: usize,
    axial: &[f64; 3],
    azimuths: &[f64; 3],
    radii: &[f64; 3],
) -> Result<TriadSolution> {
    if axial.iter().chain(azimuths).chain(radii).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("triad input"));
    }
    // rows of the design matrix: −r_j·[sin α_j, cos α_j]
    let rows: [[f64; 2]; 3] =
        std::array::from_fn(|j| [-radii[j] * azimuths[j].sin(), -radii[j] * azimuths[j].cos()]);
    let (mut saa, mut sab, mut sbb, mut sa_y, mut sb_y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (row, &y) in rows.iter().zip(axial) {
        saa += row[0] * row[0];
        sab += row[0] * row[1];
        sbb += row[1] * row[1];
        sa_y += row[0] * y;
        sb_y += row[1] * y;
    }
    let det = saa * sbb - sab * sab;
    let scale = (saa + sbb).powi(2);
    if !(scale > 0.0) || det <= 1e-12 * scale {
        return Err(Error::Unidentifiable {
            triad,
            reason: "sensor orientations coincide modulo π".into(),
        });
    }
    let a = (sbb * sa_y - sab * sb_y) / det;
    let b = (saa * sb_y - sab * sa_y) / det;
    let residual = rows
        .iter()
        .zip(axial)
        .map(|(row, y)| (row[0] * a + row[1] * b - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let curvature = a.hypot(b);
    let phase = if curvature == 0.0 { 0.0 } else { wrap_angle(b.atan2(a)) };
    Ok(TriadSolution {
        triad,
        curvature,
        phase,
        residual,
        converged: residual.is_finite(),
    })
}

/// Twist increment per sample from shear strain: `Δφ = ε_h·Δh/(r·g_ε)`.
pub fn twist_update(shear: &[f64], layout: &SensorLayout) -> Result<Vec<f64>> {
    ensure_len("shear strains", layout.node_count, shear.len())?;
    if layout.shear_coefficient == 0.0 || layout.helix_radii.iter().any(|&r| r == 0.0) {
        return Err(Error::invalid("twist update needs non-zero radius and shear coefficient"));
    }
    Ok(shear
        .iter()
        .zip(&layout.helix_radii)
        .map(|(e, r)| e * layout.sample_spacing / (r * layout.shear_coefficient))
        .collect())
}

/// Node indices of every triad. The last triad, if incomplete, is filled with
/// the samples just before it so it stays identifiable; its solution is only
/// assigned to the nodes it newly covers.
fn triads(node_count: usize) -> Vec<([usize; 3], std::ops::Range<usize>)> {
    (0..node_count.div_ceil(3))
        .map(|t| {
            let start = 3 * t;
            let end = (start + 3).min(node_count);
            let first = end.saturating_sub(3);
            let members = std::array::from_fn(|j| (first + j).min(node_count - 1));
            (members, start..end)
        })
        .collect()
}

/// Per-triad solutions for a bias-corrected frame.
pub fn solve_frame(axial: &[f64], layout: &SensorLayout) -> Result<Vec<(TriadSolution, std::ops::Range<usize>)>> {
    ensure_len("axial strains", layout.node_count, axial.len())?;
    if layout.node_count < 3 {
        return Err(Error::invalid("triad grouping needs at least three samples"));
    }
    let az = layout.fbg_azimuths();
    triads(layout.node_count)
        .into_iter()
        .enumerate()
        .map(|(t, (m, nodes))| {
            let pick = |v: &[f64]| [v[m[0]], v[m[1]], v[m[2]]];
            let sol = solve_triad_indexed(t, &pick(axial), &pick(&az), &pick(&layout.helix_radii))?;
            Ok((sol, nodes))
        })
        .collect()
}

/// Full model-based pipeline: bias removal, triad inversion, twist chaining,
/// integration.
pub fn reconstruct(frame: &StrainFrame, baseline: &StrainFrame, layout: &SensorLayout) -> Result<RodShape> {
    reconstruct_with(frame, baseline, layout, DecomposeMode::Planar)
}

pub fn reconstruct_with(
    frame: &StrainFrame,
    baseline: &StrainFrame,
    layout: &SensorLayout,
    mode: DecomposeMode,
) -> Result<RodShape> {
    let (axial, shear) = decompose(frame, layout, baseline, mode)?;
    let solutions = solve_frame(&axial, layout)?;
    let dphi = twist_update(&shear, layout)?;

    // cumulative twist along the rod, then re-centred on each triad so the
    // triad phase stays the mean azimuth of its members
    let mut chain = Vec::with_capacity(layout.node_count);
    let mut acc = 0.0;
    for d in &dphi {
        chain.push(acc);
        acc += d;
    }

    let m = layout.node_count;
    let mut curvatures = vec![0.0; m];
    let mut twists = vec![0.0; m];
    for (sol, nodes) in solutions {
        let mean: f64 = nodes.clone().map(|i| chain[i]).sum::<f64>() / nodes.len() as f64;
        for i in nodes {
            curvatures[i] = sol.curvature;
            twists[i] = sol.phase + chain[i] - mean;
        }
    }
    integrate_shape(&curvatures, &twists, layout.sample_spacing)
}
