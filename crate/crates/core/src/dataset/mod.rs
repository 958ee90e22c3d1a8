//! Labelled synthetic corpora: generation, normalization statistics,
//! splitting and persistence.

pub(crate) mod io;
mod norm;
mod split;

pub use io::{export_csv, load_dataset, save_dataset, DATASET_MAGIC, DATASET_VERSION};
pub use norm::{denormalize, fit_norm_stats, normalize, LabelRange, NormStats, NORM_EPSILON};
pub use split::{split, split_indices};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbg::{frame_rng, measure_with, NoiseModel, SensorLayout, StrainFrame};
use crate::force::{apply_force_deflection, encode_force, ContactForce, ForceDistribution};
use crate::geometry::{bend_profile, integrate_shape, BendProfile, RodShape, WorkspaceConfig};

/// Stream offset separating label draws from measurement noise.
const NOISE_SEED_SALT: u64 = 0x5eed_0f_f1be7;

/// One labelled acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub strains: Vec<f64>,
    pub gt_curvatures: Vec<f64>,
    pub gt_twists: Vec<f64>,
    pub gt_force: ContactForce,
    pub gt_distribution: ForceDistribution,
    /// Commanded total bend angle, rad.
    pub bend_angle: f64,
    /// Static samples each own a scenario; dynamic trajectories share one.
    pub scenario: u64,
    pub step: u64,
}

impl Sample {
    pub fn node_count(&self) -> usize {
        self.strains.len()
    }

    pub fn frame(&self) -> StrainFrame {
        StrainFrame {
            strains: self.strains.clone(),
            wavelength_shifts: None,
            index: self.step,
        }
    }

    pub fn gt_shape(&self, step: f64) -> Result<RodShape> {
        integrate_shape(&self.gt_curvatures, &self.gt_twists, step)
    }

    pub fn validate(&self, workspace: &WorkspaceConfig) -> Result<()> {
        let m = self.node_count();
        crate::error::ensure_len("curvature labels", m, self.gt_curvatures.len())?;
        crate::error::ensure_len("twist labels", m, self.gt_twists.len())?;
        crate::error::ensure_len("force distribution", m, self.gt_distribution.values.len())?;
        crate::error::ensure_finite("strains", &self.strains)?;
        crate::error::ensure_finite("curvature labels", &self.gt_curvatures)?;
        crate::error::ensure_finite("twist labels", &self.gt_twists)?;
        if self
            .gt_curvatures
            .iter()
            .any(|k| k.abs() > workspace.max_curvature * (1.0 + 1e-12))
        {
            return Err(Error::Workspace("curvature label beyond max curvature".into()));
        }
        self.gt_force.validate(workspace)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusKind {
    Static,
    Dynamic,
}

/// Everything needed to regenerate or interpret a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub kind: CorpusKind,
    pub layout: SensorLayout,
    pub workspace: WorkspaceConfig,
    pub seed: u64,
    pub noise: NoiseModel,
    pub stiffness: f64,
    pub force_sigma: f64,
    pub samples: Vec<Sample>,
    pub stats: Option<NormStats>,
}

impl Corpus {
    pub fn scenario_count(&self) -> usize {
        let mut ids: Vec<u64> = self.samples.iter().map(|s| s.scenario).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StaticConfig {
    pub count: usize,
    pub noise: NoiseModel,
    pub seed: u64,
    /// Fraction of samples generated without contact.
    pub no_contact_fraction: f64,
    /// Bending stiffness for the contact deflection, N·m².
    pub stiffness: f64,
    pub profile: BendProfile,
    pub force_sigma: f64,
}

impl Default for StaticConfig {
    fn default() -> Self {
        Self {
            count: 6224,
            noise: NoiseModel::default(),
            seed: 42,
            no_contact_fraction: 0.2,
            stiffness: crate::force::DEFAULT_STIFFNESS,
            profile: BendProfile::Constant,
            force_sigma: crate::force::DEFAULT_FORCE_SIGMA,
        }
    }
}

/// Contact seen during a dynamic trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ForceSchedule {
    Off,
    /// Constant contact that is lost once the bend angle exceeds
    /// `release_angle` (rad).
    Contact {
        magnitude: f64,
        location: f64,
        release_angle: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicConfig {
    /// rad
    pub initial_angle: f64,
    /// rad
    pub final_angle: f64,
    pub steps: usize,
    pub force: ForceSchedule,
    pub noise: NoiseModel,
    pub seed: u64,
    pub scenario: u64,
    pub stiffness: f64,
    pub profile: BendProfile,
    pub force_sigma: f64,
}

impl DynamicConfig {
    pub fn new(initial_angle: f64, steps: usize, force: ForceSchedule) -> Self {
        Self {
            initial_angle,
            final_angle: 270f64.to_radians(),
            steps,
            force,
            noise: NoiseModel::default(),
            seed: 42,
            scenario: 0,
            stiffness: crate::force::DEFAULT_STIFFNESS,
            profile: BendProfile::Constant,
            force_sigma: crate::force::DEFAULT_FORCE_SIGMA,
        }
    }
}

/// Shape, strains and labels for one commanded configuration.
#[allow(clippy::too_many_arguments)]
fn simulate(
    angle: f64,
    force: ContactForce,
    profile: BendProfile,
    stiffness: f64,
    sigma: f64,
    noise: &NoiseModel,
    noise_seed: u64,
    noise_index: u64,
    workspace: &WorkspaceConfig,
    layout: &SensorLayout,
) -> Result<(Vec<f64>, RodShape, ForceDistribution)> {
    let m = layout.node_count;
    let length = m as f64 * layout.sample_spacing;
    let (k, t) = bend_profile(angle, profile, m, length, workspace)?;
    let base = integrate_shape(&k, &t, layout.sample_spacing)?;
    let shape = apply_force_deflection(&base, &force, stiffness, workspace.max_curvature)?;
    let frame = measure_with(&shape, layout, noise, noise_seed, noise_index)?;
    let dist = encode_force(&force, &layout.node_grid(), sigma)?;
    Ok((frame.strains, shape, dist))
}

fn check_inputs(workspace: &WorkspaceConfig, layout: &SensorLayout) -> Result<()> {
    workspace.validate()?;
    layout.validate()
}

/// Uniformly sampled static poses: bend angle over the full workspace,
/// contact location over the contact span and magnitude over the force range.
pub fn generate_static(
    config: &StaticConfig,
    workspace: &WorkspaceConfig,
    layout: &SensorLayout,
) -> Result<Vec<Sample>> {
    check_inputs(workspace, layout)?;
    if config.count == 0 {
        return Err(Error::invalid("static corpus needs at least one sample"));
    }
    if !(0.0..=1.0).contains(&config.no_contact_fraction) {
        return Err(Error::invalid("no-contact fraction must lie in [0, 1]"));
    }
    let (f_lo, f_hi) = workspace.force_range;
    let noise_seed = config.seed ^ NOISE_SEED_SALT;
    (0..config.count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = frame_rng(config.seed, i);
            let angle = rng.gen_range(-workspace.bend_angle_range..=workspace.bend_angle_range);
            let contact = rng.gen::<f64>() >= config.no_contact_fraction;
            let location = rng.gen_range(0.0..=workspace.contact_span);
            let magnitude = rng.gen_range(f_lo..=f_hi);
            let force = if contact {
                ContactForce::new(magnitude, location)
            } else {
                ContactForce::inactive()
            };
            let (strains, shape, dist) = simulate(
                angle,
                force,
                config.profile,
                config.stiffness,
                config.force_sigma,
                &config.noise,
                noise_seed,
                i,
                workspace,
                layout,
            )?;
            Ok(Sample {
                strains,
                gt_curvatures: shape.curvatures().to_vec(),
                gt_twists: shape.twists().to_vec(),
                gt_force: force,
                gt_distribution: dist,
                bend_angle: angle,
                scenario: i,
                step: 0,
            })
        })
        .collect()
}

/// Bend angle at every step of a triangle-wave trajectory
/// `initial → final → initial`; the sequence is palindromic.
pub fn triangle_trajectory(initial: f64, peak: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![initial];
    }
    let half = (steps - 1) as f64 / 2.0;
    (0..steps)
        .map(|k| {
            let up = k.min(steps - 1 - k) as f64 / half;
            initial + (peak - initial) * up
        })
        .collect()
}

/// One bend-and-return trajectory with an optional contact that is lost at
/// large bend angles (labels switch to `(0, 0)` while out of contact).
pub fn generate_dynamic(
    config: &DynamicConfig,
    workspace: &WorkspaceConfig,
    layout: &SensorLayout,
) -> Result<Vec<Sample>> {
    check_inputs(workspace, layout)?;
    if config.steps < 2 {
        return Err(Error::invalid("a dynamic trajectory needs at least two steps"));
    }
    for (name, a) in [("initial", config.initial_angle), ("final", config.final_angle)] {
        if !a.is_finite() || a.abs() > workspace.bend_angle_range + 1e-12 {
            return Err(Error::Workspace(format!(
                "{name} angle {:.1}° outside the workspace",
                a.to_degrees()
            )));
        }
    }
    if let ForceSchedule::Contact {
        magnitude,
        location,
        ..
    } = config.force
    {
        ContactForce::new(magnitude, location).validate(workspace)?;
    }
    let noise_seed = config.seed ^ NOISE_SEED_SALT ^ config.scenario.rotate_left(32);
    triangle_trajectory(config.initial_angle, config.final_angle, config.steps)
        .into_iter()
        .enumerate()
        .map(|(k, angle)| {
            let force = match config.force {
                ForceSchedule::Contact {
                    magnitude,
                    location,
                    release_angle,
                } if angle.abs() <= release_angle => ContactForce::new(magnitude, location),
                _ => ContactForce::inactive(),
            };
            let (strains, shape, dist) = simulate(
                angle,
                force,
                config.profile,
                config.stiffness,
                config.force_sigma,
                &config.noise,
                noise_seed,
                k as u64,
                workspace,
                layout,
            )?;
            Ok(Sample {
                strains,
                gt_curvatures: shape.curvatures().to_vec(),
                gt_twists: shape.twists().to_vec(),
                gt_force: force,
                gt_distribution: dist,
                bend_angle: angle,
                scenario: config.scenario,
                step: k as u64,
            })
        })
        .collect()
}
