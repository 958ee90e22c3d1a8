use std::path::{Path, PathBuf};

use fbg_core::dataset::{DynamicConfig, ForceSchedule, StaticConfig};
use fbg_core::fbg::{NoiseModel, SensorLayout};
use fbg_core::geometry::{BendProfile, WorkspaceConfig};
use fbg_core::nn::{AdamConfig, EncoderKind, LrSchedule, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Overrides `output_dir` from the config file.
pub const OUTPUT_DIR_ENV: &str = "FBGSENSE_OUTPUT_DIR";

pub const TRAIN_FILE: &str = "train.fbgd";
pub const TEST_FILE: &str = "test.fbgd";
pub const DYNAMIC_FILE: &str = "dynamic.fbgd";

/// Everything one run needs. Every field has a default, so an empty file
/// reproduces the reference experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub workspace: WorkspaceConfig,
    pub layout: LayoutSection,
    pub dataset: DatasetSection,
    pub dynamic: DynamicSection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("fbgsense-out"),
            workspace: WorkspaceConfig::default(),
            layout: LayoutSection::default(),
            dataset: DatasetSection::default(),
            dynamic: DynamicSection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
        }
    }
}

/// Uniform helix layout; the per-sample vectors are optional overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutSection {
    pub node_count: usize,
    pub sample_spacing: f64,
    pub tube_outer_diameter: f64,
    pub helix_pitch: f64,
    pub base_azimuth: f64,
    pub strain_coefficient: f64,
    pub shear_coefficient: f64,
    pub physical_fbg_count: usize,
    pub helix_radii: Option<Vec<f64>>,
    pub wavelengths: Option<Vec<f64>>,
    pub strain_bias: Option<Vec<f64>>,
}

impl Default for LayoutSection {
    fn default() -> Self {
        let l = SensorLayout::default();
        Self {
            node_count: l.node_count,
            sample_spacing: l.sample_spacing,
            tube_outer_diameter: l.tube_outer_diameter,
            helix_pitch: l.helix_pitch,
            base_azimuth: l.base_azimuth,
            strain_coefficient: l.strain_coefficient,
            shear_coefficient: l.shear_coefficient,
            physical_fbg_count: l.physical_fbg_count,
            helix_radii: None,
            wavelengths: None,
            strain_bias: None,
        }
    }
}

impl LayoutSection {
    pub fn build(&self) -> Result<SensorLayout, CliError> {
        let mut l = SensorLayout::uniform(self.node_count, self.sample_spacing, self.tube_outer_diameter, self.helix_pitch);
        l.base_azimuth = self.base_azimuth;
        l.strain_coefficient = self.strain_coefficient;
        l.shear_coefficient = self.shear_coefficient;
        l.physical_fbg_count = self.physical_fbg_count;
        if let Some(v) = &self.helix_radii {
            l.helix_radii = v.clone();
        }
        if let Some(v) = &self.wavelengths {
            l.wavelengths = v.clone();
        }
        if let Some(v) = &self.strain_bias {
            l.strain_bias = v.clone();
        }
        l.validate().map_err(|e| CliError::config(format!("layout: {e}")))?;
        Ok(l)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub count: usize,
    pub noise: NoiseModel,
    pub seed: u64,
    pub no_contact_fraction: f64,
    pub stiffness: f64,
    pub profile: BendProfile,
    pub force_sigma: f64,
    /// Share of scenarios that go to the training file.
    pub train_fraction: f64,
    pub split_seed: u64,
}

impl Default for DatasetSection {
    fn default() -> Self {
        let s = StaticConfig::default();
        Self {
            count: s.count,
            noise: s.noise,
            seed: s.seed,
            no_contact_fraction: s.no_contact_fraction,
            stiffness: s.stiffness,
            profile: s.profile,
            force_sigma: s.force_sigma,
            train_fraction: 0.8,
            split_seed: 7,
        }
    }
}

impl DatasetSection {
    pub fn static_config(&self) -> StaticConfig {
        StaticConfig {
            count: self.count,
            noise: self.noise,
            seed: self.seed,
            no_contact_fraction: self.no_contact_fraction,
            stiffness: self.stiffness,
            profile: self.profile,
            force_sigma: self.force_sigma,
        }
    }
}

/// Triangle-wave trajectories, one per initial angle. Angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicSection {
    pub initial_angles_deg: Vec<f64>,
    pub final_angle_deg: f64,
    pub steps: usize,
    /// Contact magnitude in N; zero disables contact.
    pub force_magnitude: f64,
    /// Contact location in m.
    pub force_location: f64,
    /// Contact is lost beyond this bend angle.
    pub release_angle_deg: f64,
    pub noise: NoiseModel,
    pub seed: u64,
    pub profile: BendProfile,
}

impl Default for DynamicSection {
    fn default() -> Self {
        Self {
            initial_angles_deg: vec![30.0],
            final_angle_deg: 270.0,
            steps: 101,
            force_magnitude: 0.25,
            force_location: 0.06,
            release_angle_deg: 240.0,
            noise: NoiseModel::default(),
            seed: 42,
            profile: BendProfile::Constant,
        }
    }
}

impl DynamicSection {
    pub fn scenarios(&self, stiffness: f64, force_sigma: f64) -> Vec<DynamicConfig> {
        let force = if self.force_magnitude > 0.0 {
            ForceSchedule::Contact {
                magnitude: self.force_magnitude,
                location: self.force_location,
                release_angle: self.release_angle_deg.to_radians(),
            }
        } else {
            ForceSchedule::Off
        };
        self.initial_angles_deg
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let mut c = DynamicConfig::new(a.to_radians(), self.steps, force);
                c.final_angle = self.final_angle_deg.to_radians();
                c.noise = self.noise;
                c.seed = self.seed;
                c.scenario = i as u64;
                c.stiffness = stiffness;
                c.profile = self.profile;
                c.force_sigma = force_sigma;
                c
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleName {
    Constant,
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub force_weight: f64,
    pub validation_fraction: f64,
    pub force_threshold: f64,
    pub schedule: ScheduleName,
    pub cosine_floor: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        let (schedule, cosine_floor) = match t.schedule {
            LrSchedule::Constant => (ScheduleName::Constant, 0.01),
            LrSchedule::Cosine { floor } => (ScheduleName::Cosine, floor),
        };
        Self {
            learning_rate: t.adam.learning_rate,
            beta1: t.adam.beta1,
            beta2: t.adam.beta2,
            eps: t.adam.eps,
            weight_decay: t.adam.weight_decay,
            batch_size: t.batch_size,
            epochs: t.epochs,
            seed: t.seed,
            force_weight: t.force_weight,
            validation_fraction: t.validation_fraction,
            force_threshold: t.force_threshold,
            schedule,
            cosine_floor,
        }
    }
}

impl TrainSection {
    pub fn build(&self, force_sigma: f64) -> Result<TrainConfig, CliError> {
        let c = TrainConfig {
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
                weight_decay: self.weight_decay,
            },
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            force_weight: self.force_weight,
            validation_fraction: self.validation_fraction,
            force_threshold: self.force_threshold,
            force_sigma,
            schedule: match self.schedule {
                ScheduleName::Constant => LrSchedule::Constant,
                ScheduleName::Cosine => LrSchedule::Cosine {
                    floor: self.cosine_floor,
                },
            },
        };
        c.validate().map_err(|e| CliError::config(format!("train: {e}")))?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// `model` for the closed-form estimator, or an encoder name.
    pub methods: Vec<String>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            methods: std::iter::once("model".to_string())
                .chain(EncoderKind::ALL.iter().map(|k| k.name().to_string()))
                .collect(),
        }
    }
}

impl RunConfig {
    /// Reads `path`, or the defaults when absent, then applies the
    /// environment override.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::config(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| CliError::config(format!("config {}: {}", p.display(), one_line(&e.to_string()))))?
            }
            None => RunConfig::default(),
        };
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
            cfg.output_dir = PathBuf::from(dir);
        }
        cfg.workspace.validate().map_err(|e| CliError::config(format!("workspace: {e}")))?;
        Ok(cfg)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}

/// Collapses a multi-line message onto one line.
pub fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
