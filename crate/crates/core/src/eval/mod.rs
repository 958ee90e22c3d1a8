//! Benchmark protocols and metrics shared by every estimator.
//!
//! Errors are reported in millimetres (tip, shape, contact location) and
//! millinewtons (force magnitude) as mean ± population standard deviation
//! over samples.

mod report;

pub use report::{export_report, render, ReportFormat};

use rayon::prelude::*;

use crate::dataset::Sample;
use crate::error::{ensure_len, Error, Result};
use crate::fbg::{baseline_frame, DecomposeMode, SensorLayout, StrainFrame};
use crate::force::ContactForce;
use crate::geometry::{shape_error, tip_position_error, RodShape};
use crate::model_based::reconstruct_with;
use crate::nn::ModelParams;

/// What an estimator reports for one frame. Estimators without a force
/// model leave `force` empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub shape: RodShape,
    pub force: Option<ContactForce>,
}

pub trait Estimator: Sync {
    fn name(&self) -> String;
    fn estimates_force(&self) -> bool;
    /// One estimate per sample, in order. Implementations only read the
    /// strain vector of each sample.
    fn estimate(&self, samples: &[Sample]) -> Result<Vec<Estimate>>;
}

/// The closed-form triad reconstruction.
#[derive(Debug, Clone)]
pub struct ModelBased {
    pub layout: SensorLayout,
    pub baseline: StrainFrame,
    pub mode: DecomposeMode,
}

impl ModelBased {
    /// Uses the noiseless straight acquisition as baseline.
    pub fn new(layout: SensorLayout) -> Result<Self> {
        let baseline = baseline_frame(&layout)?;
        Ok(Self {
            layout,
            baseline,
            mode: DecomposeMode::Planar,
        })
    }
}

impl Estimator for ModelBased {
    fn name(&self) -> String {
        "model-based".into()
    }

    fn estimates_force(&self) -> bool {
        false
    }

    fn estimate(&self, samples: &[Sample]) -> Result<Vec<Estimate>> {
        samples
            .par_iter()
            .map(|s| {
                let shape = reconstruct_with(&s.frame(), &self.baseline, &self.layout, self.mode)?;
                Ok(Estimate { shape, force: None })
            })
            .collect()
    }
}

impl Estimator for ModelParams {
    fn name(&self) -> String {
        self.kind.name().into()
    }

    fn estimates_force(&self) -> bool {
        true
    }

    fn estimate(&self, samples: &[Sample]) -> Result<Vec<Estimate>> {
        let frames: Vec<&[f64]> = samples.iter().map(|s| s.strains.as_slice()).collect();
        Ok(self
            .predict(&frames)?
            .into_iter()
            .map(|p| Estimate {
                shape: p.shape,
                force: Some(p.force),
            })
            .collect())
    }
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Stat {
            mean,
            std: var.sqrt(),
            count: values.len(),
        })
    }
}

/// Per-sample errors of one method. Force fields are `None` for methods
/// without a force model; location error is `None` on no-contact samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub scenario: u64,
    pub step: u64,
    /// Commanded bend angle, degrees.
    pub bend_angle_deg: f64,
    pub tip_error_mm: f64,
    pub shape_error_mm: f64,
    pub gt_force_mn: f64,
    pub gt_location_mm: f64,
    pub gt_active: bool,
    pub est_force_mn: Option<f64>,
    pub est_location_mm: Option<f64>,
    pub force_error_mn: Option<f64>,
    pub location_error_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodMetrics {
    pub method: String,
    pub tip_mm: Stat,
    pub shape_mm: Stat,
    /// `None` prints as NA.
    pub force_mn: Option<Stat>,
    pub location_mm: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub metrics: MethodMetrics,
    pub records: Vec<SampleRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub protocol: Protocol,
    pub samples: usize,
    pub scenarios: usize,
    pub methods: Vec<MethodResult>,
}

impl MetricsReport {
    pub fn method(&self, name: &str) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.metrics.method == name)
    }

    /// Per-step records of one method on one scenario, in step order.
    pub fn trace(&self, method: &str, scenario: u64) -> Vec<&SampleRecord> {
        let mut t: Vec<&SampleRecord> = self
            .method(method)
            .map(|m| m.records.iter().filter(|r| r.scenario == scenario).collect())
            .unwrap_or_default();
        t.sort_by_key(|r| r.step);
        t
    }
}

fn record(sample: &Sample, est: &Estimate, gt: &RodShape) -> Result<SampleRecord> {
    let f = &sample.gt_force;
    let (est_force_mn, est_location_mm, force_error_mn, location_error_mm) = match est.force {
        Some(e) => (
            Some(e.magnitude * 1e3),
            Some(e.location * 1e3),
            Some((e.magnitude - f.magnitude).abs() * 1e3),
            f.active.then(|| (e.location - f.location).abs() * 1e3),
        ),
        None => (None, None, None, None),
    };
    Ok(SampleRecord {
        scenario: sample.scenario,
        step: sample.step,
        bend_angle_deg: sample.bend_angle.to_degrees(),
        tip_error_mm: tip_position_error(&est.shape, gt)? * 1e3,
        shape_error_mm: shape_error(&est.shape, gt)? * 1e3,
        gt_force_mn: f.magnitude * 1e3,
        gt_location_mm: f.location * 1e3,
        gt_active: f.active,
        est_force_mn,
        est_location_mm,
        force_error_mn,
        location_error_mm,
    })
}

/// Aggregates per-sample records into one row of the report.
pub fn summarize(method: &str, records: &[SampleRecord]) -> Result<MethodMetrics> {
    let col = |f: &dyn Fn(&SampleRecord) -> Option<f64>| -> Vec<f64> { records.iter().filter_map(f).collect() };
    let tip = Stat::of(&col(&|r| Some(r.tip_error_mm))).ok_or_else(|| Error::invalid("no samples to summarize"))?;
    Ok(MethodMetrics {
        method: method.to_string(),
        tip_mm: tip,
        shape_mm: Stat::of(&col(&|r| Some(r.shape_error_mm))).expect("same count as tip"),
        force_mn: Stat::of(&col(&|r| r.force_error_mn)),
        location_mm: Stat::of(&col(&|r| r.location_error_mm)),
    })
}

fn run(protocol: Protocol, samples: &[Sample], layout: &SensorLayout, methods: &[&dyn Estimator]) -> Result<MetricsReport> {
    if samples.is_empty() {
        return Err(Error::invalid("nothing to evaluate"));
    }
    for s in samples {
        ensure_len("sample nodes", layout.node_count, s.node_count())?;
    }
    let truth: Vec<RodShape> = samples
        .par_iter()
        .map(|s| s.gt_shape(layout.sample_spacing))
        .collect::<Result<_>>()?;
    let mut results = Vec::with_capacity(methods.len());
    for m in methods {
        let estimates = m.estimate(samples)?;
        ensure_len("estimates", samples.len(), estimates.len())?;
        let records: Vec<SampleRecord> = samples
            .iter()
            .zip(&estimates)
            .zip(&truth)
            .map(|((s, e), gt)| {
                let mut r = record(s, e, gt)?;
                if !m.estimates_force() {
                    r.est_force_mn = None;
                    r.est_location_mm = None;
                    r.force_error_mn = None;
                    r.location_error_mm = None;
                }
                Ok(r)
            })
            .collect::<Result<_>>()?;
        results.push(MethodResult {
            metrics: summarize(&m.name(), &records)?,
            records,
        });
    }
    let mut scenarios: Vec<u64> = samples.iter().map(|s| s.scenario).collect();
    scenarios.sort_unstable();
    scenarios.dedup();
    Ok(MetricsReport {
        protocol,
        samples: samples.len(),
        scenarios: scenarios.len(),
        methods: results,
    })
}

/// Every method on every held-out static sample.
pub fn run_static_suite(test: &[Sample], layout: &SensorLayout, methods: &[&dyn Estimator]) -> Result<MetricsReport> {
    run(Protocol::Static, test, layout, methods)
}

/// Every method along one or more ordered trajectories. Records keep their
/// scenario and step, so [`MetricsReport::trace`] yields per-step traces.
pub fn run_dynamic_suite(
    scenarios: &[Vec<Sample>],
    layout: &SensorLayout,
    methods: &[&dyn Estimator],
) -> Result<MetricsReport> {
    if scenarios.is_empty() || scenarios.iter().any(Vec::is_empty) {
        return Err(Error::invalid("dynamic evaluation needs non-empty scenarios"));
    }
    let mut ids: Vec<u64> = scenarios.iter().map(|s| s[0].scenario).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != scenarios.len() || scenarios.iter().any(|sc| sc.iter().any(|s| s.scenario != sc[0].scenario)) {
        return Err(Error::invalid("each scenario needs its own id shared by all of its steps"));
    }
    let all: Vec<Sample> = scenarios.iter().flatten().cloned().collect();
    run(Protocol::Dynamic, &all, layout, methods)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_dynamic, generate_static, DynamicConfig, ForceSchedule, StaticConfig};
    use crate::geometry::WorkspaceConfig;
    use nalgebra::Vector3;

    /// Returns ground truth, optionally shifted.
    struct Oracle {
        offset: Vector3<f64>,
        step: f64,
    }

    impl Estimator for Oracle {
        fn name(&self) -> String {
            "oracle".into()
        }
        fn estimates_force(&self) -> bool {
            true
        }
        fn estimate(&self, samples: &[Sample]) -> Result<Vec<Estimate>> {
            samples
                .iter()
                .map(|s| {
                    Ok(Estimate {
                        shape: s.gt_shape(self.step)?.translated(self.offset),
                        force: Some(s.gt_force),
                    })
                })
                .collect()
        }
    }

    fn corpus() -> Vec<Sample> {
        let cfg = StaticConfig {
            count: 40,
            ..StaticConfig::default()
        };
        generate_static(&cfg, &WorkspaceConfig::default(), &SensorLayout::default()).unwrap()
    }

    #[test]
    fn perfect_and_offset_oracles() {
        let layout = SensorLayout::default();
        let samples = corpus();
        let exact = Oracle {
            offset: Vector3::zeros(),
            step: layout.sample_spacing,
        };
        let shifted = Oracle {
            offset: Vector3::new(0.0, 1e-3, 0.0),
            step: layout.sample_spacing,
        };
        let report = run_static_suite(&samples, &layout, &[&exact]).unwrap();
        let m = &report.methods[0].metrics;
        assert_eq!(m.tip_mm.mean, 0.0);
        assert_eq!(m.shape_mm.mean, 0.0);
        assert_eq!(m.force_mn.unwrap().mean, 0.0);
        assert_eq!(m.location_mm.unwrap().mean, 0.0);
        let report = run_static_suite(&samples, &layout, &[&shifted]).unwrap();
        let m = &report.methods[0].metrics;
        assert!((m.tip_mm.mean - 1.0).abs() < 1e-9);
        assert!(m.tip_mm.std < 1e-9);
        let active = samples.iter().filter(|s| s.gt_force.active).count();
        assert_eq!(m.location_mm.unwrap().count, active);
        assert_eq!(m.force_mn.unwrap().count, samples.len());
    }

    #[test]
    fn model_based_has_no_force_columns() {
        let layout = SensorLayout::default();
        let mb = ModelBased::new(layout.clone()).unwrap();
        let report = run_static_suite(&corpus(), &layout, &[&mb]).unwrap();
        let m = &report.methods[0];
        assert!(m.metrics.force_mn.is_none() && m.metrics.location_mm.is_none());
        assert!(m.records.iter().all(|r| r.force_error_mn.is_none()));
        assert!(run_static_suite(&[], &layout, &[&mb]).is_err());
    }

    #[test]
    fn stats_are_population() {
        let s = Stat::of(&[1.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.std, s.count), (2.0, 1.0, 2));
        assert!(Stat::of(&[]).is_none());
    }

    #[test]
    fn dynamic_traces_follow_steps() {
        let ws = WorkspaceConfig::default();
        let layout = SensorLayout::default();
        let mut cfg = DynamicConfig::new(30f64.to_radians(), 21, ForceSchedule::Off);
        let a = generate_dynamic(&cfg, &ws, &layout).unwrap();
        cfg.scenario = 1;
        let b = generate_dynamic(&cfg, &ws, &layout).unwrap();
        let exact = Oracle {
            offset: Vector3::zeros(),
            step: layout.sample_spacing,
        };
        let report = run_dynamic_suite(&[a.clone(), b], &layout, &[&exact]).unwrap();
        assert_eq!(report.scenarios, 2);
        let trace = report.trace("oracle", 0);
        assert_eq!(trace.len(), 21);
        assert!(trace.iter().all(|r| r.gt_force_mn == 0.0 && r.gt_location_mm == 0.0));
        assert!(run_dynamic_suite(&[a.clone(), a], &layout, &[&exact]).is_err());
        assert!(run_dynamic_suite(&[], &layout, &[&exact]).is_err());
    }
}
