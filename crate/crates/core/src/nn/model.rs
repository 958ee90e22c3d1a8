use std::path::Path;

use super::network::{EncoderKind, Network};
use super::train::{LrSchedule, TrainConfig};
use super::Tensor;
use crate::binio::{self, Reader};
use crate::dataset::io::{read_stats, write_stats};
use crate::dataset::{normalize, NormStats, Sample};
use crate::error::{ensure_len, Error, Result};
use crate::fbg::{SensorLayout, StrainFrame};
use crate::force::{decode_force, ContactForce, ForceDistribution};
use crate::geometry::{integrate_shape, RodShape};

pub const MODEL_MAGIC: &[u8; 4] = b"FBGM";
pub const MODEL_VERSION: u32 = 1;

/// `ŷ·(max − min) + min`.
pub fn rescale_labels(unit: f64, min: f64, max: f64) -> Result<f64> {
    if !(max > min) {
        return Err(Error::invalid(format!("degenerate label range [{min}, {max}]")));
    }
    Ok(unit * (max - min) + min)
}

/// Trained weights of one encoder plus its heads, with everything inference
/// needs: the sensor layout, normalization and label ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub kind: EncoderKind,
    pub layout: SensorLayout,
    pub stats: NormStats,
    pub config: TrainConfig,
    /// Epoch whose weights were kept.
    pub best_epoch: usize,
    pub params: Vec<f64>,
}

/// Everything one forward pass yields for a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub shape: RodShape,
    pub force: ContactForce,
    pub distribution: ForceDistribution,
    /// Raw magnitude head output in `[0, 1]` units.
    pub magnitude_raw: f64,
}

impl ModelParams {
    /// Freshly initialised weights.
    pub fn new(kind: EncoderKind, layout: SensorLayout, stats: NormStats, config: TrainConfig) -> Result<Self> {
        layout.validate()?;
        stats.validate()?;
        ensure_len("normalization channels", layout.node_count, stats.channels())?;
        let net = Network::for_encoder(kind, layout.node_count)?;
        let params = net.init(config.seed);
        Ok(Self {
            kind,
            layout,
            stats,
            config,
            best_epoch: 0,
            params,
        })
    }

    pub fn network(&self) -> Result<Network> {
        Network::for_encoder(self.kind, self.layout.node_count)
    }

    pub fn nodes(&self) -> usize {
        self.layout.node_count
    }

    /// Width of the force range, used to scale grid targets to order one.
    pub(crate) fn force_scale(&self) -> f64 {
        self.stats.force.max[0] - self.stats.force.min[0]
    }

    /// Normalized network input for raw strains.
    pub fn inputs(&self, frames: &[&[f64]]) -> Result<Tensor> {
        let rows: Vec<Vec<f64>> = frames.iter().map(|f| normalize(f, &self.stats)).collect::<Result<_>>()?;
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let mut t = Tensor::from_rows(&refs)?;
        if refs.is_empty() {
            t = Tensor::zeros(&[0, self.nodes()]);
        }
        Ok(t)
    }

    /// Training target row `[κ (M) | φ (M) | f/scale (M) | F]`, all in head units.
    pub fn targets(&self, sample: &Sample) -> Result<Vec<f64>> {
        let m = self.nodes();
        ensure_len("sample nodes", m, sample.node_count())?;
        let mut row = self.stats.curvature.to_unit(&sample.gt_curvatures)?;
        row.extend(self.stats.twist.to_unit(&sample.gt_twists)?);
        let scale = self.force_scale();
        row.extend(sample.gt_distribution.values.iter().map(|v| v / scale));
        row.extend(self.stats.force.to_unit(&[sample.gt_force.magnitude])?);
        Ok(row)
    }

    /// Raw head outputs for a batch of normalized inputs.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.network()?.forward(&self.params, x)?.0)
    }

    fn decode(&self, row: &[f64]) -> Result<Prediction> {
        let m = self.nodes();
        let kappa = self.stats.curvature.from_unit(&row[..m])?;
        let phi = self.stats.twist.from_unit(&row[m..2 * m])?;
        let shape = integrate_shape(&kappa, &phi, self.layout.sample_spacing)?;
        let scale = self.force_scale();
        let distribution = ForceDistribution {
            grid: self.layout.node_grid(),
            values: row[2 * m..3 * m].iter().map(|v| (v * scale).max(0.0)).collect(),
            sigma: self.config.force_sigma,
        };
        let magnitude_raw = row[3 * m];
        let lo = self.stats.force.min[0];
        let force = decode_force(
            &distribution,
            magnitude_raw,
            (lo, lo + scale),
            self.config.force_threshold,
        )?;
        Ok(Prediction {
            shape,
            force,
            distribution,
            magnitude_raw,
        })
    }

    /// Predictions for many frames, evaluated in batches.
    pub fn predict(&self, strains: &[&[f64]]) -> Result<Vec<Prediction>> {
        let net = self.network()?;
        let mut out = Vec::with_capacity(strains.len());
        for chunk in strains.chunks(self.config.batch_size.max(1)) {
            let x = self.inputs(chunk)?;
            let (y, _) = net.forward(&self.params, &x)?;
            for b in 0..y.batch() {
                out.push(self.decode(y.row(b))?);
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = binio::header(MODEL_MAGIC, MODEL_VERSION);
        w.u8(self.kind.code());
        w.u64(self.layout.node_count as u64);
        w.u64(self.params.len() as u64);
        binio::write_layout(&mut w, &self.layout);
        write_stats(&mut w, &self.stats);
        let c = &self.config;
        w.f64(c.adam.learning_rate);
        w.f64(c.adam.beta1);
        w.f64(c.adam.beta2);
        w.f64(c.adam.eps);
        w.f64(c.adam.weight_decay);
        w.u64(c.batch_size as u64);
        w.u64(c.epochs as u64);
        w.u64(c.seed);
        w.f64(c.force_weight);
        w.f64(c.validation_fraction);
        w.f64(c.force_threshold);
        w.f64(c.force_sigma);
        match c.schedule {
            LrSchedule::Constant => w.u8(0),
            LrSchedule::Cosine { floor } => {
                w.u8(1);
                w.f64(floor);
            }
        }
        w.u64(self.best_epoch as u64);
        w.f64s(&self.params);
        w.finish()
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = Reader::open(data, MODEL_MAGIC, MODEL_VERSION)?;
        let kind = EncoderKind::from_code(r.u8()?)?;
        let nodes = r.usize()?;
        let count = r.usize()?;
        let layout = binio::read_layout(&mut r)?;
        let stats = read_stats(&mut r)?;
        let adam = super::AdamConfig {
            learning_rate: r.f64()?,
            beta1: r.f64()?,
            beta2: r.f64()?,
            eps: r.f64()?,
            weight_decay: r.f64()?,
        };
        let config = TrainConfig {
            adam,
            batch_size: r.usize()?,
            epochs: r.usize()?,
            seed: r.u64()?,
            force_weight: r.f64()?,
            validation_fraction: r.f64()?,
            force_threshold: r.f64()?,
            force_sigma: r.f64()?,
            schedule: match r.u8()? {
                0 => LrSchedule::Constant,
                1 => LrSchedule::Cosine { floor: r.f64()? },
                s => return Err(Error::Corrupt(format!("unknown schedule code {s}"))),
            },
        };
        let best_epoch = r.usize()?;
        let params = r.f64s()?;
        r.finish()?;
        if layout.node_count != nodes || stats.channels() != nodes {
            return Err(Error::Corrupt("node count disagrees between header and body".into()));
        }
        let model = Self {
            kind,
            layout,
            stats,
            config,
            best_epoch,
            params,
        };
        let expected = model.network().map_err(|e| Error::Corrupt(e.to_string()))?.param_count();
        if count != expected || model.params.len() != expected {
            return Err(Error::Corrupt(format!(
                "{} weights stored, {expected} expected for {kind}",
                model.params.len()
            )));
        }
        Ok(model)
    }
}

/// Shape and contact force for one strain frame.
pub fn infer(frame: &StrainFrame, model: &ModelParams) -> Result<(RodShape, ContactForce)> {
    frame.validate()?;
    let p = model
        .predict(&[&frame.strains])?
        .pop()
        .expect("one prediction per frame");
    Ok((p.shape, p.force))
}
