use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::loss::{joint_loss, LossParts};
use super::model::ModelParams;
use super::network::{EncoderKind, Network};
use super::Tensor;
use crate::dataset::{fit_norm_stats, normalize, split_indices, Corpus};
use crate::error::{Error, Result};

/// Seed offset for the validation hold-out, so it differs from the shuffle.
const VALIDATION_SALT: u64 = 0x7a11_da7e;

/// Learning-rate multiplier over the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    Constant,
    /// Half-cosine from the base rate down to `base · floor` at the last epoch.
    Cosine { floor: f64 },
}

impl LrSchedule {
    /// Multiplier for `epoch` (1-based) of `epochs`.
    pub fn factor(&self, epoch: usize, epochs: usize) -> f64 {
        match *self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Cosine { floor } => {
                let progress = if epochs > 1 { (epoch - 1) as f64 / (epochs - 1) as f64 } else { 0.0 };
                floor + (1.0 - floor) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    #[serde(flatten)]
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Weight of the force terms in the joint objective.
    pub force_weight: f64,
    /// Share of the training scenarios held out to pick the best epoch.
    pub validation_fraction: f64,
    /// Distribution peak (N) below which a prediction decodes as no contact.
    pub force_threshold: f64,
    pub force_sigma: f64,
    pub schedule: LrSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            batch_size: 256,
            epochs: 60,
            seed: 0,
            force_weight: 1.0,
            validation_fraction: 0.1,
            force_threshold: 0.01,
            force_sigma: crate::force::DEFAULT_FORCE_SIGMA,
            schedule: LrSchedule::Cosine { floor: 0.01 },
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.adam;
        if !(a.learning_rate > 0.0 && a.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid("batch size and epochs must be positive"));
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) || !(a.weight_decay >= 0.0) {
            return Err(Error::invalid("optimizer constants out of range"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::invalid("validation fraction must lie in [0, 1)"));
        }
        if let LrSchedule::Cosine { floor } = self.schedule {
            if !(0.0..=1.0).contains(&floor) {
                return Err(Error::invalid("cosine floor must lie in [0, 1]"));
            }
        }
        if !(self.force_weight >= 0.0) || !(self.force_threshold >= 0.0) || !(self.force_sigma > 0.0) {
            return Err(Error::invalid("force weight, threshold and sigma must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train: LossParts,
    /// Joint loss on the hold-out (the training loss when there is none).
    pub validation: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn train_loss(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train.total).collect()
    }

    pub fn validation_loss(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.validation).collect()
    }
}

struct Batches {
    x: Vec<f64>,
    y: Vec<f64>,
    in_w: usize,
    out_w: usize,
}

impl Batches {
    fn gather(&self, idx: &[usize]) -> Result<(Tensor, Vec<f64>)> {
        let mut x = Vec::with_capacity(idx.len() * self.in_w);
        let mut y = Vec::with_capacity(idx.len() * self.out_w);
        for &i in idx {
            x.extend_from_slice(&self.x[i * self.in_w..][..self.in_w]);
            y.extend_from_slice(&self.y[i * self.out_w..][..self.out_w]);
        }
        Ok((Tensor::new(&[idx.len(), self.in_w], x)?, y))
    }
}

fn mean_loss(net: &Network, params: &[f64], data: &Batches, idx: &[usize], batch: usize, nodes: usize, wf: f64) -> Result<LossParts> {
    let mut acc = LossParts::default();
    for chunk in idx.chunks(batch) {
        let (x, y) = data.gather(chunk)?;
        let (out, _) = net.forward(params, &x)?;
        let (p, _) = joint_loss(out.data(), &y, nodes, wf)?;
        let w = chunk.len() as f64 / idx.len() as f64;
        acc.shape += p.shape * w;
        acc.force += p.force * w;
        acc.magnitude += p.magnitude * w;
        acc.total += p.total * w;
    }
    Ok(acc)
}

/// Trains with a no-op progress callback.
pub fn train(corpus: &Corpus, kind: EncoderKind, config: &TrainConfig) -> Result<(ModelParams, TrainHistory)> {
    train_with(corpus, kind, config, |_| {})
}

/// Mini-batch Adam on the joint objective. The corpus is the training
/// split; its statistics are fitted here when absent. Returns the weights of
/// the epoch with the lowest hold-out loss.
pub fn train_with(
    corpus: &Corpus,
    kind: EncoderKind,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(ModelParams, TrainHistory)> {
    config.validate()?;
    if corpus.samples.is_empty() {
        return Err(Error::invalid("cannot train on an empty corpus"));
    }
    let stats = match &corpus.stats {
        Some(s) => s.clone(),
        None => fit_norm_stats(&corpus.samples, corpus.workspace.force_range)?,
    };
    let mut model = ModelParams::new(kind, corpus.layout.clone(), stats, config.clone())?;
    let net = model.network()?;
    let nodes = model.nodes();

    let (mut fit, mut hold) = if config.validation_fraction > 0.0 && corpus.scenario_count() >= 2 {
        split_indices(&corpus.samples, 1.0 - config.validation_fraction, config.seed ^ VALIDATION_SALT)?
    } else {
        ((0..corpus.samples.len()).collect(), Vec::new())
    };
    if fit.is_empty() {
        fit.append(&mut hold);
    }

    let in_w = nodes;
    let out_w = net.output_len();
    let mut data = Batches {
        x: Vec::with_capacity(corpus.samples.len() * in_w),
        y: Vec::with_capacity(corpus.samples.len() * out_w),
        in_w,
        out_w,
    };
    for s in &corpus.samples {
        data.x.extend(normalize(&s.strains, &model.stats)?);
        data.y.extend(model.targets(s)?);
    }

    let wf = config.force_weight;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(net.param_count());
    let mut params = std::mem::take(&mut model.params);
    let mut best = (f64::INFINITY, params.clone(), 0);
    let mut history = TrainHistory::default();
    let mut order = fit.clone();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let adam_cfg = AdamConfig {
            learning_rate: config.adam.learning_rate * config.schedule.factor(epoch, config.epochs),
            ..config.adam
        };
        let mut acc = LossParts::default();
        for chunk in order.chunks(config.batch_size) {
            let (x, y) = data.gather(chunk)?;
            let (out, caches) = net.forward(&params, &x)?;
            let (parts, g) = joint_loss(out.data(), &y, nodes, wf)?;
            if !parts.total.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            let mut grad = vec![0.0; params.len()];
            net.backward(&params, &caches, &Tensor::new(&[chunk.len(), out_w], g)?, &mut grad)?;
            adam.step(&mut params, &grad, &adam_cfg).map_err(|e| match e {
                Error::NonFinite(_) => Error::Diverged { epoch },
                other => other,
            })?;
            let w = chunk.len() as f64 / order.len() as f64;
            acc.shape += parts.shape * w;
            acc.force += parts.force * w;
            acc.magnitude += parts.magnitude * w;
            acc.total += parts.total * w;
        }
        let validation = if hold.is_empty() {
            acc.total
        } else {
            mean_loss(&net, &params, &data, &hold, config.batch_size, nodes, wf)?.total
        };
        if !validation.is_finite() || params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        if validation < best.0 {
            best = (validation, params.clone(), epoch);
        }
        let stats = EpochStats {
            epoch,
            train: acc,
            validation,
        };
        on_epoch(&stats);
        history.epochs.push(stats);
    }
    model.params = best.1;
    model.best_epoch = best.2;
    history.best_epoch = best.2;
    Ok((model, history))
}
