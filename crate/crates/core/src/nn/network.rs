use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Conv1d, Dense, Heads, Layer, MaxPool1d, Relu};
use super::lstm::{Lstm, LstmCache};
use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Fc,
    Lstm,
    Conv1d,
}

impl EncoderKind {
    pub const ALL: [EncoderKind; 3] = [EncoderKind::Fc, EncoderKind::Lstm, EncoderKind::Conv1d];

    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::Fc => "fc",
            EncoderKind::Lstm => "lstm",
            EncoderKind::Conv1d => "conv1d",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            EncoderKind::Fc => 0,
            EncoderKind::Lstm => 1,
            EncoderKind::Conv1d => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.code() == code)
            .ok_or_else(|| Error::Corrupt(format!("unknown encoder code {code}")))
    }
}

impl std::fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fc" => Ok(EncoderKind::Fc),
            "lstm" => Ok(EncoderKind::Lstm),
            "conv1d" | "conv" => Ok(EncoderKind::Conv1d),
            other => Err(Error::invalid(format!("unknown encoder '{other}' (fc, lstm, conv1d)"))),
        }
    }
}

pub const FC_HIDDEN: usize = 64;
pub const LSTM_HIDDEN: usize = 64;
pub const LSTM_LAYERS: usize = 3;
pub const CONV_CHANNELS: [usize; 3] = [64, 128, 256];

/// One stage of a [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Dense(Dense),
    Relu(Relu),
    Conv1d(Conv1d),
    MaxPool(MaxPool1d),
    Lstm(Lstm),
    Heads(Heads),
}

#[derive(Debug, Clone)]
pub enum OpCache {
    Dense(Vec<f64>),
    Relu(Vec<f64>),
    Conv1d(Vec<f64>),
    MaxPool(Vec<usize>),
    Lstm(LstmCache),
    Heads((Vec<f64>, Vec<f64>)),
}

macro_rules! dispatch {
    ($op:expr, $l:ident => $body:expr) => {
        match $op {
            Op::Dense($l) => $body,
            Op::Relu($l) => $body,
            Op::Conv1d($l) => $body,
            Op::MaxPool($l) => $body,
            Op::Lstm($l) => $body,
            Op::Heads($l) => $body,
        }
    };
}

impl Op {
    pub fn param_count(&self) -> usize {
        dispatch!(self, l => l.param_count())
    }

    pub fn input_len(&self) -> usize {
        dispatch!(self, l => l.input_len())
    }

    pub fn output_len(&self) -> usize {
        dispatch!(self, l => l.output_len())
    }

    fn init(&self, p: &mut [f64], rng: &mut ChaCha8Rng) {
        dispatch!(self, l => l.init(p, rng))
    }

    fn forward(&self, p: &[f64], x: &Tensor) -> Result<(Tensor, OpCache)> {
        Ok(match self {
            Op::Dense(l) => l.forward(p, x).map(|(y, c)| (y, OpCache::Dense(c)))?,
            Op::Relu(l) => l.forward(p, x).map(|(y, c)| (y, OpCache::Relu(c)))?,
            Op::Conv1d(l) => l.forward(p, x).map(|(y, c)| (y, OpCache::Conv1d(c)))?,
            Op::MaxPool(l) => l.forward(p, x).map(|(y, c)| (y, OpCache::MaxPool(c)))?,
            Op::Lstm(l) => l.forward(p, x).map(|(y, c)| (y, OpCache::Lstm(c)))?,
            Op::Heads(l) => l.forward(p, x).map(|(y, c)| (y, OpCache::Heads(c)))?,
        })
    }

    fn backward(&self, p: &[f64], cache: &OpCache, dy: &Tensor, g: &mut [f64]) -> Result<Tensor> {
        match (self, cache) {
            (Op::Dense(l), OpCache::Dense(c)) => l.backward(p, c, dy, g),
            (Op::Relu(l), OpCache::Relu(c)) => l.backward(p, c, dy, g),
            (Op::Conv1d(l), OpCache::Conv1d(c)) => l.backward(p, c, dy, g),
            (Op::MaxPool(l), OpCache::MaxPool(c)) => l.backward(p, c, dy, g),
            (Op::Lstm(l), OpCache::Lstm(c)) => l.backward(p, c, dy, g),
            (Op::Heads(l), OpCache::Heads(c)) => l.backward(p, c, dy, g),
            _ => Err(Error::invalid("cache does not belong to this layer")),
        }
    }
}

/// A chain of ops sharing one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    ops: Vec<Op>,
    offsets: Vec<usize>,
}

impl Network {
    pub fn new(ops: Vec<Op>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::invalid("network without layers"));
        }
        for w in ops.windows(2) {
            if w[0].output_len() != w[1].input_len() {
                return Err(Error::DimensionMismatch {
                    what: "layer chain",
                    expected: w[0].output_len(),
                    actual: w[1].input_len(),
                });
            }
        }
        let mut offsets = Vec::with_capacity(ops.len() + 1);
        let mut acc = 0;
        for op in &ops {
            offsets.push(acc);
            acc += op.param_count();
        }
        offsets.push(acc);
        Ok(Self { ops, offsets })
    }

    /// Encoder of the given kind for `nodes` strain inputs followed by the
    /// output heads.
    pub fn for_encoder(kind: EncoderKind, nodes: usize) -> Result<Self> {
        let mut ops = encoder_ops(kind, nodes)?;
        let features = ops.last().map_or(nodes, Op::output_len);
        ops.push(Op::Heads(Heads { features, nodes }));
        Self::new(ops)
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    pub fn param_count(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn input_len(&self) -> usize {
        self.ops[0].input_len()
    }

    pub fn output_len(&self) -> usize {
        self.ops.last().unwrap().output_len()
    }

    fn slice<'a>(&self, i: usize, p: &'a [f64]) -> &'a [f64] {
        &p[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn init(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = vec![0.0; self.param_count()];
        for (i, op) in self.ops.iter().enumerate() {
            op.init(&mut p[self.offsets[i]..self.offsets[i + 1]], &mut rng);
        }
        p
    }

    pub fn forward(&self, params: &[f64], x: &Tensor) -> Result<(Tensor, Vec<OpCache>)> {
        crate::error::ensure_len("network parameters", self.param_count(), params.len())?;
        let mut caches = Vec::with_capacity(self.ops.len());
        let mut cur = x.clone();
        for (i, op) in self.ops.iter().enumerate() {
            let (y, c) = op.forward(self.slice(i, params), &cur)?;
            debug_assert!(y.is_finite(), "non-finite activation after layer {i}");
            caches.push(c);
            cur = y;
        }
        Ok((cur.flatten(), caches))
    }

    /// Accumulates parameter gradients into `grad` and returns the input
    /// gradient.
    pub fn backward(&self, params: &[f64], caches: &[OpCache], dy: &Tensor, grad: &mut [f64]) -> Result<Tensor> {
        crate::error::ensure_len("network gradient", self.param_count(), grad.len())?;
        crate::error::ensure_len("layer caches", self.ops.len(), caches.len())?;
        let mut cur = dy.clone();
        for (i, op) in self.ops.iter().enumerate().rev() {
            let g = &mut grad[self.offsets[i]..self.offsets[i + 1]];
            cur = op.backward(self.slice(i, params), &caches[i], &cur, g)?;
        }
        Ok(cur)
    }
}

/// Layers of one encoder; the output is a flat feature vector per sample.
pub fn encoder_ops(kind: EncoderKind, nodes: usize) -> Result<Vec<Op>> {
    if nodes == 0 {
        return Err(Error::invalid("encoder needs at least one input node"));
    }
    Ok(match kind {
        EncoderKind::Fc => vec![
            Op::Dense(Dense::new(nodes, FC_HIDDEN)),
            Op::Relu(Relu::new(&[FC_HIDDEN])),
            Op::Dense(Dense::new(FC_HIDDEN, FC_HIDDEN)),
            Op::Relu(Relu::new(&[FC_HIDDEN])),
        ],
        EncoderKind::Lstm => (0..LSTM_LAYERS)
            .map(|l| {
                Op::Lstm(Lstm {
                    input: if l == 0 { 1 } else { LSTM_HIDDEN },
                    hidden: LSTM_HIDDEN,
                    steps: nodes,
                })
            })
            .collect(),
        EncoderKind::Conv1d => {
            let mut ops = Vec::new();
            let (mut channels, mut length) = (1, nodes);
            for out in CONV_CHANNELS {
                if length < 2 {
                    return Err(Error::invalid(format!("{nodes} nodes are too few for the convolutional encoder")));
                }
                let conv = Conv1d::same(channels, out, length);
                ops.push(Op::Conv1d(conv));
                ops.push(Op::Relu(Relu::new(&[out, length])));
                let pool = MaxPool1d {
                    channels: out,
                    length,
                    size: 2,
                };
                ops.push(Op::MaxPool(pool));
                channels = out;
                length = pool.out_length();
            }
            ops
        }
    })
}
