//! Differentiable layers operating on `batch × …` tensors with parameters
//! held in caller-owned flat slices.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::gemm::gemm;
use super::Tensor;
use crate::error::{Error, Result};

/// A layer with explicit forward/backward passes. Parameters live in a flat
/// slice of length [`Layer::param_count`]; `backward` accumulates into a
/// gradient slice of the same length and returns the input gradient.
pub trait Layer {
    type Cache;

    fn param_count(&self) -> usize;
    /// Values per sample consumed.
    fn input_len(&self) -> usize;
    /// Per-sample output shape.
    fn output_shape(&self) -> Vec<usize>;
    fn init(&self, params: &mut [f64], rng: &mut ChaCha8Rng);
    fn forward(&self, params: &[f64], x: &Tensor) -> Result<(Tensor, Self::Cache)>;
    fn backward(&self, params: &[f64], cache: &Self::Cache, dy: &Tensor, grad: &mut [f64]) -> Result<Tensor>;

    fn output_len(&self) -> usize {
        self.output_shape().iter().product()
    }
}

fn check_input(what: &'static str, expected: usize, x: &Tensor) -> Result<()> {
    if x.sample_len() != expected {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            actual: x.sample_len(),
        });
    }
    Ok(())
}

fn check_params(expected: usize, params: &[f64]) -> Result<()> {
    crate::error::ensure_len("layer parameters", expected, params.len())
}

fn shaped(batch: usize, per_sample: &[usize], data: Vec<f64>) -> Result<Tensor> {
    let mut shape = vec![batch];
    shape.extend_from_slice(per_sample);
    Tensor::new(&shape, data)
}

pub(crate) fn uniform_init(values: &mut [f64], bound: f64, rng: &mut ChaCha8Rng) {
    for v in values {
        *v = rng.gen_range(-bound..bound);
    }
}

/// Fully connected layer `y = W·x + b` with `W` stored `output × input`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dense {
    pub input: usize,
    pub output: usize,
}

impl Dense {
    pub fn new(input: usize, output: usize) -> Self {
        Self { input, output }
    }

    fn split<'a>(&self, p: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        p.split_at(self.input * self.output)
    }
}

impl Layer for Dense {
    type Cache = Vec<f64>;

    fn param_count(&self) -> usize {
        self.output * (self.input + 1)
    }

    fn input_len(&self) -> usize {
        self.input
    }

    fn output_shape(&self) -> Vec<usize> {
        vec![self.output]
    }

    fn init(&self, params: &mut [f64], rng: &mut ChaCha8Rng) {
        uniform_init(params, 1.0 / (self.input as f64).sqrt(), rng);
    }

    fn forward(&self, params: &[f64], x: &Tensor) -> Result<(Tensor, Vec<f64>)> {
        check_input("dense input", self.input, x)?;
        check_params(self.param_count(), params)?;
        let batch = x.batch();
        let (w, b) = self.split(params);
        let mut y: Vec<f64> = (0..batch).flat_map(|_| b.iter().copied()).collect();
        gemm(batch, self.input, self.output, x.data(), false, w, true, 1.0, &mut y);
        Ok((shaped(batch, &[self.output], y)?, x.data().to_vec()))
    }

    fn backward(&self, params: &[f64], x: &Vec<f64>, dy: &Tensor, grad: &mut [f64]) -> Result<Tensor> {
        check_input("dense output gradient", self.output, dy)?;
        let batch = dy.batch();
        let (w, _) = self.split(params);
        let (gw, gb) = grad.split_at_mut(self.input * self.output);
        gemm(self.output, batch, self.input, dy.data(), true, x, false, 1.0, gw);
        for row in dy.data().chunks_exact(self.output) {
            for (g, d) in gb.iter_mut().zip(row) {
                *g += d;
            }
        }
        let mut dx = vec![0.0; batch * self.input];
        gemm(batch, self.output, self.input, dy.data(), false, w, false, 0.0, &mut dx);
        shaped(batch, &[self.input], dx)
    }
}

/// Element-wise `max(x, 0)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relu {
    pub shape: Vec<usize>,
}

impl Relu {
    pub fn new(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec() }
    }
}

impl Layer for Relu {
    type Cache = Vec<f64>;

    fn param_count(&self) -> usize {
        0
    }

    fn input_len(&self) -> usize {
        self.shape.iter().product()
    }

    fn output_shape(&self) -> Vec<usize> {
        self.shape.clone()
    }

    fn init(&self, _: &mut [f64], _: &mut ChaCha8Rng) {}

    fn forward(&self, _: &[f64], x: &Tensor) -> Result<(Tensor, Vec<f64>)> {
        check_input("relu input", self.input_len(), x)?;
        let y: Vec<f64> = x.data().iter().map(|&v| v.max(0.0)).collect();
        Ok((shaped(x.batch(), &self.shape, y.clone())?, y))
    }

    fn backward(&self, _: &[f64], y: &Vec<f64>, dy: &Tensor, _: &mut [f64]) -> Result<Tensor> {
        check_input("relu output gradient", self.input_len(), dy)?;
        let dx = dy
            .data()
            .iter()
            .zip(y)
            .map(|(d, &v)| if v > 0.0 { *d } else { 0.0 })
            .collect();
        shaped(dy.batch(), &self.shape, dx)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Element-wise logistic function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sigmoid {
    pub len: usize,
}

impl Layer for Sigmoid {
    type Cache = Vec<f64>;

    fn param_count(&self) -> usize {
        0
    }

    fn input_len(&self) -> usize {
        self.len
    }

    fn output_shape(&self) -> Vec<usize> {
        vec![self.len]
    }

    fn init(&self, _: &mut [f64], _: &mut ChaCha8Rng) {}

    fn forward(&self, _: &[f64], x: &Tensor) -> Result<(Tensor, Vec<f64>)> {
        check_input("sigmoid input", self.len, x)?;
        let y: Vec<f64> = x.data().iter().map(|&v| sigmoid(v)).collect();
        Ok((shaped(x.batch(), &[self.len], y.clone())?, y))
    }

    fn backward(&self, _: &[f64], y: &Vec<f64>, dy: &Tensor, _: &mut [f64]) -> Result<Tensor> {
        check_input("sigmoid output gradient", self.len, dy)?;
        let dx = dy.data().iter().zip(y).map(|(d, s)| d * s * (1.0 - s)).collect();
        shaped(dy.batch(), &[self.len], dx)
    }
}

/// Stride-1 1-D convolution over `channels × length` samples with zero
/// padding. Weights are stored `out × (in · kernel)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub length: usize,
    pub kernel: usize,
    pub padding: usize,
}

impl Conv1d {
    /// Kernel 3 with padding 1, which preserves the length.
    pub fn same(in_channels: usize, out_channels: usize, length: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            length,
            kernel: 3,
            padding: 1,
        }
    }

    pub fn out_length(&self) -> usize {
        (self.length + 2 * self.padding + 1).saturating_sub(self.kernel)
    }

    fn rows(&self) -> usize {
        self.in_channels * self.kernel
    }

    /// Input position feeding output `l` through tap `k`, if inside the signal.
    fn tap(&self, l: usize, k: usize) -> Option<usize> {
        (l + k).checked_sub(self.padding).filter(|&i| i < self.length)
    }

    /// `(in·kernel) × (batch·out_len)` patch matrix.
    fn im2col(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let (len, out) = (self.length, self.out_length());
        let cols = batch * out;
        let mut col = vec![0.0; self.rows() * cols];
        for c in 0..self.in_channels {
            for k in 0..self.kernel {
                let row = &mut col[(c * self.kernel + k) * cols..][..cols];
                for b in 0..batch {
                    let src = &x[(b * self.in_channels + c) * len..][..len];
                    for l in 0..out {
                        if let Some(i) = self.tap(l, k) {
                            row[b * out + l] = src[i];
                        }
                    }
                }
            }
        }
        col
    }
}

impl Layer for Conv1d {
    type Cache = Vec<f64>;

    fn param_count(&self) -> usize {
        self.out_channels * (self.rows() + 1)
    }

    fn input_len(&self) -> usize {
        self.in_channels * self.length
    }

    fn output_shape(&self) -> Vec<usize> {
        vec![self.out_channels, self.out_length()]
    }

    fn init(&self, params: &mut [f64], rng: &mut ChaCha8Rng) {
        uniform_init(params, 1.0 / (self.rows() as f64).sqrt(), rng);
    }

    fn forward(&self, params: &[f64], x: &Tensor) -> Result<(Tensor, Vec<f64>)> {
        check_input("conv input", self.input_len(), x)?;
        check_params(self.param_count(), params)?;
        if self.out_length() == 0 {
            return Err(Error::invalid("convolution kernel longer than the padded input"));
        }
        let batch = x.batch();
        let out = self.out_length();
        let cols = batch * out;
        let (w, bias) = params.split_at(self.out_channels * self.rows());
        let col = self.im2col(x.data(), batch);
        let mut ycm: Vec<f64> = bias.iter().flat_map(|&b| std::iter::repeat(b).take(cols)).collect();
        gemm(self.out_channels, self.rows(), cols, w, false, &col, false, 1.0, &mut ycm);
        // channel-major → sample-major
        let mut y = vec![0.0; batch * self.out_channels * out];
        for o in 0..self.out_channels {
            for b in 0..batch {
                y[(b * self.out_channels + o) * out..][..out].copy_from_slice(&ycm[o * cols + b * out..][..out]);
            }
        }
        Ok((shaped(batch, &[self.out_channels, out], y)?, col))
    }

    fn backward(&self, params: &[f64], col: &Vec<f64>, dy: &Tensor, grad: &mut [f64]) -> Result<Tensor> {
        check_input("conv output gradient", self.output_len(), dy)?;
        let batch = dy.batch();
        let (len, out) = (self.length, self.out_length());
        let cols = batch * out;
        let mut dycm = vec![0.0; self.out_channels * cols];
        for o in 0..self.out_channels {
            for b in 0..batch {
                dycm[o * cols + b * out..][..out].copy_from_slice(&dy.data()[(b * self.out_channels + o) * out..][..out]);
            }
        }
        let (w, _) = params.split_at(self.out_channels * self.rows());
        let (gw, gb) = grad.split_at_mut(self.out_channels * self.rows());
        gemm(self.out_channels, cols, self.rows(), &dycm, false, col, true, 1.0, gw);
        for (g, row) in gb.iter_mut().zip(dycm.chunks_exact(cols)) {
            *g += row.iter().sum::<f64>();
        }
        let mut dcol = vec![0.0; self.rows() * cols];
        gemm(self.rows(), self.out_channels, cols, w, true, &dycm, false, 0.0, &mut dcol);
        let mut dx = vec![0.0; batch * self.input_len()];
        for c in 0..self.in_channels {
            for k in 0..self.kernel {
                let row = &dcol[(c * self.kernel + k) * cols..][..cols];
                for b in 0..batch {
                    let dst = &mut dx[(b * self.in_channels + c) * len..][..len];
                    for l in 0..out {
                        if let Some(i) = self.tap(l, k) {
                            dst[i] += row[b * out + l];
                        }
                    }
                }
            }
        }
        shaped(batch, &[self.in_channels, len], dx)
    }
}

/// Non-overlapping max pooling along the length axis. A trailing remainder
/// shorter than the window is dropped; ties go to the first position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxPool1d {
    pub channels: usize,
    pub length: usize,
    pub size: usize,
}

impl MaxPool1d {
    pub fn out_length(&self) -> usize {
        self.length / self.size
    }
}

impl Layer for MaxPool1d {
    /// Flat input index of every output's maximum.
    type Cache = Vec<usize>;

    fn param_count(&self) -> usize {
        0
    }

    fn input_len(&self) -> usize {
        self.channels * self.length
    }

    fn output_shape(&self) -> Vec<usize> {
        vec![self.channels, self.out_length()]
    }

    fn init(&self, _: &mut [f64], _: &mut ChaCha8Rng) {}

    fn forward(&self, _: &[f64], x: &Tensor) -> Result<(Tensor, Vec<usize>)> {
        check_input("pool input", self.input_len(), x)?;
        if self.size == 0 || self.out_length() == 0 {
            return Err(Error::invalid("pooling window larger than the input"));
        }
        let batch = x.batch();
        let out = self.out_length();
        let mut y = Vec::with_capacity(batch * self.channels * out);
        let mut arg = Vec::with_capacity(y.capacity());
        for r in 0..batch * self.channels {
            for j in 0..out {
                let start = r * self.length + j * self.size;
                let mut best = start;
                for i in start + 1..start + self.size {
                    if x.data()[i] > x.data()[best] {
                        best = i;
                    }
                }
                y.push(x.data()[best]);
                arg.push(best);
            }
        }
        Ok((shaped(batch, &[self.channels, out], y)?, arg))
    }

    fn backward(&self, _: &[f64], arg: &Vec<usize>, dy: &Tensor, _: &mut [f64]) -> Result<Tensor> {
        check_input("pool output gradient", self.output_len(), dy)?;
        let mut dx = vec![0.0; dy.batch() * self.input_len()];
        for (&i, d) in arg.iter().zip(dy.data()) {
            dx[i] += d;
        }
        shaped(dy.batch(), &[self.channels, self.length], dx)
    }
}

/// The four output heads stacked in one affine map: `M` curvatures and `M`
/// twists (sigmoid), `M` force-grid values and one force magnitude (linear).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Heads {
    pub features: usize,
    pub nodes: usize,
}

impl Heads {
    pub fn dense(&self) -> Dense {
        Dense::new(self.features, 3 * self.nodes + 1)
    }
}

impl Layer for Heads {
    type Cache = (Vec<f64>, Vec<f64>);

    fn param_count(&self) -> usize {
        self.dense().param_count()
    }

    fn input_len(&self) -> usize {
        self.features
    }

    fn output_shape(&self) -> Vec<usize> {
        vec![3 * self.nodes + 1]
    }

    fn init(&self, params: &mut [f64], rng: &mut ChaCha8Rng) {
        self.dense().init(params, rng)
    }

    fn forward(&self, params: &[f64], x: &Tensor) -> Result<(Tensor, Self::Cache)> {
        let (mut y, xc) = self.dense().forward(params, x)?;
        let width = 3 * self.nodes + 1;
        for row in y.data_mut().chunks_exact_mut(width) {
            for v in &mut row[..2 * self.nodes] {
                *v = sigmoid(*v);
            }
        }
        let out = y.data().to_vec();
        Ok((y, (xc, out)))
    }

    fn backward(&self, params: &[f64], cache: &Self::Cache, dy: &Tensor, grad: &mut [f64]) -> Result<Tensor> {
        check_input("head output gradient", 3 * self.nodes + 1, dy)?;
        let (x, y) = cache;
        let width = 3 * self.nodes + 1;
        let mut dz = dy.clone();
        for (drow, yrow) in dz.data_mut().chunks_exact_mut(width).zip(y.chunks_exact(width)) {
            for (d, s) in drow[..2 * self.nodes].iter_mut().zip(yrow) {
                *d *= s * (1.0 - s);
            }
        }
        self.dense().backward(params, x, &dz, grad)
    }
}
