use rand_chacha::ChaCha8Rng;

use super::gemm::gemm;
use super::layers::{sigmoid, uniform_init, Layer};
use super::Tensor;
use crate::error::{Error, Result};

/// One LSTM layer unrolled over a fixed number of steps.
///
/// Input is `batch × steps × input`, output the hidden state at every step,
/// `batch × steps × hidden`. Parameters are `W_x (4H × input)`,
/// `W_h (4H × H)` and one bias `(4H)`, gates ordered input, forget, cell,
/// output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lstm {
    pub input: usize,
    pub hidden: usize,
    pub steps: usize,
}

/// Time-major activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmCache {
    x: Vec<f64>,
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
    batch: usize,
}

impl Lstm {
    fn gate_width(&self) -> usize {
        4 * self.hidden
    }

    fn split<'a>(&self, p: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let g = self.gate_width();
        let (wx, rest) = p.split_at(g * self.input);
        let (wh, b) = rest.split_at(g * self.hidden);
        (wx, wh, b)
    }

    /// `batch × steps × width` ↔ `steps × batch × width`.
    fn swap_major(data: &[f64], outer: usize, inner: usize, width: usize) -> Vec<f64> {
        let mut out = vec![0.0; data.len()];
        for a in 0..outer {
            for b in 0..inner {
                out[(b * outer + a) * width..][..width].copy_from_slice(&data[(a * inner + b) * width..][..width]);
            }
        }
        out
    }
}

impl Layer for Lstm {
    type Cache = LstmCache;

    fn param_count(&self) -> usize {
        self.gate_width() * (self.input + self.hidden + 1)
    }

    fn input_len(&self) -> usize {
        self.steps * self.input
    }

    fn output_shape(&self) -> Vec<usize> {
        vec![self.steps, self.hidden]
    }

    fn init(&self, params: &mut [f64], rng: &mut ChaCha8Rng) {
        uniform_init(params, 1.0 / (self.hidden as f64).sqrt(), rng);
    }

    fn forward(&self, params: &[f64], x: &Tensor) -> Result<(Tensor, LstmCache)> {
        if x.sample_len() != self.input_len() {
            return Err(Error::DimensionMismatch {
                what: "lstm input",
                expected: self.input_len(),
                actual: x.sample_len(),
            });
        }
        crate::error::ensure_len("lstm parameters", self.param_count(), params.len())?;
        let (t_n, b_n, h_n, g_n) = (self.steps, x.batch(), self.hidden, self.gate_width());
        let (wx, wh, bias) = self.split(params);
        let xt = Self::swap_major(x.data(), b_n, t_n, self.input);
        let rows = t_n * b_n;
        let mut gates: Vec<f64> = (0..rows).flat_map(|_| bias.iter().copied()).collect();
        gemm(rows, self.input, g_n, &xt, false, wx, true, 1.0, &mut gates);
        let mut c = vec![0.0; rows * h_n];
        let mut tanh_c = vec![0.0; rows * h_n];
        let mut h = vec![0.0; rows * h_n];
        for t in 0..t_n {
            let (h_done, h_rest) = h.split_at_mut(t * b_n * h_n);
            let z = &mut gates[t * b_n * g_n..][..b_n * g_n];
            if t > 0 {
                gemm(b_n, h_n, g_n, &h_done[(t - 1) * b_n * h_n..], false, wh, true, 1.0, z);
            }
            let h_t = &mut h_rest[..b_n * h_n];
            for b in 0..b_n {
                let zb = &mut z[b * g_n..][..g_n];
                for j in 0..h_n {
                    let i = sigmoid(zb[j]);
                    let f = sigmoid(zb[h_n + j]);
                    let g = zb[2 * h_n + j].tanh();
                    let o = sigmoid(zb[3 * h_n + j]);
                    zb[j] = i;
                    zb[h_n + j] = f;
                    zb[2 * h_n + j] = g;
                    zb[3 * h_n + j] = o;
                    let k = (t * b_n + b) * h_n + j;
                    let c_prev = if t > 0 { c[k - b_n * h_n] } else { 0.0 };
                    c[k] = f * c_prev + i * g;
                    tanh_c[k] = c[k].tanh();
                    h_t[b * h_n + j] = o * tanh_c[k];
                }
            }
        }
        let y = Self::swap_major(&h, t_n, b_n, h_n);
        let cache = LstmCache {
            x: xt,
            gates,
            c,
            tanh_c,
            h,
            batch: b_n,
        };
        Ok((Tensor::new(&[b_n, t_n, h_n], y)?, cache))
    }

    fn backward(&self, params: &[f64], cache: &LstmCache, dy: &Tensor, grad: &mut [f64]) -> Result<Tensor> {
        let (t_n, b_n, h_n, g_n) = (self.steps, cache.batch, self.hidden, self.gate_width());
        if dy.batch() != b_n || dy.sample_len() != t_n * h_n {
            return Err(Error::DimensionMismatch {
                what: "lstm output gradient",
                expected: b_n * t_n * h_n,
                actual: dy.data().len(),
            });
        }
        let (wx, wh, _) = self.split(params);
        let dh_out = Self::swap_major(dy.data(), b_n, t_n, h_n);
        let rows = t_n * b_n;
        let mut dz = vec![0.0; rows * g_n];
        let mut dh_next = vec![0.0; b_n * h_n];
        let mut dc_next = vec![0.0; b_n * h_n];
        for t in (0..t_n).rev() {
            let dzt = &mut dz[t * b_n * g_n..][..b_n * g_n];
            for b in 0..b_n {
                let gb = &cache.gates[(t * b_n + b) * g_n..][..g_n];
                let dzb = &mut dzt[b * g_n..][..g_n];
                for j in 0..h_n {
                    let k = (t * b_n + b) * h_n + j;
                    let (i, f, g, o) = (gb[j], gb[h_n + j], gb[2 * h_n + j], gb[3 * h_n + j]);
                    let tc = cache.tanh_c[k];
                    let c_prev = if t > 0 { cache.c[k - b_n * h_n] } else { 0.0 };
                    let dh = dh_out[k] + dh_next[b * h_n + j];
                    let d_o = dh * tc;
                    let dc = dc_next[b * h_n + j] + dh * o * (1.0 - tc * tc);
                    dc_next[b * h_n + j] = dc * f;
                    dzb[j] = dc * g * i * (1.0 - i);
                    dzb[h_n + j] = dc * c_prev * f * (1.0 - f);
                    dzb[2 * h_n + j] = dc * i * (1.0 - g * g);
                    dzb[3 * h_n + j] = d_o * o * (1.0 - o);
                }
            }
            gemm(b_n, g_n, h_n, dzt, false, wh, false, 0.0, &mut dh_next);
        }
        let (gwx, rest) = grad.split_at_mut(g_n * self.input);
        let (gwh, gb) = rest.split_at_mut(g_n * h_n);
        gemm(g_n, rows, self.input, &dz, true, &cache.x, false, 1.0, gwx);
        if t_n > 1 {
            let later = (t_n - 1) * b_n;
            gemm(g_n, later, h_n, &dz[b_n * g_n..], true, &cache.h[..later * h_n], false, 1.0, gwh);
        }
        for row in dz.chunks_exact(g_n) {
            for (g, d) in gb.iter_mut().zip(row) {
                *g += d;
            }
        }
        let mut dxt = vec![0.0; rows * self.input];
        gemm(rows, g_n, self.input, &dz, false, wx, false, 0.0, &mut dxt);
        let dx = Self::swap_major(&dxt, t_n, b_n, self.input);
        Tensor::new(&[b_n, t_n, self.input], dx)
    }
}
