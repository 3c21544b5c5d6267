//! Dense layers with hand-written backward passes, plus the loss helpers
//! shared by the detector and the supervisor.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

/// Probabilities are clipped to `[PROB_EPS, 1 - PROB_EPS]` before logs.
pub const PROB_EPS: f64 = 1e-7;

/// Fully connected layer; `weight` is `outputs x inputs`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weight = (0..inputs * outputs)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        Dense {
            inputs,
            outputs,
            weight,
            bias: vec![0.0; outputs],
        }
    }

    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.inputs);
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weight.chunks_exact(self.inputs).zip(&self.bias))
        {
            *o = b + dot(row, x);
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs];
        self.forward(x, &mut out);
        out
    }

    /// Accumulates parameter gradients into `grad` and, when requested,
    /// writes the input gradient into `d_x`.
    pub fn backward(&self, x: &[f64], d_out: &[f64], grad: &mut Dense, d_x: Option<&mut [f64]>) {
        for ((g_row, gb), &d) in grad
            .weight
            .chunks_exact_mut(self.inputs)
            .zip(grad.bias.iter_mut())
            .zip(d_out)
        {
            if d == 0.0 {
                continue;
            }
            *gb += d;
            axpy(g_row, d, x);
        }
        if let Some(d_x) = d_x {
            d_x.iter_mut().for_each(|v| *v = 0.0);
            for (row, &d) in self.weight.chunks_exact(self.inputs).zip(d_out) {
                if d != 0.0 {
                    axpy(d_x, d, row);
                }
            }
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weight[i * self.inputs..(i + 1) * self.inputs]
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Mean of the first `len` rows; zeros when `len == 0`.
    pub fn mean_rows(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        if len == 0 {
            return out;
        }
        for i in 0..len.min(self.rows) {
            axpy(&mut out, 1.0, self.row(i));
        }
        let inv = 1.0 / len as f64;
        out.iter_mut().for_each(|v| *v *= inv);
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a * x`
pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let z = e0 + e1;
    [e0 / z, e1 / z]
}

pub fn softmax_with_temperature(logits: [f64; 2], temperature: f64) -> [f64; 2] {
    softmax2([logits[0] / temperature, logits[1] / temperature])
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn clip_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Binary cross-entropy of probability `p` against a (possibly soft) target.
pub fn bce(p: f64, target: f64) -> f64 {
    let p = clip_prob(p);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}

/// Derivative of [`bce`] with respect to the logit gap `l1 - l0` when
/// `p = softmax(l)[1]`. Zero where clipping is active.
pub fn bce_grad_logit_gap(p: f64, target: f64) -> f64 {
    if !(PROB_EPS..=1.0 - PROB_EPS).contains(&p) {
        0.0
    } else {
        p - target
    }
}

/// Flat view over a model's parameter arrays.
pub trait Params: Clone {
    fn arrays(&self) -> Vec<&[f64]>;
    fn arrays_mut(&mut self) -> Vec<&mut [f64]>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for a in z.arrays_mut() {
            a.iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }

    fn num_params(&self) -> usize {
        self.arrays().iter().map(|a| a.len()).sum()
    }

    fn coord(&self, mut i: usize) -> f64 {
        for a in self.arrays() {
            if i < a.len() {
                return a[i];
            }
            i -= a.len();
        }
        panic!("parameter index out of range");
    }

    fn set_coord(&mut self, mut i: usize, value: f64) {
        for a in self.arrays_mut() {
            if i < a.len() {
                a[i] = value;
                return;
            }
            i -= a.len();
        }
        panic!("parameter index out of range");
    }

    /// `self += a * other`
    fn add_scaled(&mut self, a: f64, other: &Self) {
        for (dst, src) in self.arrays_mut().into_iter().zip(other.arrays()) {
            axpy(dst, a, src);
        }
    }

    fn all_finite(&self) -> bool {
        self.arrays().iter().all(|a| a.iter().all(|v| v.is_finite()))
    }
}

impl Params for Dense {
    fn arrays(&self) -> Vec<&[f64]> {
        vec![&self.weight, &self.bias]
    }

    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.weight, &mut self.bias]
    }
}
