//! The longer-text supervisor.
//!
//! A longer text is `k` same-label members drawn from the current batch. Each
//! member's mean-pooled detector embedding is scaled by a gate sampled from a
//! Gumbel-Softmax relaxation of the detector's own class decision, the `k`
//! scaled vectors are concatenated, and a 256-64-2 fully connected network
//! scores the result. Members the detector calls human are gated toward the
//! zero vector, so the supervisor's loss reaches the detector through both
//! the gate and the shared embedding table.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, Gumbel};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{self, bce, Dense, Matrix, Params, PROB_EPS};
use crate::rng::Rng;

pub const LAYER_WIDTHS: [usize; 3] = [256, 64, 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMode {
    /// Gate value is the relaxed class-1 probability.
    Soft,
    /// Forward uses the hard one-hot decision, backward the relaxed gradient.
    StraightThrough,
}

impl fmt::Display for GateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateMode::Soft => "soft",
            GateMode::StraightThrough => "straight_through",
        })
    }
}

impl FromStr for GateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(GateMode::Soft),
            "straight_through" => Ok(GateMode::StraightThrough),
            other => Err(Error::Config(format!("unknown gate mode `{other}`"))),
        }
    }
}

/// Log-odds implied by clipping class probabilities at [`PROB_EPS`].
pub const LOG_ODDS_LIMIT: f64 = 16.11809565095832; // -ln(1e-7)

#[derive(Debug, Clone, PartialEq)]
pub struct GateSample {
    pub probs: [f64; 2],
    pub relaxed: [f64; 2],
    pub hard: [f64; 2],
    pub temperature: f64,
    pub mode: GateMode,
    /// d(relaxed[1]) / d(log-odds), zero where the log-odds are clipped.
    slope: f64,
}

impl GateSample {
    pub fn value(&self) -> f64 {
        match self.mode {
            GateMode::Soft => self.relaxed[1],
            GateMode::StraightThrough => self.hard[1],
        }
    }

    /// Gradient of [`GateSample::value`] with respect to the detector's
    /// logit gap `l1 - l0`.
    pub fn slope(&self) -> f64 {
        self.slope
    }
}

/// One draw of independent standard Gumbel noise per class.
pub fn gumbel_noise(rng: &mut Rng) -> [f64; 2] {
    let g = Gumbel::new(0.0, 1.0).expect("standard gumbel");
    [g.sample(rng), g.sample(rng)]
}

pub fn gumbel_gate(probs: [f64; 2], temperature: f64, mode: GateMode, rng: &mut Rng) -> Result<GateSample> {
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(Error::Input(format!("temperature must be positive, got {temperature}")));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) || probs[0] + probs[1] <= 0.0 {
        return Err(Error::Input(format!("invalid class probabilities {probs:?}")));
    }
    let log_odds = probs[1].max(PROB_EPS).ln() - probs[0].max(PROB_EPS).ln();
    Ok(gate_from_log_odds(log_odds, gumbel_noise(rng), temperature, mode))
}

/// Deterministic gate given the detector's logit gap and pre-drawn noise.
pub fn gate_from_log_odds(log_odds: f64, noise: [f64; 2], temperature: f64, mode: GateMode) -> GateSample {
    let clipped = log_odds.clamp(-LOG_ODDS_LIMIT, LOG_ODDS_LIMIT);
    let active = clipped == log_odds;
    let x = (clipped + noise[1] - noise[0]) / temperature;
    let relaxed = [nn::sigmoid(-x), nn::sigmoid(x)];
    let hard1 = if relaxed[1] >= relaxed[0] { 1.0 } else { 0.0 };
    let p1 = nn::sigmoid(clipped);
    GateSample {
        probs: [1.0 - p1, p1],
        relaxed,
        hard: [1.0 - hard1, hard1],
        temperature,
        mode,
        slope: if active {
            relaxed[0] * relaxed[1] / temperature
        } else {
            0.0
        },
    }
}

/// Draws `k` positions (with replacement) among batch entries labeled
/// `y_long`; `None` when the class is absent from the batch.
pub fn sample_long_indices(labels: &[u8], k: usize, y_long: u8, rng: &mut Rng) -> Option<Vec<usize>> {
    let pool: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(_, &y)| y == y_long)
        .map(|(i, _)| i)
        .collect();
    if pool.is_empty() || k == 0 {
        return None;
    }
    Some((0..k).map(|_| pool[rng.random_range(0..pool.len())]).collect())
}

/// Random choices behind one longer text: its label, its members (batch
/// positions) and the Gumbel noise for each member's gate.
#[derive(Debug, Clone, PartialEq)]
pub struct LongTextPlan {
    pub y_long: u8,
    pub members: Vec<usize>,
    pub noise: Vec<[f64; 2]>,
}

/// Draws up to `n_prime` plans; a plan whose class is missing from the
/// batch is dropped.
pub fn plan_long_texts(labels: &[u8], k: usize, n_prime: usize, rng: &mut Rng) -> Vec<LongTextPlan> {
    let mut plans = Vec::with_capacity(n_prime);
    for _ in 0..n_prime {
        let y_long = u8::from(rng.random_bool(0.5));
        let Some(members) = sample_long_indices(labels, k, y_long, rng) else {
            continue;
        };
        let noise = (0..k).map(|_| gumbel_noise(rng)).collect();
        plans.push(LongTextPlan {
            y_long,
            members,
            noise,
        });
    }
    plans
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongText {
    pub member_ids: Vec<String>,
    pub y_long: u8,
    pub gates: Vec<f64>,
    pub pooled_input: Vec<f64>,
}

impl LongText {
    /// Materializes a plan given the batch's ids, pooled member embeddings
    /// and detector logit gaps.
    pub fn from_plan(
        plan: &LongTextPlan,
        ids: &[String],
        pooled: &[Vec<f64>],
        log_odds: &[f64],
        temperature: f64,
        mode: GateMode,
    ) -> Self {
        let gates: Vec<f64> = plan
            .members
            .iter()
            .zip(&plan.noise)
            .map(|(&m, &noise)| gate_from_log_odds(log_odds[m], noise, temperature, mode).value())
            .collect();
        let mut pooled_input = Vec::new();
        for (&m, &g) in plan.members.iter().zip(&gates) {
            pooled_input.extend(pooled[m].iter().map(|v| g * v));
        }
        LongText {
            member_ids: plan.members.iter().map(|&m| ids[m].clone()).collect(),
            y_long: plan.y_long,
            gates,
            pooled_input,
        }
    }
}

/// Mean-pools each member over its true length, scales by its gate and
/// concatenates in member order.
pub fn assemble_long_input(members: &[Matrix], true_lengths: &[usize], gates: &[f64]) -> Result<Vec<f64>> {
    if members.len() != gates.len() || members.len() != true_lengths.len() {
        return Err(Error::Input(format!(
            "{} members, {} lengths, {} gates",
            members.len(),
            true_lengths.len(),
            gates.len()
        )));
    }
    let Some(first) = members.first() else {
        return Ok(Vec::new());
    };
    let d = first.cols;
    let mut out = Vec::with_capacity(d * members.len());
    for ((m, &len), &g) in members.iter().zip(true_lengths).zip(gates) {
        if m.cols != d {
            return Err(Error::Input(format!("member embedding width {} != {d}", m.cols)));
        }
        out.extend(m.mean_rows(len).into_iter().map(|v| g * v));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisorParams {
    pub input_dim: usize,
    pub layers: [Dense; 3],
}

impl SupervisorParams {
    pub fn init(k: usize, embed_dim: usize, rng: &mut Rng) -> Result<Self> {
        let [w1, w2, _] = LAYER_WIDTHS;
        Self::with_hidden_widths(k, embed_dim, [w1, w2], rng)
    }

    /// Same architecture with narrower hidden layers, for small-scale
    /// numerical checks. Checkpoints only accept the standard widths.
    pub fn with_hidden_widths(k: usize, embed_dim: usize, hidden: [usize; 2], rng: &mut Rng) -> Result<Self> {
        let input_dim = k * embed_dim;
        if input_dim == 0 || hidden.contains(&0) {
            return Err(Error::Config("supervisor widths must be positive".into()));
        }
        let [w1, w2] = hidden;
        let w3 = 2;
        Ok(SupervisorParams {
            input_dim,
            layers: [
                Dense::glorot(input_dim, w1, rng),
                Dense::glorot(w1, w2, rng),
                Dense::glorot(w2, w3, rng),
            ],
        })
    }

    pub fn validate(&self) -> Result<()> {
        let widths: Vec<usize> = self.layers.iter().map(|l| l.outputs).collect();
        if widths != LAYER_WIDTHS {
            return Err(Error::Config(format!("supervisor widths {widths:?}, expected {LAYER_WIDTHS:?}")));
        }
        let mut inputs = self.input_dim;
        for layer in &self.layers {
            if layer.inputs != inputs
                || layer.weight.len() != layer.inputs * layer.outputs
                || layer.bias.len() != layer.outputs
            {
                return Err(Error::Config("supervisor parameter shapes are inconsistent".into()));
            }
            inputs = layer.outputs;
        }
        if !self.all_finite() {
            return Err(Error::Validation("supervisor parameters are not finite".into()));
        }
        Ok(())
    }

    /// Runs the two hidden layers and the output layer from a first-layer
    /// pre-activation.
    fn forward_from_pre(&self, pre1: Vec<f64>) -> Trace {
        let h1: Vec<f64> = pre1.into_iter().map(relu).collect();
        let h2: Vec<f64> = self.layers[1].apply(&h1).into_iter().map(relu).collect();
        let out = self.layers[2].apply(&h2);
        let logits = [out[0], out[1]];
        Trace {
            h1,
            h2,
            probs: nn::softmax2(logits),
        }
    }

    /// Backprop from the logits to the first-layer pre-activation.
    /// Accumulates gradients of layers 2 and 3 into `grad`.
    fn backward_to_pre(&self, trace: &Trace, d_logits: [f64; 2], grad: &mut SupervisorParams) -> Vec<f64> {
        let [_, l2, l3] = &self.layers;
        let [_, g2, g3] = &mut grad.layers;
        let mut d_h2 = vec![0.0; l3.inputs];
        l3.backward(&trace.h2, &d_logits, g3, Some(&mut d_h2));
        relu_mask(&mut d_h2, &trace.h2);
        let mut d_h1 = vec![0.0; l2.inputs];
        l2.backward(&trace.h1, &d_h2, g2, Some(&mut d_h1));
        relu_mask(&mut d_h1, &trace.h1);
        d_h1
    }
}

impl Params for SupervisorParams {
    fn arrays(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.arrays()).collect()
    }

    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.arrays_mut()).collect()
    }
}

struct Trace {
    h1: Vec<f64>,
    h2: Vec<f64>,
    probs: [f64; 2],
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

fn relu_mask(d: &mut [f64], activated: &[f64]) {
    for (d, &a) in d.iter_mut().zip(activated) {
        if a <= 0.0 {
            *d = 0.0;
        }
    }
}

/// Probability that the longer text is machine-generated.
pub fn supervisor_forward(input: &[f64], params: &SupervisorParams) -> Result<f64> {
    if input.len() != params.input_dim {
        return Err(Error::Config(format!(
            "supervisor expects input width {}, got {}",
            params.input_dim,
            input.len()
        )));
    }
    let pre1 = params.layers[0].apply(input);
    Ok(params.forward_from_pre(pre1).probs[1])
}

/// Mean binary cross-entropy over the longer texts.
pub fn supervisor_loss(predictions: &[f64], labels: &[u8]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} predictions but {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Input("supervisor loss over zero longer texts".into()));
    }
    let total: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(&q, &y)| bce(q, f64::from(y)))
        .sum();
    Ok(total / predictions.len() as f64)
}

/// Loss and gradients of the supervisor objective over one batch's longer
/// texts.
#[derive(Debug, Clone)]
pub(crate) struct LongTextPass {
    pub loss: f64,
    pub predictions: Vec<f64>,
    pub grad: SupervisorParams,
    /// Gradient on each batch sample's mean-pooled embedding (embedding path).
    pub d_pooled: Vec<Vec<f64>>,
    /// Gradient on each batch sample's logit gap (gate path).
    pub d_log_odds: Vec<f64>,
}

/// Forward and backward over all plans.
///
/// The first layer is linear in the concatenated input, so its
/// pre-activation is `b + sum_j gate_j * (A_j z_member_j)` where `A_j` is the
/// column block of member slot `j`. The products `A_j z_i` are computed once
/// per batch sample and slot, and the first-layer gradients are accumulated
/// per (slot, sample) before the outer products are formed.
pub(crate) fn long_text_pass(
    plans: &[LongTextPlan],
    pooled: &[Vec<f64>],
    log_odds: &[f64],
    params: &SupervisorParams,
    temperature: f64,
    mode: GateMode,
) -> LongTextPass {
    let batch = pooled.len();
    let d = pooled.first().map_or(0, Vec::len);
    let k = params.input_dim.checked_div(d).unwrap_or(0);
    let first = &params.layers[0];
    let width = first.outputs;

    let mut grad = params.zeros_like();
    let mut d_pooled = vec![vec![0.0; d]; batch];
    let mut d_log_odds = vec![0.0; batch];
    if plans.is_empty() {
        return LongTextPass {
            loss: 0.0,
            predictions: Vec::new(),
            grad,
            d_pooled,
            d_log_odds,
        };
    }

    // slot_products[j * batch + i] = A_j z_i
    let mut used = vec![false; k * batch];
    for plan in plans {
        for (j, &m) in plan.members.iter().enumerate() {
            used[j * batch + m] = true;
        }
    }
    let mut slot_products = vec![Vec::new(); k * batch];
    for j in 0..k {
        for i in 0..batch {
            if !used[j * batch + i] {
                continue;
            }
            slot_products[j * batch + i] = (0..width)
                .map(|r| nn::dot(&first.row(r)[j * d..(j + 1) * d], &pooled[i]))
                .collect();
        }
    }

    let scale = 1.0 / plans.len() as f64;
    let mut loss = 0.0;
    let mut predictions = Vec::with_capacity(plans.len());
    let mut slot_acc = vec![Vec::new(); k * batch];
    for plan in plans {
        let gates: Vec<GateSample> = plan
            .members
            .iter()
            .zip(&plan.noise)
            .map(|(&m, &noise)| gate_from_log_odds(log_odds[m], noise, temperature, mode))
            .collect();

        let mut pre1 = first.bias.clone();
        for (j, (&m, gate)) in plan.members.iter().zip(&gates).enumerate() {
            let g = gate.value();
            if g != 0.0 {
                nn::axpy(&mut pre1, g, &slot_products[j * batch + m]);
            }
        }
        let trace = params.forward_from_pre(pre1);
        let q = trace.probs[1];
        let y = f64::from(plan.y_long);
        loss += bce(q, y) * scale;
        predictions.push(q);

        let gap_grad = nn::bce_grad_logit_gap(q, y) * scale;
        if gap_grad == 0.0 {
            continue;
        }
        let d_pre1 = params.backward_to_pre(&trace, [-gap_grad, gap_grad], &mut grad);
        nn::axpy(&mut grad.layers[0].bias, 1.0, &d_pre1);
        for (j, (&m, gate)) in plan.members.iter().zip(&gates).enumerate() {
            let slot = j * batch + m;
            d_log_odds[m] += nn::dot(&slot_products[slot], &d_pre1) * gate.slope();
            let g = gate.value();
            if g != 0.0 {
                let acc = &mut slot_acc[slot];
                if acc.is_empty() {
                    acc.resize(width, 0.0);
                }
                nn::axpy(acc, g, &d_pre1);
            }
        }
    }

    let g1 = &mut grad.layers[0];
    for j in 0..k {
        for i in 0..batch {
            let acc = &slot_acc[j * batch + i];
            if acc.is_empty() {
                continue;
            }
            for (r, &a) in acc.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let row = r * first.inputs + j * d;
                nn::axpy(&mut g1.weight[row..row + d], a, &pooled[i]);
                nn::axpy(&mut d_pooled[i], a, &first.row(r)[j * d..(j + 1) * d]);
            }
        }
    }

    LongTextPass {
        loss,
        predictions,
        grad,
        d_pooled,
        d_log_odds,
    }
}
