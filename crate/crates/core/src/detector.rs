//! Reference detector: mean-pooled bag of token embeddings, one tanh hidden
//! layer and a two-way output. Exposes its embedding table so the supervisor
//! can read member embeddings through the same layer.

use serde::{Deserialize, Serialize};

use crate::corpus::{TokenSeq, Vocab};
use crate::error::{Error, Result};
use crate::nn::{self, bce, Dense, Matrix, Params};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    /// `vocab_size x embed_dim`, row-major.
    pub embedding: Vec<f64>,
    pub hidden: Dense,
    pub output: Dense,
}

impl DetectorParams {
    pub fn init(vocab_size: usize, embed_dim: usize, hidden_dim: usize, rng: &mut Rng) -> Result<Self> {
        if vocab_size < 2 || embed_dim == 0 || hidden_dim == 0 {
            return Err(Error::Config(format!(
                "detector dimensions must be positive (vocab {vocab_size}, d {embed_dim}, H {hidden_dim})"
            )));
        }
        let table = Dense::glorot(embed_dim, vocab_size, rng);
        let mut embedding = table.weight;
        // padding row stays zero
        embedding[..embed_dim].iter_mut().for_each(|v| *v = 0.0);
        Ok(DetectorParams {
            vocab_size,
            embed_dim,
            hidden_dim,
            embedding,
            hidden: Dense::glorot(embed_dim, hidden_dim, rng),
            output: Dense::glorot(hidden_dim, 2, rng),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let shapes_ok = self.embedding.len() == self.vocab_size * self.embed_dim
            && self.hidden.inputs == self.embed_dim
            && self.hidden.outputs == self.hidden_dim
            && self.hidden.weight.len() == self.embed_dim * self.hidden_dim
            && self.hidden.bias.len() == self.hidden_dim
            && self.output.inputs == self.hidden_dim
            && self.output.outputs == 2
            && self.output.weight.len() == 2 * self.hidden_dim
            && self.output.bias.len() == 2;
        if !shapes_ok {
            return Err(Error::Config("detector parameter shapes are inconsistent".into()));
        }
        if !self.all_finite() {
            return Err(Error::Validation("detector parameters are not finite".into()));
        }
        Ok(())
    }

    pub fn embedding_row(&self, id: u32) -> &[f64] {
        let i = id as usize * self.embed_dim;
        &self.embedding[i..i + self.embed_dim]
    }

    fn embedding_row_mut(&mut self, id: u32) -> &mut [f64] {
        let i = id as usize * self.embed_dim;
        &mut self.embedding[i..i + self.embed_dim]
    }

    pub fn check_vocab(&self, vocab: &Vocab) -> Result<()> {
        if vocab.len() != self.vocab_size {
            return Err(Error::Config(format!(
                "vocabulary has {} entries but detector expects {}",
                vocab.len(),
                self.vocab_size
            )));
        }
        Ok(())
    }
}

impl Params for DetectorParams {
    fn arrays(&self) -> Vec<&[f64]> {
        vec![
            &self.embedding,
            &self.hidden.weight,
            &self.hidden.bias,
            &self.output.weight,
            &self.output.bias,
        ]
    }

    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.embedding,
            &mut self.hidden.weight,
            &mut self.hidden.bias,
            &mut self.output.weight,
            &mut self.output.bias,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorOutput {
    /// Probability of the machine-generated class.
    pub score: f64,
    pub logits: [f64; 2],
    pub token_embeddings: Matrix,
}

/// Token embedding matrix; rows past the true length are zero.
pub fn embed(tokens: &TokenSeq, params: &DetectorParams) -> Result<Matrix> {
    let mut out = Matrix::zeros(tokens.ids.len(), params.embed_dim);
    for (i, &id) in tokens.ids.iter().enumerate() {
        if id as usize >= params.vocab_size {
            return Err(Error::Lookup {
                id,
                vocab_size: params.vocab_size,
            });
        }
        if i < tokens.len {
            out.row_mut(i).copy_from_slice(params.embedding_row(id));
        }
    }
    Ok(out)
}

pub fn score(tokens: &TokenSeq, params: &DetectorParams) -> Result<DetectorOutput> {
    if tokens.len == 0 {
        return Err(Error::Input("cannot score an empty token sequence".into()));
    }
    let token_embeddings = embed(tokens, params)?;
    let pooled = token_embeddings.mean_rows(tokens.len);
    let head = Head::forward(params, pooled);
    Ok(DetectorOutput {
        score: head.probs[1],
        logits: head.logits,
        token_embeddings,
    })
}

/// 1 iff the MGT probability is at least one half.
pub fn predict_class(output: &DetectorOutput) -> u8 {
    u8::from(output.score >= 0.5)
}

/// Mean binary cross-entropy with optional label smoothing.
pub fn original_loss(scores: &[f64], labels: &[u8], smoothing: f64) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::Input("loss over an empty batch".into()));
    }
    if !(0.0..0.5).contains(&smoothing) {
        return Err(Error::Input(format!("smoothing must lie in [0, 0.5), got {smoothing}")));
    }
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&p, &y)| bce(p, smoothed_target(y, smoothing)))
        .sum();
    Ok(total / scores.len() as f64)
}

pub fn smoothed_target(label: u8, smoothing: f64) -> f64 {
    let y = f64::from(label);
    y * (1.0 - smoothing) + (1.0 - y) * smoothing
}

/// Cached forward pass through the pooled head, kept for backprop.
#[derive(Debug, Clone)]
pub(crate) struct Head {
    pub pooled: Vec<f64>,
    pub hidden: Vec<f64>,
    pub logits: [f64; 2],
    pub probs: [f64; 2],
}

impl Head {
    pub fn forward(params: &DetectorParams, pooled: Vec<f64>) -> Self {
        let mut hidden = params.hidden.apply(&pooled);
        hidden.iter_mut().for_each(|v| *v = v.tanh());
        let out = params.output.apply(&hidden);
        let logits = [out[0], out[1]];
        Head {
            pooled,
            hidden,
            logits,
            probs: nn::softmax2(logits),
        }
    }

    /// Same arithmetic as [`score`] without materializing the token matrix.
    pub fn for_tokens(params: &DetectorParams, tokens: &TokenSeq) -> Self {
        let mut pooled = vec![0.0; params.embed_dim];
        for &id in &tokens.ids[..tokens.len] {
            nn::axpy(&mut pooled, 1.0, params.embedding_row(id));
        }
        if tokens.len > 0 {
            let inv = 1.0 / tokens.len as f64;
            pooled.iter_mut().for_each(|v| *v *= inv);
        }
        Self::forward(params, pooled)
    }

    /// Accumulates into `grad` the gradient given upstream gradients on the
    /// logits and (optionally) directly on the pooled embedding.
    pub fn backward(
        &self,
        params: &DetectorParams,
        tokens: &TokenSeq,
        d_logits: [f64; 2],
        d_pooled_extra: Option<&[f64]>,
        grad: &mut DetectorParams,
    ) {
        let mut d_hidden = vec![0.0; params.hidden_dim];
        params
            .output
            .backward(&self.hidden, &d_logits, &mut grad.output, Some(&mut d_hidden));
        for (d, h) in d_hidden.iter_mut().zip(&self.hidden) {
            *d *= 1.0 - h * h;
        }
        let mut d_pooled = vec![0.0; params.embed_dim];
        params
            .hidden
            .backward(&self.pooled, &d_hidden, &mut grad.hidden, Some(&mut d_pooled));
        if let Some(extra) = d_pooled_extra {
            nn::axpy(&mut d_pooled, 1.0, extra);
        }
        accumulate_embedding_grad(tokens, &d_pooled, grad);
    }
}

/// Spreads a gradient on the mean-pooled embedding back over the tokens.
pub(crate) fn accumulate_embedding_grad(tokens: &TokenSeq, d_pooled: &[f64], grad: &mut DetectorParams) {
    if tokens.len == 0 {
        return;
    }
    let inv = 1.0 / tokens.len as f64;
    for &id in &tokens.ids[..tokens.len] {
        nn::axpy(grad.embedding_row_mut(id), inv, d_pooled);
    }
}
