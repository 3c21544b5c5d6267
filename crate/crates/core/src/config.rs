//! Run configuration and its flat `key = value` file format.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::supervisor::GateMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Member texts per longer text.
    pub k: usize,
    /// Longer texts drawn per batch.
    pub n_prime: usize,
    /// Weight of the supervisor loss; 0 trains the plain detector.
    pub lambda: f64,
    pub tau: f64,
    pub gate_mode: GateMode,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub smoothing: f64,
    pub max_len: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub stop_embedding_gradient: bool,
    pub kd_temperature: f64,
    pub kd_alpha: f64,
    pub train_frac: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: 3,
            n_prime: 128,
            lambda: 10.0,
            tau: 1.0,
            gate_mode: GateMode::StraightThrough,
            batch_size: 32,
            epochs: 5,
            learning_rate: 1e-2,
            seed: 1,
            smoothing: 0.0,
            max_len: 64,
            embed_dim: 16,
            hidden_dim: 32,
            stop_embedding_gradient: false,
            kd_temperature: 2.0,
            kd_alpha: 0.5,
            train_frac: 0.1,
        }
    }
}

pub const KEYS: &[&str] = &[
    "k",
    "n_prime",
    "lambda",
    "tau",
    "gate_mode",
    "batch_size",
    "epochs",
    "learning_rate",
    "seed",
    "smoothing",
    "max_len",
    "embed_dim",
    "hidden_dim",
    "stop_embedding_gradient",
    "kd_temperature",
    "kd_alpha",
    "train_frac",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "k" => self.k = parse(key, value)?,
            "n_prime" => self.n_prime = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "gate_mode" => self.gate_mode = value.parse()?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "smoothing" => self.smoothing = parse(key, value)?,
            "max_len" => self.max_len = parse(key, value)?,
            "embed_dim" => self.embed_dim = parse(key, value)?,
            "hidden_dim" => self.hidden_dim = parse(key, value)?,
            "stop_embedding_gradient" => self.stop_embedding_gradient = parse(key, value)?,
            "kd_temperature" => self.kd_temperature = parse(key, value)?,
            "kd_alpha" => self.kd_alpha = parse(key, value)?,
            "train_frac" => self.train_frac = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a `KEY=VALUE` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not KEY=VALUE")))?;
        self.set(key, value)
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("k", self.k.to_string());
        line("n_prime", self.n_prime.to_string());
        line("lambda", self.lambda.to_string());
        line("tau", self.tau.to_string());
        line("gate_mode", self.gate_mode.to_string());
        line("batch_size", self.batch_size.to_string());
        line("epochs", self.epochs.to_string());
        line("learning_rate", self.learning_rate.to_string());
        line("seed", self.seed.to_string());
        line("smoothing", self.smoothing.to_string());
        line("max_len", self.max_len.to_string());
        line("embed_dim", self.embed_dim.to_string());
        line("hidden_dim", self.hidden_dim.to_string());
        line("stop_embedding_gradient", self.stop_embedding_gradient.to_string());
        line("kd_temperature", self.kd_temperature.to_string());
        line("kd_alpha", self.kd_alpha.to_string());
        line("train_frac", self.train_frac.to_string());
        s
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.k < 1 {
            return fail("k must be at least 1".into());
        }
        if self.n_prime < 1 {
            return fail("n_prime must be at least 1".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda must be finite and nonnegative, got {}", self.lambda));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return fail(format!("tau must be positive, got {}", self.tau));
        }
        if self.batch_size < 1 {
            return fail("batch_size must be at least 1".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be nonnegative, got {}", self.learning_rate));
        }
        if !(0.0..0.5).contains(&self.smoothing) {
            return fail(format!("smoothing must lie in [0, 0.5), got {}", self.smoothing));
        }
        if self.max_len < 1 || self.embed_dim < 1 || self.hidden_dim < 1 {
            return fail("max_len, embed_dim and hidden_dim must be positive".into());
        }
        if self.kd_temperature.is_nan() || self.kd_temperature <= 0.0 {
            return fail(format!("kd_temperature must be positive, got {}", self.kd_temperature));
        }
        if !(0.0..=1.0).contains(&self.kd_alpha) {
            return fail(format!("kd_alpha must lie in [0,1], got {}", self.kd_alpha));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return fail(format!("train_frac must lie in (0,1), got {}", self.train_frac));
        }
        Ok(())
    }
}
