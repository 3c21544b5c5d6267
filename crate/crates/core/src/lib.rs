//! Detecting machine-generated text with a longer-text supervisor.
//!
//! A token-level detector is trained jointly with a supervisor that sees
//! concatenations of several same-label texts, each gated by a
//! Gumbel-Softmax draw on the detector's own prediction. The supervisor is
//! discarded at inference time; only [`detector::score`] is needed.

pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod detector;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod supervisor;
pub mod theory;
pub mod trainer;

pub use config::RunConfig;
pub use corpus::{Corpus, TextSample, Vocab};
pub use error::{Error, Result};
