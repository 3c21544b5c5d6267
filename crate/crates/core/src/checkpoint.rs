//! Checkpoint container.
//!
//! Layout: one header line of JSON carrying the format tag and the SHA-256 of
//! the payload, then the payload itself as compact JSON. Floats are written
//! in shortest round-trip form, so save/load/save is byte-stable.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::corpus::Vocab;
use crate::detector::DetectorParams;
use crate::error::{Error, Result};
use crate::supervisor::SupervisorParams;

pub const FORMAT: &str = "e2h-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub vocab: Vocab,
    pub vocab_hash: String,
    pub detector: DetectorParams,
    /// Absent for plain or distilled detectors.
    pub supervisor: Option<SupervisorParams>,
}

impl Checkpoint {
    pub fn new(
        config: RunConfig,
        vocab: Vocab,
        detector: DetectorParams,
        supervisor: Option<SupervisorParams>,
    ) -> Self {
        Checkpoint {
            vocab_hash: vocab.hash(),
            config,
            vocab,
            detector,
            supervisor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        self.detector.check_vocab(&self.vocab)?;
        if self.vocab.hash() != self.vocab_hash {
            return Err(Error::Integrity("vocabulary hash mismatch".into()));
        }
        if self.detector.embed_dim != self.config.embed_dim || self.detector.hidden_dim != self.config.hidden_dim {
            return Err(Error::Config(format!(
                "detector is {}x{} but config says embed_dim {} hidden_dim {}",
                self.detector.embed_dim, self.detector.hidden_dim, self.config.embed_dim, self.config.hidden_dim
            )));
        }
        if let Some(sup) = &self.supervisor {
            sup.validate()?;
            if sup.input_dim != self.config.k * self.config.embed_dim {
                return Err(Error::Config(format!(
                    "supervisor input width {} != k * embed_dim = {}",
                    sup.input_dim,
                    self.config.k * self.config.embed_dim
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    sha256: String,
}

pub fn to_bytes(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let payload = serde_json::to_vec(ckpt)?;
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        sha256: hex::encode(Sha256::digest(&payload)),
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    out.extend_from_slice(&payload);
    out.push(b'\n');
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Integrity("missing header line".into()))?;
    let header: Header = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| Error::Integrity(format!("unreadable header: {e}")))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(Error::Integrity(format!(
            "unsupported container {} v{}",
            header.format, header.version
        )));
    }
    let mut payload = &bytes[newline + 1..];
    if payload.last() == Some(&b'\n') {
        payload = &payload[..payload.len() - 1];
    }
    if hex::encode(Sha256::digest(payload)) != header.sha256 {
        return Err(Error::Integrity("checksum mismatch".into()));
    }
    let mut ckpt: Checkpoint =
        serde_json::from_slice(payload).map_err(|e| Error::Integrity(format!("unreadable payload: {e}")))?;
    ckpt.vocab.rebuild_index();
    ckpt.validate()?;
    Ok(ckpt)
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(ckpt)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
