//! Model container. Layout (all integers little-endian):
//!
//! | bytes        | content                                   |
//! |--------------|-------------------------------------------|
//! | 8            | magic `VSMODEL\0`                          |
//! | 4            | format version (`u32`)                    |
//! | 8            | header length `H` (`u64`)                 |
//! | H            | UTF-8 JSON header                         |
//! | 8 × n_params | parameters as `f64`                       |
//! | 32           | SHA-256 of every preceding byte           |
//!
//! The header holds the architecture, vocabularies, lexicon, scaler,
//! threshold, training history, producer string and `n_params`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ModelConfig, TrainedModel};
use crate::error::{Error, Result};
use crate::features::{Featurizer, StatsScaler};
use crate::io::{atomic_write, read_bytes};
use crate::nn::TrainHistory;

pub const FORMAT_MAGIC: &[u8; 8] = b"VSMODEL\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    featurizer: Featurizer,
    scaler: StatsScaler,
    threshold: f64,
    history: TrainHistory,
    producer: String,
    n_params: usize,
}

pub fn to_bytes(m: &TrainedModel) -> Result<Vec<u8>> {
    let header = Header {
        config: m.config.clone(),
        featurizer: m.featurizer.clone(),
        scaler: m.scaler.clone(),
        threshold: m.threshold,
        history: m.history.clone(),
        producer: m.producer.clone(),
        n_params: m.params.len(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::ModelFormat(e.to_string()))?;
    let mut out = Vec::with_capacity(20 + json.len() + 8 * m.params.len() + 32);
    out.extend_from_slice(FORMAT_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for p in &m.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<TrainedModel> {
    let fail = |m: &str| Error::ModelFormat(m.to_string());
    if bytes.len() < 20 + 32 {
        return Err(fail("file too short"));
    }
    if &bytes[..8] != FORMAT_MAGIC {
        return Err(fail("not a model file (bad magic)"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {version}, this build reads version {FORMAT_VERSION}"
        )));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(fail("checksum mismatch (truncated or corrupted file)"));
    }
    let header_len = u64::from_le_bytes(body[12..20].try_into().expect("8 bytes")) as usize;
    let header_end = 20usize
        .checked_add(header_len)
        .filter(|&e| e <= body.len())
        .ok_or_else(|| fail("header length exceeds file"))?;
    let header: Header =
        serde_json::from_slice(&body[20..header_end]).map_err(|e| Error::ModelFormat(format!("header: {e}")))?;
    let raw = &body[header_end..];
    if raw.len() != 8 * header.n_params {
        return Err(Error::ModelFormat(format!(
            "expected {} parameters, found {} bytes",
            header.n_params,
            raw.len()
        )));
    }
    let params = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    TrainedModel::from_parts(
        header.config,
        params,
        header.featurizer,
        header.scaler,
        header.threshold,
        header.history,
        header.producer,
    )
}

pub fn save(m: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    atomic_write(path, &to_bytes(m)?)
}

pub fn load(path: impl AsRef<Path>) -> Result<TrainedModel> {
    from_bytes(&read_bytes(path)?)
}
