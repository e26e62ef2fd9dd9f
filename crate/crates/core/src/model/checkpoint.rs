//! Binary checkpoint container.
//!
//! Layout: the magic `MEMOCKPT`, a little-endian `u32` version, a `u64` header
//! length, the JSON header, then every stream's parameters as little-endian `f64`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Architecture, Normalization};
use super::shift::ShiftConfig;
use super::ModelError;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"MEMOCKPT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamHeader {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub architecture: Architecture,
    pub shift: Option<ShiftConfig>,
    pub input_size: u32,
    pub normalization: Normalization,
    pub modality: String,
    pub segments: usize,
    pub snippet_frames: usize,
    pub epoch: usize,
    /// RNG state as the run seed; every stream is derived from it and the epoch.
    pub seed: u64,
    pub streams: Vec<StreamHeader>,
    /// Full run configuration, when written by the experiment harness.
    #[serde(default)]
    pub run_config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    /// Parameters per stream, in header order.
    pub params: Vec<Vec<f64>>,
}

impl Checkpoint {
    pub fn stream(&self, name: &str) -> Option<&[f64]> {
        self.header.streams.iter().position(|s| s.name == name).map(|i| self.params[i].as_slice())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let mut out = Vec::with_capacity(20 + header.len() + 8 * self.params.iter().map(Vec::len).sum::<usize>());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for p in self.params.iter().flatten() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(mut bytes: &[u8]) -> std::result::Result<Self, ModelError> {
        let bad = |m: &str| ModelError::Checkpoint(m.to_string());
        let mut magic = [0u8; 8];
        bytes.read_exact(&mut magic).map_err(|_| bad("truncated magic"))?;
        if &magic != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let mut word = [0u8; 4];
        bytes.read_exact(&mut word).map_err(|_| bad("truncated version"))?;
        let version = u32::from_le_bytes(word);
        if version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!("unsupported version {version}")));
        }
        let mut long = [0u8; 8];
        bytes.read_exact(&mut long).map_err(|_| bad("truncated header length"))?;
        let header_len = u64::from_le_bytes(long) as usize;
        if bytes.len() < header_len {
            return Err(bad("truncated header"));
        }
        let header: CheckpointHeader = serde_json::from_slice(&bytes[..header_len]).map_err(|e| ModelError::Checkpoint(format!("header: {e}")))?;
        bytes = &bytes[header_len..];
        let total: usize = header.streams.iter().map(|s| s.len).sum();
        if bytes.len() != total * 8 {
            return Err(ModelError::Checkpoint(format!("expected {} parameter bytes, found {}", total * 8, bytes.len())));
        }
        let mut params = Vec::with_capacity(header.streams.len());
        for s in &header.streams {
            let (head, rest) = bytes.split_at(s.len * 8);
            params.push(head.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect());
            bytes = rest;
        }
        Ok(Checkpoint { header, params })
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&ckpt.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes).map_err(Error::from)
}
