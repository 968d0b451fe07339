//! The BUSM checkpoint container.
//!
//! Layout: `b"BUSM"`, a little-endian `u32` format version, a little-endian
//! `u64` header length, the JSON header, then the raw little-endian `f32`
//! payloads of every tensor in header order.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{ParamStore, Trainable};
use super::Tensor;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"BUSM";

#[derive(Debug, Clone)]
pub struct CheckpointData {
    pub params: ParamStore<f32>,
    /// Free-form string metadata (model kind, vocabulary, run config).
    pub metadata: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct TensorHeader {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frozen: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trainable_rows: Option<Vec<bool>>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    tensors: Vec<TensorHeader>,
    metadata: BTreeMap<String, String>,
}

pub fn encode_checkpoint(params: &ParamStore<f32>, metadata: &BTreeMap<String, String>) -> Result<Vec<u8>> {
    let mut tensors = Vec::with_capacity(params.len());
    let mut offset = 0;
    for (_, e) in params.iter() {
        let (frozen, trainable_rows) = match &e.trainable {
            Trainable::All => (None, None),
            Trainable::Frozen => (Some(true), None),
            Trainable::Rows(r) => (None, Some(r.clone())),
        };
        tensors.push(TensorHeader {
            name: e.name.clone(),
            shape: e.value.shape().to_vec(),
            offset,
            frozen,
            trainable_rows,
        });
        offset += e.value.len() * 4;
    }
    let header = serde_json::to_vec(&Header {
        tensors,
        metadata: metadata.clone(),
    })?;
    let mut out = Vec::with_capacity(16 + header.len() + offset);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for (_, e) in params.iter() {
        for v in e.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn take(bytes: &[u8], offset: usize, len: usize) -> Result<&[u8]> {
    bytes.get(offset..offset + len).ok_or(Error::Truncated {
        offset,
        expected: len,
        available: bytes.len(),
    })
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<CheckpointData> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = u32::from_le_bytes(take(bytes, 4, 4)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            supported: CHECKPOINT_VERSION,
        });
    }
    let header_len = u64::from_le_bytes(take(bytes, 8, 8)?.try_into().unwrap()) as usize;
    let header: Header = serde_json::from_slice(take(bytes, 16, header_len)?)?;
    let payload_start = 16 + header_len;
    let mut params = ParamStore::new();
    for t in header.tensors {
        let n: usize = t.shape.iter().product();
        let raw = take(bytes, payload_start + t.offset, n * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let trainable = match (t.frozen, t.trainable_rows) {
            (Some(true), _) => Trainable::Frozen,
            (_, Some(rows)) => Trainable::Rows(rows),
            _ => Trainable::All,
        };
        params.add(&t.name, Tensor::new(t.shape, data)?, trainable)?;
    }
    Ok(CheckpointData {
        params,
        metadata: header.metadata,
    })
}

pub fn write_checkpoint(
    path: &Path,
    params: &ParamStore<f32>,
    metadata: &BTreeMap<String, String>,
) -> Result<()> {
    let bytes = encode_checkpoint(params, metadata)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<CheckpointData> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
