//! Binary checkpoints plus a JSON manifest next to them.
//!
//! Layout (little endian): magic `SKSM`, u32 format version, seven u32
//! config fields (vocab, hidden, layers, heads, ffn, positions, pooled), the
//! dropout rate as f32 bits, the u64 init seed, then every tensor as f32 in
//! [`EncoderParams::tensors`] order.

use super::params::{EncoderConfig, EncoderParams};
use super::EncoderError;
use crate::tokenizer::Vocabulary;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SKSM";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 7 * 4 + 4 + 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorShape {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub config: EncoderConfig,
    pub parameter_count: usize,
    pub tensors: Vec<TensorShape>,
    pub vocab_sha256: Option<String>,
    pub checkpoint_sha256: String,
}

/// `<checkpoint>.json`
pub fn manifest_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

pub fn checkpoint_bytes(params: &EncoderParams<f32>) -> Vec<u8> {
    let c = &params.config;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * params.parameter_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [c.vocab_size, c.hidden_dim, c.num_layers, c.num_heads, c.ffn_dim, c.max_positions, c.pooled_dim] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&c.dropout_rate.to_bits().to_le_bytes());
    out.extend_from_slice(&c.init_seed.to_le_bytes());
    for t in params.tensors() {
        for v in t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<EncoderParams<f32>, EncoderError> {
    if bytes.len() < 8 {
        return Err(EncoderError::SizeMismatch { expected: HEADER_LEN, found: bytes.len() });
    }
    if &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(EncoderError::BadMagic);
    }
    let version = u32_at(bytes, 4);
    if version != CHECKPOINT_VERSION {
        return Err(EncoderError::FormatVersionMismatch { found: version, expected: CHECKPOINT_VERSION });
    }
    if bytes.len() < HEADER_LEN {
        return Err(EncoderError::SizeMismatch { expected: HEADER_LEN, found: bytes.len() });
    }
    let field = |i: usize| u32_at(bytes, 8 + 4 * i) as usize;
    let config = EncoderConfig {
        vocab_size: field(0),
        hidden_dim: field(1),
        num_layers: field(2),
        num_heads: field(3),
        ffn_dim: field(4),
        max_positions: field(5),
        pooled_dim: field(6),
        dropout_rate: f32::from_bits(u32_at(bytes, 36)),
        init_seed: u64::from_le_bytes(bytes[40..48].try_into().expect("8 bytes")),
    };
    config.validate()?;
    let expected = HEADER_LEN + 4 * config.parameter_count();
    if bytes.len() != expected {
        return Err(EncoderError::SizeMismatch { expected, found: bytes.len() });
    }
    let mut params = EncoderParams::<f32>::zeros(&config);
    let mut floats = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")));
    for t in params.tensors_mut() {
        for (slot, v) in t.data.iter_mut().zip(&mut floats) {
            *slot = v;
        }
    }
    Ok(params)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Write the checkpoint and its manifest, each atomically.
pub fn save_checkpoint(
    params: &EncoderParams<f32>,
    path: &Path,
    vocab: Option<&Vocabulary>,
) -> Result<CheckpointManifest, EncoderError> {
    let bytes = checkpoint_bytes(params);
    let manifest = CheckpointManifest {
        format_version: CHECKPOINT_VERSION,
        config: params.config.clone(),
        parameter_count: params.parameter_count(),
        tensors: params
            .tensors()
            .into_iter()
            .map(|t| TensorShape { name: t.name, shape: t.shape })
            .collect(),
        vocab_sha256: vocab.map(|v| v.hash()),
        checkpoint_sha256: hex::encode(Sha256::digest(&bytes)),
    };
    write_atomic(path, &bytes)?;
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| EncoderError::Manifest(e.to_string()))?;
    write_atomic(&manifest_path(path), &json)?;
    Ok(manifest)
}

/// Load a checkpoint; returns the parameters and the sha256 of its bytes.
pub fn load_checkpoint(path: &Path) -> Result<(EncoderParams<f32>, [u8; 32]), EncoderError> {
    let bytes = fs::read(path)?;
    let params = parse_checkpoint(&bytes)?;
    Ok((params, Sha256::digest(&bytes).into()))
}
