//! The Siamese title/skills encoder.
//!
//! One transformer and one linear pooling layer ([`EncoderParams`]) serve
//! both branches. Titles are mean-pooled over their word positions; skill
//! lists are pooled over their `[SKILL]` marker positions. Both go through
//! the same `W . m + b` projection and are L2-normalized.

mod backward;
mod baseline;
mod checkpoint;
mod forward;
mod model;
mod params;
mod pooling;

pub use baseline::{baseline_static_embed, StaticBaseline, StaticTable};
pub use checkpoint::{
    checkpoint_bytes, load_checkpoint, manifest_path, parse_checkpoint, save_checkpoint,
    CheckpointManifest, TensorShape, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use forward::{forward, LAYER_NORM_EPS};
pub use model::{embed, DualEncoder};
pub use params::{
    EncoderConfig, EncoderParams, LayerNormParams, LayerParams, Linear, TensorKind, TensorMut,
    TensorRef, INIT_STD,
};
pub use pooling::{pool_skills, pool_title};

pub(crate) use backward::{backward_stack, pool_backward};
pub(crate) use forward::{forward_cached, ForwardCache};
pub(crate) use pooling::{pool_rows, skill_rows, title_rows, PoolTrace};

use crate::corpus::JobRecord;
use crate::tokenizer::TokenizerError;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Float widths the encoder runs at (`f32` for training and inference,
/// `f64` for gradient checks).
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::ops::DivAssign
    + std::iter::Sum
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("representable constant")
}

/// Unit-norm tolerance for normalized embeddings.
pub const UNIT_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
    #[error("token id {id} out of range for vocab size {vocab_size}")]
    IdOutOfRange { id: u32, vocab_size: usize },
    #[error("sequence length {len} exceeds max_positions {max}")]
    LengthOverflow { len: usize, max: usize },
    #[error("ids and mask differ in length")]
    MaskMismatch,
    #[error("input has no unmasked positions")]
    EmptyMask,
    #[error("input has no [SKILL] positions")]
    NoSkillPositions,
    #[error("position {0} is not an unmasked [SKILL] marker")]
    BadSkillPosition(usize),
    #[error("pooled vector has zero or non-finite norm")]
    ZeroNorm,
    #[error("record has no skills")]
    NoSkills,
    #[error("nothing to embed")]
    EmptyInput,
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("vocabulary has {vocab} entries but the encoder expects {config}")]
    VocabMismatch { vocab: usize, config: usize },
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error("checkpoint i/o failed")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("checkpoint format version {found}, expected {expected}")]
    FormatVersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint truncated or oversized: expected {expected} bytes, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("checkpoint manifest: {0}")]
    Manifest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedMode {
    Title,
    Skills,
    Combined,
}

impl EmbedMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EmbedMode::Title => "title",
            EmbedMode::Skills => "skills",
            EmbedMode::Combined => "combined",
        }
    }
}

impl fmt::Display for EmbedMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmbedMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "title" => Ok(EmbedMode::Title),
            "skills" => Ok(EmbedMode::Skills),
            "combined" => Ok(EmbedMode::Combined),
            other => Err(format!("unknown mode {other:?} (expected title, skills or combined)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub values: Vec<f32>,
    pub mode: EmbedMode,
    pub normalized: bool,
}

impl Embedding {
    /// L2-normalize `values` (in f64) and store them as f32.
    pub fn normalized(values: Vec<f64>, mode: EmbedMode) -> Result<Self, EncoderError> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(EncoderError::ZeroNorm);
        }
        Ok(Embedding {
            values: values.iter().map(|v| (v / norm) as f32).collect(),
            mode,
            normalized: true,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() < UNIT_NORM_TOL
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        self.values.iter().zip(&other.values).map(|(&a, &b)| a as f64 * b as f64).sum()
    }

    /// `normalize((title + skills) / 2)`.
    pub fn combine(title: &Embedding, skills: &Embedding) -> Result<Embedding, EncoderError> {
        if title.dim() != skills.dim() {
            return Err(EncoderError::DimensionMismatch(title.dim(), skills.dim()));
        }
        let mean = title
            .values
            .iter()
            .zip(&skills.values)
            .map(|(&a, &b)| 0.5 * (a as f64 + b as f64))
            .collect();
        Embedding::normalized(mean, EmbedMode::Combined)
    }
}

/// Anything that maps a posting to an embedding: the trained dual encoder
/// or a static word-vector baseline.
pub trait TextEncoder: Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    /// Identity of the weights behind the embeddings; stored in indexes.
    fn fingerprint(&self) -> [u8; 32];
    fn embed(&self, record: &JobRecord, mode: EmbedMode) -> Result<Embedding, EncoderError>;

    fn embed_title(&self, title: &str) -> Result<Embedding, EncoderError> {
        self.embed(&JobRecord::new(title, Vec::new()), EmbedMode::Title)
    }
}
