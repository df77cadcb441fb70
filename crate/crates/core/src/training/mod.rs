//! Contrastive training with in-batch negatives.
//!
//! Each step embeds B titles and their B skill lists with the shared
//! encoder, scores every title against every skill list, and minimizes the
//! multiple-negatives ranking loss: row `i` of the scaled similarity matrix
//! is a softmax whose target is column `i`.

mod backprop;
mod batching;
mod loss;
mod optimizer;
mod trainer;

pub use backprop::{backward, batch_loss};
pub use batching::make_batches;
pub use loss::{mnr_loss, similarity_matrix};
pub use optimizer::{optimizer_step, AdamWState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use trainer::{train, train_with, LogEvent, Probe, StepRecord, TrainLog, ValidationRecord};

use crate::corpus::{clean_text, JobRecord};
use crate::encoder::EncoderError;
use crate::tokenizer::{encode_skills, encode_title, EncodedInput, TokenizerError, Vocabulary};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("embedding {0} is not unit-norm")]
    NotNormalized(usize),
    #[error("similarity scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("empty batch")]
    EmptyBatch,
    #[error("dataset has {size} pairs, fewer than one batch of {batch_size}")]
    DatasetTooSmall { size: usize, batch_size: usize },
    #[error("non-finite loss or gradient at step {step}")]
    NonFiniteGradient { step: usize },
    #[error("parameter, gradient and optimizer shapes differ")]
    ShapeMismatch,
    #[error("pair {0} has no skills")]
    EmptySkills(usize),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error("{0}")]
    Hook(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Multiplier on cosine similarities inside the softmax.
    pub scale: f64,
    pub weight_decay: f64,
    pub shuffle_seed: u64,
    pub validation_fraction: f64,
    /// Validate (and call the checkpoint hook) every n steps; 0 disables.
    pub checkpoint_every: usize,
    /// Average the title->skills and skills->title losses.
    pub bidirectional: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            epochs: 1,
            learning_rate: 1e-3,
            scale: 20.0,
            weight_decay: 0.01,
            shuffle_seed: 0,
            validation_fraction: 0.05,
            checkpoint_every: 100,
            bidirectional: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainingError> {
        let bad = |m: String| Err(TrainingError::InvalidConfig(m));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be finite and >= 0, got {}", self.learning_rate));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(TrainingError::NonPositiveScale(self.scale));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay must be finite and >= 0, got {}", self.weight_decay));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 0.5) {
            return bad(format!("validation_fraction must be in (0, 0.5), got {}", self.validation_fraction));
        }
        Ok(())
    }
}

/// A (title, skills) training pair. `key` groups pairs that must not meet
/// inside one batch: the cleaned normalized title when known, else the
/// cleaned title.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainPair {
    pub title: String,
    pub skills: Vec<String>,
    pub key: String,
}

impl TrainPair {
    pub fn new(title: impl Into<String>, skills: Vec<String>) -> Self {
        let title = title.into();
        TrainPair { key: clean_text(&title), title, skills }
    }

    /// `None` when the record has no skills to pair with.
    pub fn from_record(record: &JobRecord) -> Option<Self> {
        if record.skills.iter().all(|s| clean_text(s).is_empty()) {
            return None;
        }
        let key = clean_text(record.normalized_title.as_deref().unwrap_or(&record.title));
        Some(TrainPair { title: record.title.clone(), skills: record.skills.clone(), key })
    }

    pub fn encode(&self, vocab: &Vocabulary) -> Result<(EncodedInput, EncodedInput), TokenizerError> {
        let skills: Vec<String> = self.skills.iter().map(|s| clean_text(s)).filter(|s| !s.is_empty()).collect();
        Ok((encode_title(&clean_text(&self.title), vocab), encode_skills(&skills, vocab)?))
    }
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
