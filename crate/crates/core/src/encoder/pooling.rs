//! Title and `[SKILL]` pooling heads. Both share one linear layer.

use super::params::EncoderParams;
use super::{forward::mean_rows, EmbedMode, Embedding, EncoderError, Scalar};
use crate::tokenizer::{is_special, EncodedInput, SKILL};
use ndarray::{Array1, Array2};

#[derive(Debug, Clone)]
pub(crate) struct PoolTrace<T> {
    pub rows: Vec<usize>,
    pub mean: Array1<T>,
    /// Norm of `W . mean + b` before normalization.
    pub norm: T,
    pub embedding: Array1<T>,
}

/// Real, non-special positions of a title; `[CLS]` when there are none.
pub(crate) fn title_rows(input: &EncodedInput) -> Result<Vec<usize>, EncoderError> {
    if !input.mask.contains(&1) {
        return Err(EncoderError::EmptyMask);
    }
    let rows: Vec<usize> = input
        .ids
        .iter()
        .zip(&input.mask)
        .enumerate()
        .filter(|(_, (&id, &m))| m == 1 && !is_special(id))
        .map(|(i, _)| i)
        .collect();
    Ok(if rows.is_empty() { vec![0] } else { rows })
}

/// The recorded `[SKILL]` marker positions, checked against the input.
pub(crate) fn skill_rows(input: &EncodedInput) -> Result<Vec<usize>, EncoderError> {
    if input.skill_positions.is_empty() {
        return Err(EncoderError::NoSkillPositions);
    }
    for &p in &input.skill_positions {
        if p >= input.ids.len() || input.mask[p] != 1 || input.ids[p] != SKILL {
            return Err(EncoderError::BadSkillPosition(p));
        }
    }
    Ok(input.skill_positions.clone())
}

pub(crate) fn pool_rows<T: Scalar>(
    params: &EncoderParams<T>,
    hidden: &Array2<T>,
    rows: Vec<usize>,
) -> Result<PoolTrace<T>, EncoderError> {
    let mean = mean_rows(hidden, &rows);
    let z = params.pool_weight.dot(&mean) + &params.pool_bias;
    let norm = z.dot(&z).sqrt();
    if !(norm > T::zero()) || !norm.is_finite() {
        return Err(EncoderError::ZeroNorm);
    }
    let embedding = z / norm;
    Ok(PoolTrace { rows, mean, norm, embedding })
}

fn to_embedding<T: Scalar>(trace: PoolTrace<T>, mode: EmbedMode) -> Result<Embedding, EncoderError> {
    let values: Vec<f64> = trace.embedding.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
    Embedding::normalized(values, mode)
}

/// `normalize(W . mean(h_i) + b)` over real non-special title positions.
pub fn pool_title<T: Scalar>(
    params: &EncoderParams<T>,
    hidden: &Array2<T>,
    input: &EncodedInput,
) -> Result<Embedding, EncoderError> {
    let trace = pool_rows(params, hidden, title_rows(input)?)?;
    to_embedding(trace, EmbedMode::Title)
}

/// `normalize(W . mean(h_p) + b)` over the `[SKILL]` marker positions.
pub fn pool_skills<T: Scalar>(
    params: &EncoderParams<T>,
    hidden: &Array2<T>,
    input: &EncodedInput,
) -> Result<Embedding, EncoderError> {
    let trace = pool_rows(params, hidden, skill_rows(input)?)?;
    to_embedding(trace, EmbedMode::Skills)
}
