//! Encoder forward pass. Training calls keep a [`ForwardCache`] for backprop.
//!
//! Each block is post-norm: `h = LN(x + Attn(x))`, `y = LN(h + FFN(h))`,
//! with `FFN(h) = gelu(h W1 + b1) W2 + b2`. Padding positions are removed
//! from attention by an additive `-inf` on their key columns.

use super::params::{EncoderParams, LayerNormParams, LayerParams, Linear};
use super::{lit, EncoderError, Scalar};
use crate::tokenizer::EncodedInput;
use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const LAYER_NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub(crate) struct NormCache<T> {
    pub xhat: Array2<T>,
    pub rstd: Array1<T>,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerCache<T> {
    pub input: Array2<T>,
    pub q: Array2<T>,
    pub k: Array2<T>,
    pub v: Array2<T>,
    /// Per head, `n x n` attention probabilities.
    pub probs: Vec<Array2<T>>,
    pub context: Array2<T>,
    pub attn_dropout: Option<Array2<T>>,
    pub attn_norm: NormCache<T>,
    pub hidden: Array2<T>,
    pub ffn_pre: Array2<T>,
    pub ffn_act: Array2<T>,
    pub ffn_dropout: Option<Array2<T>>,
    pub ffn_norm: NormCache<T>,
}

#[derive(Debug, Clone)]
pub(crate) struct ForwardCache<T> {
    pub ids: Vec<u32>,
    pub embedding_norm: NormCache<T>,
    pub embedding_dropout: Option<Array2<T>>,
    pub layers: Vec<LayerCache<T>>,
    pub output: Array2<T>,
}

pub(crate) fn check_input<T: Scalar>(params: &EncoderParams<T>, input: &EncodedInput) -> Result<(), EncoderError> {
    let cfg = &params.config;
    if input.ids.len() > cfg.max_positions {
        return Err(EncoderError::LengthOverflow { len: input.ids.len(), max: cfg.max_positions });
    }
    if input.ids.len() != input.mask.len() {
        return Err(EncoderError::MaskMismatch);
    }
    if let Some(&id) = input.ids.iter().find(|&&id| id as usize >= cfg.vocab_size) {
        return Err(EncoderError::IdOutOfRange { id, vocab_size: cfg.vocab_size });
    }
    Ok(())
}

pub(crate) fn linear<T: Scalar>(x: &Array2<T>, lin: &Linear<T>) -> Array2<T> {
    x.dot(&lin.weight) + &lin.bias
}

pub(crate) fn layer_norm<T: Scalar>(x: &Array2<T>, norm: &LayerNormParams<T>) -> (Array2<T>, NormCache<T>) {
    let d: T = lit(x.ncols() as f64);
    let eps: T = lit(LAYER_NORM_EPS);
    let mut xhat = x.clone();
    let mut rstd = Array1::zeros(x.nrows());
    for (mut row, r) in xhat.rows_mut().into_iter().zip(rstd.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|&v| v * v).sum::<T>() / d;
        *r = T::one() / (var + eps).sqrt();
        let scale = *r;
        row.mapv_inplace(|v| v * scale);
    }
    let y = &xhat * &norm.gain + &norm.bias;
    (y, NormCache { xhat, rstd })
}

const GELU_COEFF: f64 = 0.044715;

pub(crate) fn gelu<T: Scalar>(u: T) -> T {
    let c: T = lit((2.0 / std::f64::consts::PI).sqrt());
    let half: T = lit(0.5);
    half * u * (T::one() + (c * (u + lit::<T>(GELU_COEFF) * u * u * u)).tanh())
}

pub(crate) fn gelu_grad<T: Scalar>(u: T) -> T {
    let c: T = lit((2.0 / std::f64::consts::PI).sqrt());
    let half: T = lit(0.5);
    let a: T = lit(GELU_COEFF);
    let t = (c * (u + a * u * u * u)).tanh();
    half * (T::one() + t) + half * u * (T::one() - t * t) * c * (T::one() + lit::<T>(3.0) * a * u * u)
}

/// Row-wise softmax in place; `-inf` entries become 0.
pub(crate) fn softmax_rows<T: Scalar>(m: &mut Array2<T>) {
    for mut row in m.rows_mut() {
        let max = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

fn dropout_mask<T: Scalar>(shape: (usize, usize), rate: f32, rng: &mut ChaCha8Rng) -> Array2<T> {
    let keep: T = lit(1.0 / (1.0 - rate as f64));
    Array2::from_shape_fn(shape, |_| if rng.random::<f32>() < rate { T::zero() } else { keep })
}

fn attention<T: Scalar>(
    x: &Array2<T>,
    layer: &LayerParams<T>,
    heads: usize,
    key_mask: &[bool],
) -> (Array2<T>, Array2<T>, Array2<T>, Vec<Array2<T>>, Array2<T>) {
    let q = linear(x, &layer.query);
    let k = linear(x, &layer.key);
    let v = linear(x, &layer.value);
    let (n, d) = x.dim();
    let dh = d / heads;
    let scale: T = lit(1.0 / (dh as f64).sqrt());
    let mut context = Array2::zeros((n, d));
    let mut probs = Vec::with_capacity(heads);
    for h in 0..heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let mut scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
        for (j, &real) in key_mask.iter().enumerate() {
            if !real {
                scores.column_mut(j).fill(T::neg_infinity());
            }
        }
        softmax_rows(&mut scores);
        context.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
        probs.push(scores);
    }
    (q, k, v, probs, context)
}

/// Run the encoder; with `dropout_rng` set and a positive dropout rate,
/// dropout is applied to the embedding output and both residual branches.
pub(crate) fn forward_cached<T: Scalar>(
    params: &EncoderParams<T>,
    input: &EncodedInput,
    mut dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<ForwardCache<T>, EncoderError> {
    check_input(params, input)?;
    let cfg = &params.config;
    let n = input.ids.len();
    let rate = cfg.dropout_rate;
    let mut draw = |shape: (usize, usize)| -> Option<Array2<T>> {
        match dropout_rng.as_deref_mut() {
            Some(rng) if rate > 0.0 => Some(dropout_mask(shape, rate, rng)),
            _ => None,
        }
    };

    let mut embedded = Array2::zeros((n, cfg.hidden_dim));
    for (i, &id) in input.ids.iter().enumerate() {
        let mut row = embedded.row_mut(i);
        row.assign(&params.token_embedding.row(id as usize));
        row += &params.position_embedding.row(i);
    }
    let (mut x, embedding_norm) = layer_norm(&embedded, &params.embedding_norm);
    let embedding_dropout = draw(x.dim());
    if let Some(mask) = &embedding_dropout {
        x = x * mask;
    }

    let key_mask: Vec<bool> = input.mask.iter().map(|&m| m == 1).collect();
    let mut layers = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let (q, k, v, probs, context) = attention(&x, layer, cfg.num_heads, &key_mask);
        let mut attn = linear(&context, &layer.attn_out);
        let attn_dropout = draw(attn.dim());
        if let Some(mask) = &attn_dropout {
            attn = attn * mask;
        }
        let (hidden, attn_norm) = layer_norm(&(&x + &attn), &layer.attn_norm);
        let ffn_pre = linear(&hidden, &layer.ffn_in);
        let ffn_act = ffn_pre.mapv(gelu);
        let mut ffn = linear(&ffn_act, &layer.ffn_out);
        let ffn_dropout = draw(ffn.dim());
        if let Some(mask) = &ffn_dropout {
            ffn = ffn * mask;
        }
        let (out, ffn_norm) = layer_norm(&(&hidden + &ffn), &layer.ffn_norm);
        layers.push(LayerCache {
            input: std::mem::replace(&mut x, out),
            q,
            k,
            v,
            probs,
            context,
            attn_dropout,
            attn_norm,
            hidden,
            ffn_pre,
            ffn_act,
            ffn_dropout,
            ffn_norm,
        });
    }
    Ok(ForwardCache {
        ids: input.ids.clone(),
        embedding_norm,
        embedding_dropout,
        layers,
        output: x,
    })
}

/// Per-position hidden states, `len(ids) x hidden_dim`.
pub fn forward<T: Scalar>(params: &EncoderParams<T>, input: &EncodedInput) -> Result<Array2<T>, EncoderError> {
    forward_cached(params, input, None).map(|c| c.output)
}

/// Mean of `rows` of `hidden`.
pub(crate) fn mean_rows<T: Scalar>(hidden: &Array2<T>, rows: &[usize]) -> Array1<T> {
    let picked = hidden.select(Axis(0), rows);
    picked.sum_axis(Axis(0)) / lit::<T>(rows.len() as f64)
}
