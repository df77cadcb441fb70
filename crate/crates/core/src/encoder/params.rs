//! Encoder configuration and the single shared parameter set.

use super::{EncoderError, Scalar};
use crate::tokenizer::{NUM_SPECIALS, SKILLS_MAX_LEN};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Standard deviation of the truncated-normal weight initializer.
pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub ffn_dim: usize,
    pub max_positions: usize,
    pub pooled_dim: usize,
    pub dropout_rate: f32,
    pub init_seed: u64,
}

impl EncoderConfig {
    /// Desk-scale defaults: d=64, 2 layers, 4 heads, FFN 4d, pooled 32.
    pub fn new(vocab_size: usize) -> Self {
        EncoderConfig {
            vocab_size,
            hidden_dim: 64,
            num_layers: 2,
            num_heads: 4,
            ffn_dim: 256,
            max_positions: SKILLS_MAX_LEN,
            pooled_dim: 32,
            dropout_rate: 0.0,
            init_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        let fail = |msg: String| Err(EncoderError::InvalidConfig(msg));
        if self.vocab_size <= NUM_SPECIALS {
            return fail(format!("vocab_size must exceed {NUM_SPECIALS}, got {}", self.vocab_size));
        }
        if self.hidden_dim == 0 || self.num_heads == 0 || self.hidden_dim % self.num_heads != 0 {
            return fail(format!(
                "hidden_dim ({}) must be a positive multiple of num_heads ({})",
                self.hidden_dim, self.num_heads
            ));
        }
        if self.ffn_dim == 0 {
            return fail("ffn_dim must be positive".into());
        }
        if self.pooled_dim == 0 || self.pooled_dim > self.hidden_dim {
            return fail(format!(
                "pooled_dim ({}) must be in 1..={}",
                self.pooled_dim, self.hidden_dim
            ));
        }
        if self.max_positions < SKILLS_MAX_LEN {
            return fail(format!(
                "max_positions ({}) must be >= {SKILLS_MAX_LEN}",
                self.max_positions
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout_rate must be in [0, 1), got {}", self.dropout_rate));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.num_heads
    }

    /// Closed-form parameter count of one encoder plus one pooling layer.
    pub fn parameter_count(&self) -> usize {
        let (v, d, f, p) = (self.vocab_size, self.hidden_dim, self.ffn_dim, self.pooled_dim);
        let per_layer = 4 * (d * d + d) + 2 * d + (d * f + f) + (f * d + d) + 2 * d;
        v * d + self.max_positions * d + 2 * d + self.num_layers * per_layer + p * d + p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    /// `in x out`; applied as `x.dot(weight) + bias` on row vectors.
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> Linear<T> {
    fn zeros(input: usize, output: usize) -> Self {
        Linear { weight: Array2::zeros((input, output)), bias: Array1::zeros(output) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams<T> {
    pub gain: Array1<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> LayerNormParams<T> {
    fn zeros(dim: usize) -> Self {
        LayerNormParams { gain: Array1::zeros(dim), bias: Array1::zeros(dim) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub query: Linear<T>,
    pub key: Linear<T>,
    pub value: Linear<T>,
    pub attn_out: Linear<T>,
    pub attn_norm: LayerNormParams<T>,
    pub ffn_in: Linear<T>,
    pub ffn_out: Linear<T>,
    pub ffn_norm: LayerNormParams<T>,
}

/// Every trainable tensor. One instance serves both the title and the skills
/// branch; gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<T> {
    pub config: EncoderConfig,
    pub token_embedding: Array2<T>,
    pub position_embedding: Array2<T>,
    pub embedding_norm: LayerNormParams<T>,
    pub layers: Vec<LayerParams<T>>,
    /// `pooled_dim x hidden_dim`; the pooled vector is `weight . m + bias`.
    pub pool_weight: Array2<T>,
    pub pool_bias: Array1<T>,
}

/// How the optimizer treats a tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    /// Embedding table whose first `protected_rows` rows skip weight decay.
    Embedding { protected_rows: usize },
    Weight,
    Bias,
    Norm,
}

impl TensorKind {
    /// Whether element `index` of a tensor with rows of width `row_len` is decayed.
    pub fn decays(&self, index: usize, row_len: usize) -> bool {
        match *self {
            TensorKind::Embedding { protected_rows } => index / row_len >= protected_rows,
            TensorKind::Weight => true,
            TensorKind::Bias | TensorKind::Norm => false,
        }
    }
}

#[derive(Debug)]
pub struct TensorRef<'a, T> {
    pub name: String,
    pub kind: TensorKind,
    pub shape: Vec<usize>,
    pub data: &'a [T],
}

#[derive(Debug)]
pub struct TensorMut<'a, T> {
    pub name: String,
    pub kind: TensorKind,
    pub shape: Vec<usize>,
    pub data: &'a mut [T],
}

impl<T: Scalar> EncoderParams<T> {
    /// All-zero tensors with the shapes implied by `config`.
    pub fn zeros(config: &EncoderConfig) -> Self {
        let (v, d, f, p) = (config.vocab_size, config.hidden_dim, config.ffn_dim, config.pooled_dim);
        let layer = || LayerParams {
            query: Linear::zeros(d, d),
            key: Linear::zeros(d, d),
            value: Linear::zeros(d, d),
            attn_out: Linear::zeros(d, d),
            attn_norm: LayerNormParams::zeros(d),
            ffn_in: Linear::zeros(d, f),
            ffn_out: Linear::zeros(f, d),
            ffn_norm: LayerNormParams::zeros(d),
        };
        EncoderParams {
            config: config.clone(),
            token_embedding: Array2::zeros((v, d)),
            position_embedding: Array2::zeros((config.max_positions, d)),
            embedding_norm: LayerNormParams::zeros(d),
            layers: (0..config.num_layers).map(|_| layer()).collect(),
            pool_weight: Array2::zeros((p, d)),
            pool_bias: Array1::zeros(p),
        }
    }

    /// Seeded initialization: weights ~ N(0, 0.02) truncated at two standard
    /// deviations, biases 0, layer-norm gains 1 and biases 0.
    pub fn init(config: &EncoderConfig) -> Result<Self, EncoderError> {
        config.validate()?;
        let mut params = Self::zeros(config);
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        for tensor in params.tensors_mut() {
            match tensor.kind {
                TensorKind::Embedding { .. } | TensorKind::Weight => {
                    for x in tensor.data.iter_mut() {
                        *x = T::from_f64(truncated_sample(&normal, &mut rng)).expect("finite");
                    }
                }
                TensorKind::Norm if tensor.name.ends_with(".gain") => tensor.data.fill(T::one()),
                TensorKind::Bias | TensorKind::Norm => {}
            }
        }
        Ok(params)
    }

    /// Tensors in the fixed checkpoint order.
    pub fn tensors(&self) -> Vec<TensorRef<'_, T>> {
        fn push<'a, T>(out: &mut Vec<TensorRef<'a, T>>, name: String, kind: TensorKind, shape: &[usize], data: &'a [T]) {
            out.push(TensorRef { name, kind, shape: shape.to_vec(), data });
        }
        let std = "standard layout";
        let mut out = Vec::new();
        push(
            &mut out,
            "token_embedding".into(),
            TensorKind::Embedding { protected_rows: NUM_SPECIALS },
            self.token_embedding.shape(),
            self.token_embedding.as_slice().expect(std),
        );
        push(
            &mut out,
            "position_embedding".into(),
            TensorKind::Weight,
            self.position_embedding.shape(),
            self.position_embedding.as_slice().expect(std),
        );
        push_norm_ref(&mut out, "embedding_norm", &self.embedding_norm);
        for (i, layer) in self.layers.iter().enumerate() {
            for (name, lin) in layer.linears() {
                let prefix = format!("layers.{i}.{name}");
                push(&mut out, format!("{prefix}.weight"), TensorKind::Weight, lin.weight.shape(), lin.weight.as_slice().expect(std));
                push(&mut out, format!("{prefix}.bias"), TensorKind::Bias, lin.bias.shape(), lin.bias.as_slice().expect(std));
            }
            push_norm_ref(&mut out, &format!("layers.{i}.attn_norm"), &layer.attn_norm);
            push_norm_ref(&mut out, &format!("layers.{i}.ffn_norm"), &layer.ffn_norm);
        }
        push(&mut out, "pool.weight".into(), TensorKind::Weight, self.pool_weight.shape(), self.pool_weight.as_slice().expect(std));
        push(&mut out, "pool.bias".into(), TensorKind::Bias, self.pool_bias.shape(), self.pool_bias.as_slice().expect(std));
        out
    }

    /// Mutable tensors, in the same order as [`tensors`](Self::tensors).
    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_, T>> {
        let std = "standard layout";
        let mut out = Vec::new();
        let EncoderParams {
            token_embedding,
            position_embedding,
            embedding_norm,
            layers,
            pool_weight,
            pool_bias,
            ..
        } = self;
        let shape = token_embedding.shape().to_vec();
        out.push(TensorMut {
            name: "token_embedding".into(),
            kind: TensorKind::Embedding { protected_rows: NUM_SPECIALS },
            shape,
            data: token_embedding.as_slice_mut().expect(std),
        });
        let shape = position_embedding.shape().to_vec();
        out.push(TensorMut {
            name: "position_embedding".into(),
            kind: TensorKind::Weight,
            shape,
            data: position_embedding.as_slice_mut().expect(std),
        });
        push_norm_mut(&mut out, "embedding_norm", embedding_norm);
        for (i, layer) in layers.iter_mut().enumerate() {
            let LayerParams { query, key, value, attn_out, attn_norm, ffn_in, ffn_out, ffn_norm } = layer;
            for (name, lin) in [
                ("query", query),
                ("key", key),
                ("value", value),
                ("attn_out", attn_out),
                ("ffn_in", ffn_in),
                ("ffn_out", ffn_out),
            ] {
                let prefix = format!("layers.{i}.{name}");
                let shape = lin.weight.shape().to_vec();
                out.push(TensorMut {
                    name: format!("{prefix}.weight"),
                    kind: TensorKind::Weight,
                    shape,
                    data: lin.weight.as_slice_mut().expect(std),
                });
                let shape = lin.bias.shape().to_vec();
                out.push(TensorMut {
                    name: format!("{prefix}.bias"),
                    kind: TensorKind::Bias,
                    shape,
                    data: lin.bias.as_slice_mut().expect(std),
                });
            }
            push_norm_mut(&mut out, &format!("layers.{i}.attn_norm"), attn_norm);
            push_norm_mut(&mut out, &format!("layers.{i}.ffn_norm"), ffn_norm);
        }
        let shape = pool_weight.shape().to_vec();
        out.push(TensorMut {
            name: "pool.weight".into(),
            kind: TensorKind::Weight,
            shape,
            data: pool_weight.as_slice_mut().expect(std),
        });
        let shape = pool_bias.shape().to_vec();
        out.push(TensorMut {
            name: "pool.bias".into(),
            kind: TensorKind::Bias,
            shape,
            data: pool_bias.as_slice_mut().expect(std),
        });
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &Self) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (a, &b) in dst.data.iter_mut().zip(src.data) {
                *a += b;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for t in self.tensors_mut() {
            for x in t.data.iter_mut() {
                *x *= factor;
            }
        }
    }

    /// Convert every tensor to another float width.
    pub fn cast<U: Scalar>(&self) -> EncoderParams<U> {
        let mut out = EncoderParams::<U>::zeros(&self.config);
        for (dst, src) in out.tensors_mut().into_iter().zip(self.tensors()) {
            for (a, &b) in dst.data.iter_mut().zip(src.data) {
                *a = U::from_f64(b.to_f64().expect("finite")).expect("finite");
            }
        }
        out
    }
}

impl<T> LayerParams<T> {
    /// Linear sublayers in checkpoint order.
    pub fn linears(&self) -> [(&'static str, &Linear<T>); 6] {
        [
            ("query", &self.query),
            ("key", &self.key),
            ("value", &self.value),
            ("attn_out", &self.attn_out),
            ("ffn_in", &self.ffn_in),
            ("ffn_out", &self.ffn_out),
        ]
    }
}

fn push_norm_ref<'a, T>(out: &mut Vec<TensorRef<'a, T>>, prefix: &str, norm: &'a LayerNormParams<T>) {
    for (suffix, t) in [("gain", &norm.gain), ("bias", &norm.bias)] {
        out.push(TensorRef {
            name: format!("{prefix}.{suffix}"),
            kind: TensorKind::Norm,
            shape: t.shape().to_vec(),
            data: t.as_slice().expect("contiguous"),
        });
    }
}

fn push_norm_mut<'a, T>(out: &mut Vec<TensorMut<'a, T>>, prefix: &str, norm: &'a mut LayerNormParams<T>) {
    let LayerNormParams { gain, bias } = norm;
    let shape = gain.shape().to_vec();
    out.push(TensorMut {
        name: format!("{prefix}.gain"),
        kind: TensorKind::Norm,
        shape,
        data: gain.as_slice_mut().expect("contiguous"),
    });
    let shape = bias.shape().to_vec();
    out.push(TensorMut {
        name: format!("{prefix}.bias"),
        kind: TensorKind::Norm,
        shape,
        data: bias.as_slice_mut().expect("contiguous"),
    });
}

fn truncated_sample(normal: &Normal<f64>, rng: &mut impl Rng) -> f64 {
    loop {
        let x = normal.sample(rng);
        if x.abs() <= 2.0 * INIT_STD {
            return x;
        }
    }
}
