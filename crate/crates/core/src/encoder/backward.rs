//! Reverse-mode gradients of the encoder stack and the pooling head.

use super::forward::{gelu_grad, ForwardCache, NormCache};
use super::params::{EncoderParams, LayerNormParams, Linear};
use super::pooling::PoolTrace;
use super::{lit, Scalar};
use ndarray::{s, Array1, Array2, Axis};

fn layer_norm_backward<T: Scalar>(
    dy: &Array2<T>,
    cache: &NormCache<T>,
    norm: &LayerNormParams<T>,
    grad: &mut LayerNormParams<T>,
) -> Array2<T> {
    grad.gain += &(dy * &cache.xhat).sum_axis(Axis(0));
    grad.bias += &dy.sum_axis(Axis(0));
    let d: T = lit(dy.ncols() as f64);
    let dxhat = dy * &norm.gain;
    let mut dx = Array2::zeros(dy.dim());
    for (i, mut row) in dx.rows_mut().into_iter().enumerate() {
        let g = dxhat.row(i);
        let xh = cache.xhat.row(i);
        let mean_g = g.sum() / d;
        let mean_gx = g.iter().zip(xh.iter()).map(|(&a, &b)| a * b).sum::<T>() / d;
        let r = cache.rstd[i];
        for ((out, &gi), &xi) in row.iter_mut().zip(g.iter()).zip(xh.iter()) {
            *out = r * (gi - mean_g - xi * mean_gx);
        }
    }
    dx
}

/// Accumulate weight/bias gradients of `y = x W + b` and return `dL/dx`.
fn linear_backward<T: Scalar>(x: &Array2<T>, dy: &Array2<T>, lin: &Linear<T>, grad: &mut Linear<T>) -> Array2<T> {
    grad.weight += &x.t().dot(dy);
    grad.bias += &dy.sum_axis(Axis(0));
    dy.dot(&lin.weight.t())
}

/// Backpropagate `d_output` (gradient w.r.t. the final hidden states)
/// through every block and the embedding layer, accumulating into `grads`.
pub(crate) fn backward_stack<T: Scalar>(
    params: &EncoderParams<T>,
    cache: &ForwardCache<T>,
    d_output: Array2<T>,
    grads: &mut EncoderParams<T>,
) {
    let heads = params.config.num_heads;
    let mut dx = d_output;
    for ((layer, lc), lg) in params
        .layers
        .iter()
        .zip(&cache.layers)
        .zip(grads.layers.iter_mut())
        .rev()
    {
        // y = LN(h + drop(FFN(h)))
        let d_res2 = layer_norm_backward(&dx, &lc.ffn_norm, &layer.ffn_norm, &mut lg.ffn_norm);
        let mut d_ffn = d_res2.clone();
        if let Some(mask) = &lc.ffn_dropout {
            d_ffn = d_ffn * mask;
        }
        let d_act = linear_backward(&lc.ffn_act, &d_ffn, &layer.ffn_out, &mut lg.ffn_out);
        let d_pre = d_act * &lc.ffn_pre.mapv(gelu_grad);
        let mut d_hidden = linear_backward(&lc.hidden, &d_pre, &layer.ffn_in, &mut lg.ffn_in);
        d_hidden += &d_res2;

        // h = LN(x + drop(Attn(x)))
        let d_res1 = layer_norm_backward(&d_hidden, &lc.attn_norm, &layer.attn_norm, &mut lg.attn_norm);
        let mut d_attn = d_res1.clone();
        if let Some(mask) = &lc.attn_dropout {
            d_attn = d_attn * mask;
        }
        let d_context = linear_backward(&lc.context, &d_attn, &layer.attn_out, &mut lg.attn_out);

        let (n, d) = lc.q.dim();
        let dh = d / heads;
        let scale: T = lit(1.0 / (dh as f64).sqrt());
        let mut dq = Array2::zeros((n, d));
        let mut dk = Array2::zeros((n, d));
        let mut dv = Array2::zeros((n, d));
        for (h, probs) in lc.probs.iter().enumerate() {
            let cols = s![.., h * dh..(h + 1) * dh];
            let dctx = d_context.slice(cols);
            // context_h = P v_h
            let dp = dctx.dot(&lc.v.slice(cols).t());
            dv.slice_mut(cols).assign(&probs.t().dot(&dctx));
            // softmax: dS = P * (dP - rowsum(dP * P))
            let mut ds = probs * &dp;
            let row_dot = ds.sum_axis(Axis(1));
            for (mut row, (p_row, &rd)) in ds.rows_mut().into_iter().zip(probs.rows().into_iter().zip(row_dot.iter())) {
                for (v, &p) in row.iter_mut().zip(p_row.iter()) {
                    *v = *v - p * rd;
                }
            }
            ds.mapv_inplace(|v| v * scale);
            dq.slice_mut(cols).assign(&ds.dot(&lc.k.slice(cols)));
            dk.slice_mut(cols).assign(&ds.t().dot(&lc.q.slice(cols)));
        }
        let mut d_input = d_res1;
        d_input += &linear_backward(&lc.input, &dq, &layer.query, &mut lg.query);
        d_input += &linear_backward(&lc.input, &dk, &layer.key, &mut lg.key);
        d_input += &linear_backward(&lc.input, &dv, &layer.value, &mut lg.value);
        dx = d_input;
    }

    if let Some(mask) = &cache.embedding_dropout {
        dx = dx * mask;
    }
    let d_embedded = layer_norm_backward(&dx, &cache.embedding_norm, &params.embedding_norm, &mut grads.embedding_norm);
    for (i, &id) in cache.ids.iter().enumerate() {
        let row = d_embedded.row(i);
        let mut tok = grads.token_embedding.row_mut(id as usize);
        tok += &row;
        let mut pos = grads.position_embedding.row_mut(i);
        pos += &row;
    }
}

/// Backpropagate through `normalize(W . mean(rows) + b)`; returns `dL/dhidden`.
pub(crate) fn pool_backward<T: Scalar>(
    params: &EncoderParams<T>,
    trace: &PoolTrace<T>,
    seq_len: usize,
    d_embedding: &Array1<T>,
    grads: &mut EncoderParams<T>,
) -> Array2<T> {
    let e = &trace.embedding;
    let proj = e.dot(d_embedding);
    let dz = (d_embedding - &(e * proj)) / trace.norm;
    for (mut row, &g) in grads.pool_weight.rows_mut().into_iter().zip(dz.iter()) {
        row.scaled_add(g, &trace.mean);
    }
    grads.pool_bias += &dz;
    let dm = params.pool_weight.t().dot(&dz) / lit::<T>(trace.rows.len() as f64);
    let mut dh = Array2::zeros((seq_len, params.config.hidden_dim));
    for &r in &trace.rows {
        let mut row = dh.row_mut(r);
        row += &dm;
    }
    dh
}
