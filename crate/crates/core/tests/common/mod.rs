#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use titlenorm::encoder::{EncoderConfig, EncoderParams, TensorKind};
use titlenorm::tokenizer::{encode_skills, encode_title, EncodedInput, Vocabulary};
use titlenorm::training::{backward, batch_loss, TrainConfig};

/// vocab 12 (5 specials + 7 words), d=8, one layer, two heads, p=4.
pub fn tiny_config() -> EncoderConfig {
    EncoderConfig {
        vocab_size: 12,
        hidden_dim: 8,
        num_layers: 1,
        num_heads: 2,
        ffn_dim: 16,
        max_positions: 128,
        pooled_dim: 4,
        dropout_rate: 0.0,
        init_seed: 0,
    }
}

pub fn tiny_vocab() -> Vocabulary {
    let v = Vocabulary::build(&["data engineer nurse sql spark care triage"], 1).unwrap();
    assert_eq!(v.len(), 12);
    v
}

/// Three pairs; one title is padded so masking is exercised.
pub fn tiny_batch(vocab: &Vocabulary) -> Vec<(EncodedInput, EncodedInput)> {
    vec![
        (encode_title("data engineer", vocab), encode_skills(&["sql", "spark"], vocab).unwrap()),
        (encode_title("nurse", vocab).padded(6), encode_skills(&["care", "triage", "sql"], vocab).unwrap()),
        (encode_title("engineer spark", vocab), encode_skills(&["spark data"], vocab).unwrap()),
    ]
}

/// Parameters with O(1) entries so every path carries signal; layer-norm
/// gains sit near 1.
pub fn spread_params(config: &EncoderConfig, seed: u64) -> EncoderParams<f64> {
    let mut p = EncoderParams::<f64>::zeros(config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in p.tensors_mut() {
        let gain = t.name.ends_with(".gain");
        for x in t.data.iter_mut() {
            let u: f64 = rng.random_range(-0.5..0.5);
            *x = if gain { 1.0 + u } else { u };
        }
        let _ = t.kind == TensorKind::Bias;
    }
    p
}

pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst: String,
    pub checked: usize,
}

/// Central differences over every parameter entry, compared with the
/// analytic gradient. Relative error is `|a - n| / max(|a|, |n|, floor)`.
pub fn grad_check(
    params: &EncoderParams<f64>,
    batch: &[(EncodedInput, EncodedInput)],
    config: &TrainConfig,
    eps: f64,
    floor: f64,
) -> GradCheck {
    let (_, analytic) = backward(params, batch, config).unwrap();
    let analytic: Vec<(String, Vec<f64>)> =
        analytic.tensors().iter().map(|t| (t.name.clone(), t.data.to_vec())).collect();
    let mut work = params.clone();
    let mut out = GradCheck { max_rel_error: 0.0, worst: String::new(), checked: 0 };
    let n_tensors = analytic.len();
    for ti in 0..n_tensors {
        let len = analytic[ti].1.len();
        for k in 0..len {
            let orig = work.tensors()[ti].data[k];
            set(&mut work, ti, k, orig + eps);
            let up: f64 = batch_loss(&work, batch, config).unwrap();
            set(&mut work, ti, k, orig - eps);
            let down: f64 = batch_loss(&work, batch, config).unwrap();
            set(&mut work, ti, k, orig);
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[ti].1[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            if rel > out.max_rel_error {
                out.max_rel_error = rel;
                out.worst = format!("{}[{k}]: analytic {a:e}, numeric {numeric:e}", analytic[ti].0);
            }
            out.checked += 1;
        }
    }
    out
}

fn set(p: &mut EncoderParams<f64>, tensor: usize, k: usize, v: f64) {
    p.tensors_mut()[tensor].data[k] = v;
}

/// Brute-force similarity oracle for a batch of row vectors.
pub fn pairwise_dots(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), b.nrows()), |(i, j)| {
        (0..a.ncols()).map(|c| a[[i, c]] * b[[j, c]]).sum()
    })
}
