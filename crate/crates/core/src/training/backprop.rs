use super::loss::loss_and_grad;
use super::{splitmix64, TrainConfig, TrainingError};
use crate::encoder::{
    backward_stack, forward_cached, pool_backward, pool_rows, skill_rows, title_rows, EncoderParams, ForwardCache,
    PoolTrace, Scalar,
};
use crate::tokenizer::EncodedInput;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Branch<T> {
    cache: ForwardCache<T>,
    trace: PoolTrace<T>,
}

/// Sequence `k` of a batch of `b` pairs: titles first, then skill lists.
fn sequence(batch: &[(EncodedInput, EncodedInput)], k: usize) -> (&EncodedInput, bool) {
    let b = batch.len();
    if k < b {
        (&batch[k].0, true)
    } else {
        (&batch[k - b].1, false)
    }
}

fn run_forward<T: Scalar>(
    params: &EncoderParams<T>,
    batch: &[(EncodedInput, EncodedInput)],
    dropout_seed: Option<u64>,
) -> Result<Vec<Branch<T>>, TrainingError> {
    (0..2 * batch.len())
        .into_par_iter()
        .map(|k| {
            let (input, is_title) = sequence(batch, k);
            let mut rng = dropout_seed.map(|s| ChaCha8Rng::seed_from_u64(splitmix64(s ^ k as u64)));
            let cache = forward_cached(params, input, rng.as_mut())?;
            let rows = if is_title { title_rows(input)? } else { skill_rows(input)? };
            let trace = pool_rows(params, &cache.output, rows)?;
            Ok(Branch { cache, trace })
        })
        .collect()
}

fn stack<T: Scalar>(branches: &[Branch<T>]) -> Array2<T> {
    let p = branches[0].trace.embedding.len();
    let mut out = Array2::zeros((branches.len(), p));
    for (mut row, b) in out.rows_mut().into_iter().zip(branches) {
        row.assign(&b.trace.embedding);
    }
    out
}

/// The batch loss without gradients (no dropout).
pub fn batch_loss<T: Scalar>(
    params: &EncoderParams<T>,
    batch: &[(EncodedInput, EncodedInput)],
    config: &TrainConfig,
) -> Result<T, TrainingError> {
    if batch.is_empty() {
        return Err(TrainingError::EmptyBatch);
    }
    let branches = run_forward(params, batch, None)?;
    let (titles, skills) = branches.split_at(batch.len());
    let m = stack(titles).dot(&stack(skills).t());
    Ok(loss_and_grad(&m, config.scale, config.bidirectional).0)
}

/// Loss and gradients with respect to every parameter (no dropout).
pub fn backward<T: Scalar>(
    params: &EncoderParams<T>,
    batch: &[(EncodedInput, EncodedInput)],
    config: &TrainConfig,
) -> Result<(T, EncoderParams<T>), TrainingError> {
    backward_seeded(params, batch, config, None)
}

/// As [`backward`], with dropout masks drawn from `dropout_seed` when the
/// encoder's dropout rate is positive. Per-sequence gradients are computed
/// in parallel and summed in sequence order, so results do not depend on
/// the thread count.
pub(crate) fn backward_seeded<T: Scalar>(
    params: &EncoderParams<T>,
    batch: &[(EncodedInput, EncodedInput)],
    config: &TrainConfig,
    dropout_seed: Option<u64>,
) -> Result<(T, EncoderParams<T>), TrainingError> {
    if batch.is_empty() {
        return Err(TrainingError::EmptyBatch);
    }
    let b = batch.len();
    let branches = run_forward(params, batch, dropout_seed)?;
    let (titles, skills) = branches.split_at(b);
    let t = stack(titles);
    let s = stack(skills);
    let (loss, dm) = loss_and_grad(&t.dot(&s.t()), config.scale, config.bidirectional);
    let dt = dm.dot(&s);
    let ds = dm.t().dot(&t);

    let per_sequence: Vec<EncoderParams<T>> = branches
        .par_iter()
        .enumerate()
        .map(|(k, branch)| {
            let d_embedding = if k < b { dt.row(k).to_owned() } else { ds.row(k - b).to_owned() };
            let mut grads = EncoderParams::zeros(&params.config);
            let seq_len = branch.cache.output.nrows();
            let d_hidden = pool_backward(params, &branch.trace, seq_len, &d_embedding, &mut grads);
            backward_stack(params, &branch.cache, d_hidden, &mut grads);
            grads
        })
        .collect();
    let mut total = EncoderParams::zeros(&params.config);
    for g in &per_sequence {
        total.add_assign(g);
    }
    Ok((loss, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::EncoderConfig;
    use crate::tokenizer::{encode_skills, encode_title, Vocabulary};

    fn setup() -> (EncoderParams<f64>, Vec<(EncodedInput, EncodedInput)>) {
        let vocab = Vocabulary::build(&["data engineer nurse sql spark care triage"], 1).unwrap();
        let cfg = EncoderConfig {
            hidden_dim: 8,
            num_heads: 2,
            ffn_dim: 16,
            pooled_dim: 4,
            num_layers: 1,
            init_seed: 3,
            ..EncoderConfig::new(vocab.len())
        };
        let pair = |t: &str, s: &[&str]| (encode_title(t, &vocab), encode_skills(s, &vocab).unwrap());
        let batch = vec![
            pair("data engineer", &["sql", "spark"]),
            pair("nurse", &["care", "triage"]),
            pair("engineer", &["spark"]),
        ];
        (EncoderParams::init(&cfg).unwrap(), batch)
    }

    #[test]
    fn single_pair_has_zero_loss_and_gradient() {
        let (p, batch) = setup();
        let (loss, grads) = backward(&p, &batch[..1], &TrainConfig::default()).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.tensors().iter().all(|t| t.data.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn loss_agrees_with_forward_only_path() {
        let (p, batch) = setup();
        let cfg = TrainConfig::default();
        let (loss, grads) = backward(&p, &batch, &cfg).unwrap();
        assert!((loss - batch_loss(&p, &batch, &cfg).unwrap()).abs() < 1e-12);
        assert!(grads.is_finite());
        assert!(grads.tensors().iter().any(|t| t.data.iter().any(|&v| v != 0.0)));
    }

    #[test]
    fn thread_count_does_not_change_gradients() {
        let (p, batch) = setup();
        let cfg = TrainConfig::default();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| backward(&p.cast::<f32>(), &batch, &cfg).unwrap())
        };
        let (l1, g1) = run(1);
        let (l4, g4) = run(4);
        assert_eq!(l1.to_bits(), l4.to_bits());
        for (a, b) in g1.tensors().iter().zip(g4.tensors()) {
            assert!(a.data.iter().zip(b.data).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
