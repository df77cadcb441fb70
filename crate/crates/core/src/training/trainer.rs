use super::backprop::{backward_seeded, batch_loss};
use super::batching::make_batches;
use super::optimizer::{optimizer_step, AdamWState};
use super::{splitmix64, TrainConfig, TrainPair, TrainingError};
use crate::corpus::{clean_text, JobRecord};
use crate::encoder::{embed, EmbedMode, Embedding, EncoderParams};
use crate::tokenizer::{EncodedInput, Vocabulary};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub loss: f64,
    pub batch_size: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub step: usize,
    pub loss: Option<f64>,
    pub recall_at_1: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
pub enum LogEvent {
    Step(StepRecord),
    Validation(ValidationRecord),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub events: Vec<LogEvent>,
}

impl TrainLog {
    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.events.iter().filter_map(|e| match e {
            LogEvent::Step(s) => Some(s),
            _ => None,
        })
    }

    pub fn validations(&self) -> impl Iterator<Item = &ValidationRecord> {
        self.events.iter().filter_map(|e| match e {
            LogEvent::Validation(v) => Some(v),
            _ => None,
        })
    }

    pub fn step_losses(&self) -> Vec<f64> {
        self.steps().map(|s| s.loss).collect()
    }

    /// Mean loss over the first `window` steps.
    pub fn initial_mean_loss(&self, window: usize) -> Option<f64> {
        let l = self.step_losses();
        let w = window.min(l.len());
        (w > 0).then(|| l[..w].iter().sum::<f64>() / w as f64)
    }

    /// Mean loss over the last `window` steps.
    pub fn final_mean_loss(&self, window: usize) -> Option<f64> {
        let l = self.step_losses();
        let w = window.min(l.len());
        (w > 0).then(|| l[l.len() - w..].iter().sum::<f64>() / w as f64)
    }

    /// Mean loss over every step of `epoch`.
    pub fn epoch_mean_loss(&self, epoch: usize) -> Option<f64> {
        let l: Vec<f64> = self.steps().filter(|s| s.epoch == epoch).map(|s| s.loss).collect();
        (!l.is_empty()).then(|| l.iter().sum::<f64>() / l.len() as f64)
    }

    /// The log with wall-clock fields zeroed, for determinism checks.
    pub fn without_timings(&self) -> TrainLog {
        let events = self
            .events
            .iter()
            .cloned()
            .map(|e| match e {
                LogEvent::Step(s) => LogEvent::Step(StepRecord { wall_ms: 0.0, ..s }),
                LogEvent::Validation(v) => LogEvent::Validation(ValidationRecord { wall_ms: 0.0, ..v }),
            })
            .collect();
        TrainLog { events }
    }

    pub fn to_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("log events serialize") + "\n")
            .collect()
    }

    pub fn write_jsonl(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_jsonl())
    }
}

/// Title-mode retrieval probe: each query's gold is an index into `labels`.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub labels: Vec<String>,
    pub queries: Vec<(String, usize)>,
}

impl Probe {
    /// Labels are the distinct cleaned normalized titles; records without
    /// one are skipped.
    pub fn from_records(records: &[JobRecord]) -> Self {
        let mut labels: Vec<String> = Vec::new();
        let mut ids: HashMap<String, usize> = HashMap::new();
        let mut queries = Vec::new();
        for r in records {
            let Some(gold) = r.normalized_title.as_deref().map(clean_text).filter(|g| !g.is_empty()) else {
                continue;
            };
            let id = *ids.entry(gold.clone()).or_insert_with(|| {
                labels.push(gold);
                labels.len() - 1
            });
            queries.push((r.title.clone(), id));
        }
        Probe { labels, queries }
    }
}

fn argmax(query: &Embedding, entries: &[Embedding]) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, e) in entries.iter().enumerate() {
        let s = query.dot(e);
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

fn embed_all(
    params: &EncoderParams<f32>,
    vocab: &Vocabulary,
    records: &[JobRecord],
    mode: EmbedMode,
) -> Result<Vec<Embedding>, TrainingError> {
    records
        .par_iter()
        .map(|r| embed(params, vocab, r, mode).map_err(TrainingError::from))
        .collect()
}

fn probe_recall(params: &EncoderParams<f32>, vocab: &Vocabulary, probe: &Probe) -> Result<Option<f64>, TrainingError> {
    if probe.queries.is_empty() || probe.labels.is_empty() {
        return Ok(None);
    }
    let labels: Vec<JobRecord> = probe.labels.iter().map(|l| JobRecord::new(l.as_str(), vec![])).collect();
    let queries: Vec<JobRecord> = probe.queries.iter().map(|(q, _)| JobRecord::new(q.as_str(), vec![])).collect();
    let index = embed_all(params, vocab, &labels, EmbedMode::Title)?;
    let q = embed_all(params, vocab, &queries, EmbedMode::Title)?;
    let hits = q.iter().zip(&probe.queries).filter(|(e, (_, gold))| argmax(e, &index) == *gold).count();
    Ok(Some(hits as f64 / q.len() as f64))
}

/// Title -> skills Recall@1 inside the validation split: each distinct key
/// contributes its first skill list to the index.
fn pair_recall(params: &EncoderParams<f32>, vocab: &Vocabulary, pairs: &[&TrainPair]) -> Result<Option<f64>, TrainingError> {
    let mut seen = HashMap::new();
    let mut entries: Vec<&TrainPair> = Vec::new();
    for p in pairs {
        seen.entry(p.key.as_str()).or_insert_with(|| {
            entries.push(p);
        });
    }
    if entries.len() < 2 {
        return Ok(None);
    }
    let skills: Vec<JobRecord> = entries.iter().map(|p| JobRecord::new(p.title.as_str(), p.skills.clone())).collect();
    let titles: Vec<JobRecord> = pairs.iter().map(|p| JobRecord::new(p.title.as_str(), vec![])).collect();
    let index = embed_all(params, vocab, &skills, EmbedMode::Skills)?;
    let q = embed_all(params, vocab, &titles, EmbedMode::Title)?;
    let hits = q.iter().zip(pairs).filter(|(e, p)| entries[argmax(e, &index)].key == p.key).count();
    Ok(Some(hits as f64 / q.len() as f64))
}

struct Split<'a> {
    dataset: &'a [TrainPair],
    encoded: &'a [(EncodedInput, EncodedInput)],
    validation: Vec<usize>,
    train: Vec<usize>,
}

impl Split<'_> {
    fn batch(&self, ids: &[usize]) -> Vec<(EncodedInput, EncodedInput)> {
        ids.iter().map(|&i| self.encoded[i].clone()).collect()
    }

    fn key(&self, i: usize) -> &str {
        &self.dataset[i].key
    }
}

fn validate(
    params: &EncoderParams<f32>,
    vocab: &Vocabulary,
    split: &Split<'_>,
    config: &TrainConfig,
    probe: Option<&Probe>,
    step: usize,
) -> Result<ValidationRecord, TrainingError> {
    let start = Instant::now();
    let batches = make_batches(&split.validation, |i| split.key(i), config.batch_size);
    let loss = if batches.is_empty() {
        None
    } else {
        let mut total = 0.0;
        for b in &batches {
            total += batch_loss(params, &split.batch(b), config)? as f64;
        }
        Some(total / batches.len() as f64)
    };
    let recall_at_1 = match probe {
        Some(p) => probe_recall(params, vocab, p)?,
        None => {
            let pairs: Vec<&TrainPair> = split.validation.iter().map(|&i| &split.dataset[i]).collect();
            pair_recall(params, vocab, &pairs)?
        }
    };
    Ok(ValidationRecord { step, loss, recall_at_1, wall_ms: start.elapsed().as_secs_f64() * 1e3 })
}

pub fn train(
    params: EncoderParams<f32>,
    vocab: &Vocabulary,
    dataset: &[TrainPair],
    config: &TrainConfig,
) -> Result<(EncoderParams<f32>, TrainLog), TrainingError> {
    train_with(params, vocab, dataset, config, None, |_, _| Ok(()))
}

/// Train for `config.epochs` epochs. Every `checkpoint_every` steps (and
/// after the last step) the model is validated; `on_checkpoint` runs at the
/// interval points only.
pub fn train_with<F>(
    mut params: EncoderParams<f32>,
    vocab: &Vocabulary,
    dataset: &[TrainPair],
    config: &TrainConfig,
    probe: Option<&Probe>,
    mut on_checkpoint: F,
) -> Result<(EncoderParams<f32>, TrainLog), TrainingError>
where
    F: FnMut(usize, &EncoderParams<f32>) -> Result<(), TrainingError>,
{
    config.validate()?;
    let b = config.batch_size;
    let too_small = || TrainingError::DatasetTooSmall { size: dataset.len(), batch_size: b };
    if dataset.len() < b {
        return Err(too_small());
    }
    for (i, pair) in dataset.iter().enumerate() {
        if pair.skills.iter().all(|s| clean_text(s).is_empty()) {
            return Err(TrainingError::EmptySkills(i));
        }
    }
    let encoded: Vec<(EncodedInput, EncodedInput)> =
        dataset.par_iter().map(|p| p.encode(vocab)).collect::<Result<_, _>>()?;

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.shuffle_seed));
    let mut n_val = (dataset.len() as f64 * config.validation_fraction).floor() as usize;
    n_val = n_val.min(dataset.len() - b);
    let split = Split {
        dataset,
        encoded: &encoded,
        validation: order[..n_val].to_vec(),
        train: order[n_val..].to_vec(),
    };

    let dropout_base = splitmix64(params.config.init_seed ^ 0xd1b5_4a32_d192_ed03);
    let mut state = AdamWState::new(&params.config);
    let mut log = TrainLog::default();
    let mut step = 0usize;
    let mut last_validated = 0usize;
    for epoch in 0..config.epochs {
        let mut ids = split.train.clone();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(splitmix64(config.shuffle_seed.wrapping_add(epoch as u64 + 1))));
        for batch_ids in make_batches(&ids, |i| split.key(i), b) {
            step += 1;
            let start = Instant::now();
            let batch = split.batch(&batch_ids);
            let seed = (params.config.dropout_rate > 0.0).then(|| splitmix64(dropout_base ^ step as u64));
            let (loss, grads) = backward_seeded(&params, &batch, config, seed)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(TrainingError::NonFiniteGradient { step });
            }
            optimizer_step(&mut params, &grads, &mut state, config)?;
            if !params.is_finite() {
                return Err(TrainingError::NonFiniteGradient { step });
            }
            log.events.push(LogEvent::Step(StepRecord {
                step,
                epoch,
                loss: loss as f64,
                batch_size: batch.len(),
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            }));
            if config.checkpoint_every > 0 && step % config.checkpoint_every == 0 {
                log.events.push(LogEvent::Validation(validate(&params, vocab, &split, config, probe, step)?));
                last_validated = step;
                on_checkpoint(step, &params)?;
            }
        }
    }
    if step == 0 {
        return Err(too_small());
    }
    if last_validated != step {
        log.events.push(LogEvent::Validation(validate(&params, vocab, &split, config, probe, step)?));
    }
    Ok((params, log))
}
