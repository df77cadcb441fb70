//! Averaged static word vectors, the FastText/BERT-average style baseline.

use super::{EmbedMode, Embedding, EncoderError, TextEncoder};
use crate::corpus::{clean_text, JobRecord};
use crate::tokenizer::Vocabulary;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

/// A word -> vector table aligned with a vocabulary.
#[derive(Debug, Clone)]
pub struct StaticTable {
    vocab: Vocabulary,
    vectors: Array2<f32>,
    seed: u64,
}

impl StaticTable {
    /// Standard-normal vectors drawn from `seed`.
    pub fn random(vocab: Vocabulary, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vectors = Array2::from_shape_fn((vocab.len(), dim), |_| {
            let x: f64 = StandardNormal.sample(&mut rng);
            x as f32
        });
        StaticTable { vocab, vectors, seed }
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn vector(&self, word: &str) -> ndarray::ArrayView1<'_, f32> {
        self.vectors.row(self.vocab.id(word) as usize)
    }

    fn fingerprint(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"static-table");
        h.update(self.seed.to_le_bytes());
        h.update((self.dim() as u64).to_le_bytes());
        h.update(self.vocab.hash().as_bytes());
        h.finalize().into()
    }
}

/// Mean of the word vectors of the title (skills mode: of the skills;
/// combined: of both), L2-normalized. OOV words use the `[UNK]` row.
pub fn baseline_static_embed(
    record: &JobRecord,
    mode: EmbedMode,
    table: &StaticTable,
) -> Result<Embedding, EncoderError> {
    let title = clean_text(&record.title);
    let skills: Vec<String> = record.skills.iter().map(|s| clean_text(s)).collect();
    let mut words: Vec<&str> = Vec::new();
    if matches!(mode, EmbedMode::Title | EmbedMode::Combined) {
        words.extend(title.split_whitespace());
    }
    if matches!(mode, EmbedMode::Skills | EmbedMode::Combined) {
        words.extend(skills.iter().flat_map(|s| s.split_whitespace()));
    }
    if words.is_empty() {
        return Err(match mode {
            EmbedMode::Skills => EncoderError::NoSkills,
            _ => EncoderError::EmptyInput,
        });
    }
    // Summing in sorted order makes the result bit-identical under any
    // permutation of the words.
    words.sort_unstable();
    let mut sum = vec![0.0f64; table.dim()];
    for w in &words {
        for (s, &v) in sum.iter_mut().zip(table.vector(w).iter()) {
            *s += v as f64;
        }
    }
    let n = words.len() as f64;
    Embedding::normalized(sum.into_iter().map(|s| s / n).collect(), mode)
}

#[derive(Debug, Clone)]
pub struct StaticBaseline {
    name: String,
    table: StaticTable,
    fingerprint: [u8; 32],
}

impl StaticBaseline {
    pub fn new(name: impl Into<String>, table: StaticTable) -> Self {
        let fingerprint = table.fingerprint();
        StaticBaseline { name: name.into(), table, fingerprint }
    }
}

impl TextEncoder for StaticBaseline {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.table.dim()
    }

    fn fingerprint(&self) -> [u8; 32] {
        self.fingerprint
    }

    fn embed(&self, record: &JobRecord, mode: EmbedMode) -> Result<Embedding, EncoderError> {
        baseline_static_embed(record, mode, &self.table)
    }
}
