use super::checkpoint::checkpoint_bytes;
use super::forward::forward;
use super::params::EncoderParams;
use super::pooling::{pool_skills, pool_title};
use super::{EmbedMode, Embedding, EncoderError, Scalar, TextEncoder};
use crate::corpus::{clean_text, JobRecord};
use crate::tokenizer::{encode_skills, encode_title, Vocabulary};
use sha2::{Digest, Sha256};

fn clean_skills(record: &JobRecord) -> Vec<String> {
    record
        .skills
        .iter()
        .map(|s| clean_text(s))
        .filter(|s| !s.is_empty())
        .collect()
}

/// Embed a posting in one of the three modes. Combined mode averages the
/// title and skills embeddings and falls back to the title when the record
/// has no skills.
pub fn embed<T: Scalar>(
    params: &EncoderParams<T>,
    vocab: &Vocabulary,
    record: &JobRecord,
    mode: EmbedMode,
) -> Result<Embedding, EncoderError> {
    let title = || {
        let input = encode_title(&clean_text(&record.title), vocab);
        let hidden = forward(params, &input)?;
        pool_title(params, &hidden, &input)
    };
    let skills = |list: &[String]| {
        let input = encode_skills(list, vocab)?;
        let hidden = forward(params, &input)?;
        pool_skills(params, &hidden, &input)
    };
    match mode {
        EmbedMode::Title => title(),
        EmbedMode::Skills => {
            let list = clean_skills(record);
            if list.is_empty() {
                return Err(EncoderError::NoSkills);
            }
            skills(&list)
        }
        EmbedMode::Combined => {
            let list = clean_skills(record);
            let t = title()?;
            if list.is_empty() {
                return Ok(Embedding { mode: EmbedMode::Combined, ..t });
            }
            Embedding::combine(&t, &skills(&list)?)
        }
    }
}

/// A trained (or freshly initialized) encoder with its vocabulary.
#[derive(Debug, Clone)]
pub struct DualEncoder {
    name: String,
    params: EncoderParams<f32>,
    vocab: Vocabulary,
    fingerprint: [u8; 32],
}

impl DualEncoder {
    pub fn new(params: EncoderParams<f32>, vocab: Vocabulary) -> Result<Self, EncoderError> {
        if vocab.len() != params.config.vocab_size {
            return Err(EncoderError::VocabMismatch { vocab: vocab.len(), config: params.config.vocab_size });
        }
        let fingerprint = Sha256::digest(checkpoint_bytes(&params)).into();
        Ok(DualEncoder { name: "dual-encoder".into(), params, vocab, fingerprint })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn params(&self) -> &EncoderParams<f32> {
        &self.params
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }
}

impl TextEncoder for DualEncoder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.params.config.pooled_dim
    }

    fn fingerprint(&self) -> [u8; 32] {
        self.fingerprint
    }

    fn embed(&self, record: &JobRecord, mode: EmbedMode) -> Result<Embedding, EncoderError> {
        embed(&self.params, &self.vocab, record, mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::EncoderConfig;

    fn encoder() -> DualEncoder {
        let vocab = Vocabulary::build(&["senior data engineer sql spark machine learning"], 1).unwrap();
        let cfg = EncoderConfig { init_seed: 4, ..EncoderConfig::new(vocab.len()) };
        DualEncoder::new(EncoderParams::init(&cfg).unwrap(), vocab).unwrap()
    }

    fn record(skills: &[&str]) -> JobRecord {
        JobRecord::new("Senior Data Engineer", skills.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn modes() {
        let enc = encoder();
        let r = record(&["sql", "machine learning"]);
        for mode in [EmbedMode::Title, EmbedMode::Skills, EmbedMode::Combined] {
            let e = enc.embed(&r, mode).unwrap();
            assert!(e.is_unit(), "{mode}: {}", e.norm());
            assert_eq!(e.dim(), 32);
            assert_eq!(e.mode, mode);
        }
        let t = enc.embed(&r, EmbedMode::Title).unwrap();
        let s = enc.embed(&r, EmbedMode::Skills).unwrap();
        let c = enc.embed(&r, EmbedMode::Combined).unwrap();
        assert_eq!(c, Embedding::combine(&t, &s).unwrap());
    }

    #[test]
    fn combined_falls_back_to_title() {
        let enc = encoder();
        let r = record(&[]);
        let t = enc.embed(&r, EmbedMode::Title).unwrap();
        let c = enc.embed(&r, EmbedMode::Combined).unwrap();
        assert_eq!(t.values, c.values);
        assert!(matches!(enc.embed(&r, EmbedMode::Skills), Err(EncoderError::NoSkills)));
    }

    #[test]
    fn vocab_size_must_match() {
        let enc = encoder();
        let other = Vocabulary::build(&["a b"], 1).unwrap();
        assert!(matches!(
            DualEncoder::new(enc.params().clone(), other),
            Err(EncoderError::VocabMismatch { .. })
        ));
    }
}
