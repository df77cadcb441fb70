//! Word-level vocabulary and the title / skills input encodings.
//!
//! Skills are encoded as `[CLS] ([SKILL] w..)* [SEP]`: one `[SKILL]` marker
//! before every retained skill, whose hidden states are later averaged.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use thiserror::Error;

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const CLS: u32 = 2;
pub const SEP: u32 = 3;
pub const SKILL: u32 = 4;
pub const NUM_SPECIALS: usize = 5;
pub const SPECIAL_TOKENS: [&str; NUM_SPECIALS] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[SKILL]"];

pub const TITLE_MAX_LEN: usize = 32;
pub const SKILLS_MAX_LEN: usize = 128;

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("min_frequency must be >= 1")]
    InvalidMinFrequency,
    #[error("token id {id} out of range for vocabulary of size {size}")]
    IdOutOfRange { id: u32, size: usize },
    #[error("skill list is empty")]
    EmptySkills,
    #[error("first skill needs {needed} tokens but only {budget} are available")]
    NoSkillFits { needed: usize, budget: usize },
    #[error("malformed vocabulary file: {0}")]
    MalformedVocab(String),
    #[error("vocabulary i/o failed")]
    Io(#[from] std::io::Error),
}

pub fn is_special(id: u32) -> bool {
    (id as usize) < NUM_SPECIALS && id != UNK
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
    min_frequency: usize,
}

impl Vocabulary {
    /// Keep every whitespace token occurring at least `min_frequency` times,
    /// ordered by descending frequency, ties lexicographically.
    pub fn build<S: AsRef<str>>(corpus: &[S], min_frequency: usize) -> Result<Self, TokenizerError> {
        if corpus.is_empty() {
            return Err(TokenizerError::EmptyCorpus);
        }
        if min_frequency < 1 {
            return Err(TokenizerError::InvalidMinFrequency);
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for text in corpus {
            for token in text.as_ref().split_whitespace() {
                *counts.entry(token).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(tok, n)| *n >= min_frequency && !SPECIAL_TOKENS.contains(tok))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let tokens = SPECIAL_TOKENS
            .iter()
            .map(|s| s.to_string())
            .chain(kept.into_iter().map(|(t, _)| t.to_string()));
        Ok(Self::from_tokens(tokens, min_frequency))
    }

    fn from_tokens(tokens: impl Iterator<Item = String>, min_frequency: usize) -> Self {
        let id_to_token: Vec<String> = tokens.collect();
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { token_to_id, id_to_token, min_frequency }
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn min_frequency(&self) -> usize {
        self.min_frequency
    }

    pub fn id(&self, token: &str) -> u32 {
        self.token_to_id.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    /// File form: one token per line, line number = id.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for token in &self.id_to_token {
            out.push_str(token);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, TokenizerError> {
        let tokens: Vec<String> = text.lines().map(str::to_string).collect();
        if tokens.len() < NUM_SPECIALS || tokens[..NUM_SPECIALS] != SPECIAL_TOKENS {
            return Err(TokenizerError::MalformedVocab(
                "first five lines must be the special tokens".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(TokenizerError::MalformedVocab(format!("bad token on line {}", i + 1)));
            }
            if !seen.insert(t) {
                return Err(TokenizerError::MalformedVocab(format!("duplicate token {t:?}")));
            }
        }
        Ok(Self::from_tokens(tokens.into_iter(), 1))
    }

    pub fn save(&self, path: &Path) -> Result<(), TokenizerError> {
        Ok(std::fs::write(path, self.to_text())?)
    }

    pub fn load(path: &Path) -> Result<Self, TokenizerError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 of the file form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    Title,
    Skills,
}

impl fmt::Display for InputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputMode::Title => "title",
            InputMode::Skills => "skills",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedInput {
    pub ids: Vec<u32>,
    pub mask: Vec<u8>,
    pub skill_positions: Vec<usize>,
    pub mode: InputMode,
}

impl EncodedInput {
    fn unpadded(ids: Vec<u32>, skill_positions: Vec<usize>, mode: InputMode) -> Self {
        let mask = vec![1; ids.len()];
        EncodedInput { ids, mask, skill_positions, mode }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of real (non-padding) positions.
    pub fn real_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m == 1).count()
    }

    /// Append `[PAD]` positions up to `len`.
    pub fn padded(&self, len: usize) -> Self {
        let mut out = self.clone();
        while out.ids.len() < len {
            out.ids.push(PAD);
            out.mask.push(0);
        }
        out
    }
}

/// `[CLS] words.. [SEP]`, truncated to [`TITLE_MAX_LEN`] keeping both markers.
pub fn encode_title(title: &str, vocab: &Vocabulary) -> EncodedInput {
    let mut ids = Vec::with_capacity(TITLE_MAX_LEN);
    ids.push(CLS);
    ids.extend(title.split_whitespace().take(TITLE_MAX_LEN - 2).map(|w| vocab.id(w)));
    ids.push(SEP);
    EncodedInput::unpadded(ids, Vec::new(), InputMode::Title)
}

/// `[CLS] ([SKILL] words..)* [SEP]` with whole-skill truncation at
/// [`SKILLS_MAX_LEN`]: encoding stops at the first skill that does not fit.
pub fn encode_skills<S: AsRef<str>>(skills: &[S], vocab: &Vocabulary) -> Result<EncodedInput, TokenizerError> {
    let words: Vec<Vec<&str>> = skills
        .iter()
        .map(|s| s.as_ref().split_whitespace().collect::<Vec<_>>())
        .filter(|w| !w.is_empty())
        .collect();
    if words.is_empty() {
        return Err(TokenizerError::EmptySkills);
    }
    let budget = SKILLS_MAX_LEN - 2;
    let mut ids = vec![CLS];
    let mut positions = Vec::new();
    for skill in &words {
        let needed = 1 + skill.len();
        if ids.len() - 1 + needed > budget {
            if positions.is_empty() {
                return Err(TokenizerError::NoSkillFits { needed, budget });
            }
            break;
        }
        positions.push(ids.len());
        ids.push(SKILL);
        ids.extend(skill.iter().map(|w| vocab.id(w)));
    }
    ids.push(SEP);
    Ok(EncodedInput::unpadded(ids, positions, InputMode::Skills))
}

/// Surface form of an id sequence with special tokens other than `[UNK]` omitted.
pub fn decode(ids: &[u32], vocab: &Vocabulary) -> Result<String, TokenizerError> {
    let mut out = Vec::with_capacity(ids.len());
    for &id in ids {
        let token = vocab
            .token(id)
            .ok_or(TokenizerError::IdOutOfRange { id, size: vocab.len() })?;
        if !is_special(id) {
            out.push(token);
        }
    }
    Ok(out.join(" "))
}
