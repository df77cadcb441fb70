//! Job postings: cleaning, relevance filtering, skill extraction, JSONL I/O,
//! synthetic corpora and dataset statistics.

mod clean;
mod io;
mod skills;
mod stats;
mod synth;

pub use clean::{
    clean_text, filter_relevant_sentences, is_irrelevant_sentence, is_target_language,
    split_sentences, LATIN_RATIO_THRESHOLD, MIN_STOPWORD_HITS, PHONE_MIN_DIGITS,
};
pub use io::{load_benchmark, read_records, write_records, LoadReport, LoadWarning};
pub use skills::{extract_skills, Gazetteer};
pub use stats::{compute_stats, CorpusStats, SkillBuckets};
pub use synth::{generate_synthetic, Family, RecordTruth, SynthConfig, SyntheticCorpus, Taxonomy};

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed line {0}")]
    MalformedLine(usize),
    #[error("{failed} of {total} lines malformed")]
    TooManyMalformed { failed: usize, total: usize },
    #[error("gazetteer has no entries")]
    EmptyGazetteer,
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    #[default]
    Vacancy,
    Resume,
    Benchmark,
    Synthetic,
}

/// One raw or benchmark posting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub skills: Vec<String>,
    #[serde(default)]
    pub normalized_title: Option<String>,
    #[serde(default)]
    pub esco_code: Option<String>,
    #[serde(default)]
    pub source: Source,
}

impl JobRecord {
    pub fn new(title: impl Into<String>, skills: Vec<String>) -> Self {
        JobRecord {
            title: title.into(),
            description: String::new(),
            skills,
            normalized_title: None,
            esco_code: None,
            source: Source::Vacancy,
        }
    }

    /// Enforce the record invariants: drop empty and repeated skills (first
    /// occurrence wins), reject empty titles and codes without a normalized title.
    pub fn validated(mut self) -> Result<Self, CorpusError> {
        if clean_text(&self.title).is_empty() {
            return Err(CorpusError::InvalidRecord("empty title".into()));
        }
        if self.esco_code.is_some() && self.normalized_title.is_none() {
            return Err(CorpusError::InvalidRecord(
                "esco_code present without normalized_title".into(),
            ));
        }
        self.skills = dedup_skills(std::mem::take(&mut self.skills));
        Ok(self)
    }

    /// First digit of the ESCO code, naming the occupation family.
    pub fn esco_family(&self) -> Option<char> {
        self.esco_code
            .as_deref()
            .and_then(|c| c.trim().chars().next())
            .filter(char::is_ascii_digit)
    }

    /// Training-pair deduplication key: cleaned title plus sorted skills.
    pub fn dedup_key(&self) -> (String, Vec<String>) {
        let mut skills: Vec<String> = self.skills.iter().map(|s| clean_text(s)).collect();
        skills.sort();
        (clean_text(&self.title), skills)
    }
}

fn dedup_skills(skills: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    skills
        .into_iter()
        .filter(|s| !s.trim().is_empty())
        .filter(|s| seen.insert(s.clone()))
        .collect()
}

/// Remove records whose (clean title, sorted skills) key was already seen.
pub fn dedup_records(records: Vec<JobRecord>) -> Vec<JobRecord> {
    let mut seen = HashSet::new();
    records.into_iter().filter(|r| seen.insert(r.dedup_key())).collect()
}
