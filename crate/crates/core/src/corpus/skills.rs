//! Gazetteer-based skill extraction (longest match, word aligned).

use super::clean::data_lines;
use super::CorpusError;
use std::collections::{HashMap, HashSet};
use std::path::Path;

/// A fixed lexicon of lowercase skill surface forms.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: Vec<String>,
    // word sequence of each entry -> entry index
    lookup: HashMap<Vec<String>, usize>,
    max_words: usize,
}

/// Characters that end a word and also block matches from spanning across them.
fn is_separator(c: char) -> bool {
    matches!(c, ',' | ';' | ':' | '!' | '?' | '(' | ')' | '[' | ']' | '{' | '}' | '"' | '|')
}

/// Split text into segments that a skill may not cross, each a list of words.
fn segments(text: &str) -> Vec<Vec<&str>> {
    let mut out = Vec::new();
    for segment in text.split(is_separator) {
        let mut words = Vec::new();
        for raw in segment.split_whitespace() {
            // a trailing sentence period also closes the segment
            let closes = raw.ends_with('.');
            let word = raw.trim_end_matches('.').trim_start_matches(['\'', '.']);
            let word = word.trim_end_matches('\'');
            if !word.is_empty() {
                words.push(word);
            }
            if closes && !words.is_empty() {
                out.push(std::mem::take(&mut words));
            }
        }
        if !words.is_empty() {
            out.push(words);
        }
    }
    out
}

impl Gazetteer {
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut gazetteer = Gazetteer::default();
        for entry in entries {
            gazetteer.insert(entry.as_ref());
        }
        gazetteer
    }

    /// The lexicon shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(include_str!("../../data/skills.txt"))
    }

    /// Parse the text format: one skill per line, `#` comments allowed.
    pub fn parse(text: &str) -> Self {
        Self::new(data_lines(text))
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
        Ok(Self::parse(&text))
    }

    fn insert(&mut self, entry: &str) {
        let normalized = entry.trim().to_lowercase();
        let words: Vec<String> = normalized.split_whitespace().map(str::to_string).collect();
        if words.is_empty() || self.lookup.contains_key(&words) {
            return;
        }
        self.max_words = self.max_words.max(words.len());
        self.lookup.insert(words.clone(), self.entries.len());
        self.entries.push(words.join(" "));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, skill: &str) -> bool {
        let words: Vec<String> = skill.split_whitespace().map(str::to_string).collect();
        self.lookup.contains_key(&words)
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    /// Serialize in the one-skill-per-line text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(entry);
            out.push('\n');
        }
        out
    }
}

/// Find gazetteer entries as longest-match, non-overlapping, word-aligned
/// spans, in order of first appearance, without repeats.
pub fn extract_skills(description: &str, gazetteer: &Gazetteer) -> Result<Vec<String>, CorpusError> {
    if gazetteer.is_empty() {
        return Err(CorpusError::EmptyGazetteer);
    }
    let mut found = Vec::new();
    let mut seen = HashSet::new();
    let mut key: Vec<String> = Vec::with_capacity(gazetteer.max_words);
    for words in segments(description) {
        let mut i = 0;
        while i < words.len() {
            let longest = gazetteer.max_words.min(words.len() - i);
            let mut matched = None;
            for n in (1..=longest).rev() {
                key.clear();
                key.extend(words[i..i + n].iter().map(|w| w.to_string()));
                if let Some(&idx) = gazetteer.lookup.get(&key) {
                    matched = Some((idx, n));
                    break;
                }
            }
            match matched {
                Some((idx, n)) => {
                    if seen.insert(idx) {
                        found.push(gazetteer.entries[idx].clone());
                    }
                    i += n;
                }
                None => i += 1,
            }
        }
    }
    Ok(found)
}
