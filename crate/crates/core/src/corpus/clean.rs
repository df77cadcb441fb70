//! Text normalization: lowercasing, contact-detail scrubbing, the
//! sentence-level relevance filter and the coarse English gate.

use once_cell::sync::Lazy;
use regex::{Captures, Regex};
use std::collections::HashSet;

static URL_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?:[a-z][a-z0-9+.\-]*://|www\.)\S*").expect("url pattern"));
static EMAIL_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"\S+@\S+\.\S+").expect("email pattern"));
// Candidate phone spans; the digit count is checked in the replacer.
static PHONE_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"\+?\(?\d[\d\s().\-+]*\d\)?").expect("phone pattern"));

/// Minimum number of digits for a span to count as a phone number.
pub const PHONE_MIN_DIGITS: usize = 7;

static RELEVANCE_CUES: Lazy<Vec<Vec<String>>> = Lazy::new(|| {
    data_lines(include_str!("../../data/relevance_cues.txt"))
        .map(|cue| cue.split_whitespace().map(str::to_string).collect())
        .collect()
});

static STOPWORDS: Lazy<HashSet<&'static str>> =
    Lazy::new(|| data_lines(include_str!("../../data/stopwords.txt")).collect());

/// Share of basic-Latin letters among all letters required by [`is_target_language`].
pub const LATIN_RATIO_THRESHOLD: f64 = 0.9;
/// Stopword occurrences required by [`is_target_language`].
pub const MIN_STOPWORD_HITS: usize = 3;

pub(crate) fn data_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

/// Lowercase, scrub URLs, emails and phone numbers, and collapse whitespace.
pub fn clean_text(raw: &str) -> String {
    let lowered = raw.to_lowercase();
    let no_urls = URL_RE.replace_all(&lowered, " ");
    let no_emails = EMAIL_RE.replace_all(&no_urls, " ");
    let no_phones = PHONE_RE.replace_all(&no_emails, |caps: &Captures| {
        let span = &caps[0];
        if span.chars().filter(char::is_ascii_digit).count() >= PHONE_MIN_DIGITS {
            " ".to_string()
        } else {
            span.to_string()
        }
    });
    collapse_whitespace(&no_phones)
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Split cleaned text into sentences on `.`, `?`, `!` or `;` followed by
/// whitespace (or end of text). Terminators stay with their sentence.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '?' | '!' | ';') {
            let at_boundary = match chars.peek() {
                None => true,
                Some((_, next)) => next.is_whitespace(),
            };
            if at_boundary {
                let end = i + c.len_utf8();
                let sentence = text[start..end].trim();
                if !sentence.is_empty() {
                    out.push(sentence);
                }
                start = end;
            }
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

/// Word tokens of a sentence with surrounding punctuation stripped.
fn cue_words(sentence: &str) -> Vec<&str> {
    sentence
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .collect()
}

fn contains_phrase(words: &[&str], phrase: &[String]) -> bool {
    !phrase.is_empty()
        && words.len() >= phrase.len()
        && words
            .windows(phrase.len())
            .any(|w| w.iter().zip(phrase).all(|(a, b)| *a == b))
}

/// True when the sentence matches one of the shipped benefits/boilerplate cues.
pub fn is_irrelevant_sentence(sentence: &str) -> bool {
    let words = cue_words(sentence);
    RELEVANCE_CUES.iter().any(|cue| contains_phrase(&words, cue))
}

/// Drop benefits, perks and company-boilerplate sentences from a cleaned
/// description, keeping the remaining sentences in order.
pub fn filter_relevant_sentences(description: &str) -> String {
    split_sentences(description)
        .into_iter()
        .filter(|s| !is_irrelevant_sentence(s))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Coarse English gate: at least 90% of letters are basic Latin and at least
/// three stopword occurrences are present.
pub fn is_target_language(text: &str) -> bool {
    let (mut letters, mut latin) = (0usize, 0usize);
    for c in text.chars().filter(|c| c.is_alphabetic()) {
        letters += 1;
        if c.is_ascii_alphabetic() {
            latin += 1;
        }
    }
    if letters == 0 || (latin as f64) < LATIN_RATIO_THRESHOLD * letters as f64 {
        return false;
    }
    let hits = text
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| STOPWORDS.contains(w.as_str()))
        .count();
    hits >= MIN_STOPWORD_HITS
}
