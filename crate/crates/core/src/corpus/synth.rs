//! Seeded synthetic postings with recorded ground truth.
//!
//! A [`Taxonomy`] holds `families` occupation families. Each family owns a
//! pool of skills and a few synonymous title head phrases made of
//! pseudo-words; the first head phrase is the family's normalized title.
//! Titles are head phrases with an optional shared seniority modifier, so
//! titles of one family share no content word with each other, and only
//! co-occurring skills tie them together. Ambiguous pairs of families
//! additionally share one head phrase.

use super::{CorpusError, JobRecord, Source};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub families: usize,
    pub skills_per_family: usize,
    pub records_per_family: usize,
    pub min_skills_per_record: usize,
    pub max_skills_per_record: usize,
    /// Probability that a drawn skill comes from another family's pool.
    pub noise: f64,
    /// Synonymous head phrases per family (the first is the normalized title).
    pub title_variants: usize,
    /// Number of disjoint family pairs sharing one extra head phrase.
    pub ambiguous_pairs: usize,
    /// Probability of prefixing a seniority modifier to a title.
    pub modifier_rate: f64,
    /// Fraction of records whose description is written in Cyrillic.
    pub foreign_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            families: 10,
            skills_per_family: 8,
            records_per_family: 20,
            min_skills_per_record: 3,
            max_skills_per_record: 6,
            noise: 0.0,
            title_variants: 3,
            ambiguous_pairs: 0,
            modifier_rate: 0.5,
            foreign_rate: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let fail = |msg: String| Err(CorpusError::InvalidConfig(msg));
        if self.families < 2 {
            return fail(format!("families must be >= 2, got {}", self.families));
        }
        if self.skills_per_family < 4 {
            return fail(format!("skills_per_family must be >= 4, got {}", self.skills_per_family));
        }
        if self.records_per_family < 1 {
            return fail("records_per_family must be >= 1".into());
        }
        if self.min_skills_per_record < 1
            || self.min_skills_per_record > self.max_skills_per_record
            || self.max_skills_per_record > self.skills_per_family
        {
            return fail(format!(
                "need 1 <= min_skills_per_record ({}) <= max_skills_per_record ({}) <= skills_per_family ({})",
                self.min_skills_per_record, self.max_skills_per_record, self.skills_per_family
            ));
        }
        if self.title_variants < 1 {
            return fail("title_variants must be >= 1".into());
        }
        if 2 * self.ambiguous_pairs > self.families {
            return fail(format!(
                "ambiguous_pairs ({}) needs {} families",
                self.ambiguous_pairs,
                2 * self.ambiguous_pairs
            ));
        }
        for (name, p) in [
            ("noise", self.noise),
            ("modifier_rate", self.modifier_rate),
            ("foreign_rate", self.foreign_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub label: String,
    pub esco_code: String,
    /// Head phrases; `title_variants[0] == label`. Includes the shared
    /// ambiguous phrase, if any, as the last entry.
    pub title_variants: Vec<String>,
    pub ambiguous_variant: Option<String>,
    pub skills: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub families: Vec<Family>,
}

/// Ground truth recorded for each generated record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordTruth {
    pub family: usize,
    pub english: bool,
    /// Skills planted in the description, in planting order.
    pub planted_skills: Vec<String>,
    /// Per planted skill: drawn from another family's pool.
    pub contaminated: Vec<bool>,
    /// Title uses the head phrase shared with another family.
    pub ambiguous_title: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub records: Vec<JobRecord>,
    pub truth: Vec<RecordTruth>,
}

pub const MODIFIERS: [&str; 8] =
    ["senior", "junior", "lead", "principal", "assistant", "head", "chief", "trainee"];
const ROLE_NOUNS: [&str; 8] = [
    "specialist", "engineer", "manager", "analyst", "officer", "technician", "consultant",
    "coordinator",
];
const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

// Every word the description templates use; pseudo-words must avoid them.
const TEMPLATE_WORDS: &str = "the will join our group you work with and experience is required \
    knowledge of a plus we offer free lunch gym health insurance included team hands on \
    role in this daily use strong skills needed plus";

fn pseudo_word(rng: &mut ChaCha8Rng, used: &mut HashSet<String>) -> String {
    loop {
        let syllables = rng.random_range(3..=4);
        let mut w = String::with_capacity(2 * syllables);
        for _ in 0..syllables {
            w.push(*CONSONANTS.choose(rng).expect("non-empty") as char);
            w.push(*VOWELS.choose(rng).expect("non-empty") as char);
        }
        if used.insert(w.clone()) {
            return w;
        }
    }
}

fn used_words() -> HashSet<String> {
    TEMPLATE_WORDS
        .split_whitespace()
        .chain(MODIFIERS)
        .chain(ROLE_NOUNS)
        .map(str::to_string)
        .collect()
}

impl Taxonomy {
    pub fn generate(config: &SynthConfig, seed: u64) -> Result<Self, CorpusError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut used = used_words();
        let head = |rng: &mut ChaCha8Rng, used: &mut HashSet<String>| {
            let w = pseudo_word(rng, used);
            let role = ROLE_NOUNS.choose(rng).expect("non-empty");
            format!("{w} {role}")
        };
        let mut families = Vec::with_capacity(config.families);
        for f in 0..config.families {
            let title_variants: Vec<String> =
                (0..config.title_variants).map(|_| head(&mut rng, &mut used)).collect();
            let skills = (0..config.skills_per_family)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        format!("{} {}", pseudo_word(&mut rng, &mut used), pseudo_word(&mut rng, &mut used))
                    } else {
                        pseudo_word(&mut rng, &mut used)
                    }
                })
                .collect();
            families.push(Family {
                label: title_variants[0].clone(),
                esco_code: format!("{}{:03}", f % 10, f / 10),
                title_variants,
                ambiguous_variant: None,
                skills,
            });
        }
        for pair in 0..config.ambiguous_pairs {
            let shared = head(&mut rng, &mut used);
            for f in [2 * pair, 2 * pair + 1] {
                families[f].title_variants.push(shared.clone());
                families[f].ambiguous_variant = Some(shared.clone());
            }
        }
        Ok(Taxonomy { families })
    }

    /// Every skill of every family, for use as a gazetteer.
    pub fn all_skills(&self) -> Vec<String> {
        self.families.iter().flat_map(|f| f.skills.iter().cloned()).collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.families.iter().map(|f| f.label.clone()).collect()
    }

    /// Sample `records_per_family` records for every family.
    pub fn sample(&self, config: &SynthConfig, seed: u64) -> Result<SyntheticCorpus, CorpusError> {
        config.validate()?;
        if config.families != self.families.len() {
            return Err(CorpusError::InvalidConfig(format!(
                "taxonomy has {} families, config {}",
                self.families.len(),
                config.families
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..self.families.len())
            .flat_map(|f| std::iter::repeat_n(f, config.records_per_family))
            .collect();
        order.shuffle(&mut rng);

        let mut corpus = SyntheticCorpus { records: Vec::new(), truth: Vec::new() };
        for family in order {
            let (record, truth) = self.sample_one(config, family, &mut rng);
            corpus.records.push(record);
            corpus.truth.push(truth);
        }
        Ok(corpus)
    }

    fn sample_one(&self, config: &SynthConfig, f: usize, rng: &mut ChaCha8Rng) -> (JobRecord, RecordTruth) {
        let family = &self.families[f];
        let variant = family.title_variants.choose(rng).expect("non-empty").clone();
        let ambiguous_title = family.ambiguous_variant.as_ref() == Some(&variant);
        let title = if rng.random_bool(config.modifier_rate) {
            format!("{} {variant}", MODIFIERS.choose(rng).expect("non-empty"))
        } else {
            variant
        };

        let count = rng.random_range(config.min_skills_per_record..=config.max_skills_per_record);
        let own: Vec<&String> = family.skills.choose_multiple(rng, count).collect();
        let mut skills = Vec::with_capacity(count);
        let mut contaminated = Vec::with_capacity(count);
        for skill in own {
            if config.noise > 0.0 && rng.random_bool(config.noise) {
                let other = loop {
                    let g = rng.random_range(0..self.families.len());
                    if g != f {
                        break g;
                    }
                };
                let candidate = self.families[other].skills.choose(rng).expect("non-empty");
                if !skills.contains(candidate) {
                    skills.push(candidate.clone());
                    contaminated.push(true);
                    continue;
                }
            }
            if !skills.contains(skill) {
                skills.push(skill.clone());
                contaminated.push(false);
            }
        }

        let english = !rng.random_bool(config.foreign_rate);
        let description = if english {
            english_description(&title, &skills, rng)
        } else {
            foreign_description(skills.len())
        };
        let record = JobRecord {
            title,
            description,
            skills: skills.clone(),
            normalized_title: Some(family.label.clone()),
            esco_code: Some(family.esco_code.clone()),
            source: Source::Synthetic,
        };
        let truth = RecordTruth { family: f, english, planted_skills: skills, contaminated, ambiguous_title };
        (record, truth)
    }
}

fn english_description(title: &str, skills: &[String], rng: &mut ChaCha8Rng) -> String {
    let mut sentences = vec![format!("the {title} will join our group.")];
    for chunk in skills.chunks(3) {
        let list = match chunk {
            [one] => one.clone(),
            [init @ .., last] => format!("{} and {last}", init.join(", ")),
            [] => unreachable!(),
        };
        let sentence = match rng.random_range(0..3) {
            0 => format!("you will work with {list} in this role."),
            1 => format!("experience with {list} is required."),
            _ => format!("strong knowledge of {list} is a plus."),
        };
        sentences.push(sentence);
    }
    sentences.push("we offer free lunch and a gym.".into());
    sentences.push("health insurance is included.".into());
    sentences.join(" ")
}

fn foreign_description(skill_count: usize) -> String {
    let mut text = String::from("компания ищет опытного специалиста в нашу команду.");
    for _ in 0..skill_count.max(1) {
        text.push_str(" требуется уверенное знание профильных инструментов и технологий.");
    }
    text.push_str(" мы предлагаем бесплатный обед и медицинскую страховку.");
    text
}

/// Generate a taxonomy and a record sample from one seed.
pub fn generate_synthetic(config: &SynthConfig, seed: u64) -> Result<SyntheticCorpus, CorpusError> {
    let taxonomy = Taxonomy::generate(config, seed)?;
    taxonomy.sample(config, seed.wrapping_add(0x9e37_79b9_7f4a_7c15))
}
