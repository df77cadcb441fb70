use super::{clean_text, JobRecord};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};

/// Records bucketed by number of skills: `<10`, `10..=100`, `>100`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillBuckets {
    pub under_10: usize,
    pub from_10_to_100: usize,
    pub over_100: usize,
}

impl SkillBuckets {
    pub fn total(&self) -> usize {
        self.under_10 + self.from_10_to_100 + self.over_100
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_records: usize,
    /// First ESCO code digit -> record count.
    pub records_per_esco_family: BTreeMap<String, usize>,
    pub skill_count_buckets: SkillBuckets,
    /// Distinct titles after cleaning.
    pub unique_titles: usize,
}

pub fn compute_stats(records: &[JobRecord]) -> CorpusStats {
    let mut stats = CorpusStats { total_records: records.len(), ..Default::default() };
    let mut titles = HashSet::new();
    for record in records {
        match record.skills.len() {
            0..=9 => stats.skill_count_buckets.under_10 += 1,
            10..=100 => stats.skill_count_buckets.from_10_to_100 += 1,
            _ => stats.skill_count_buckets.over_100 += 1,
        }
        if let Some(family) = record.esco_family() {
            *stats.records_per_esco_family.entry(family.to_string()).or_default() += 1;
        }
        titles.insert(clean_text(&record.title));
    }
    stats.unique_titles = titles.len();
    stats
}
