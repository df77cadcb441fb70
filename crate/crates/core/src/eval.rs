//! Recall@N over a labelled benchmark, the relative-improvement score, and
//! multi-encoder comparison reports.

use crate::corpus::{clean_text, compute_stats, CorpusStats, JobRecord};
use crate::encoder::{EmbedMode, EncoderError, TextEncoder};
use crate::index::{build_index, query, IndexError, SearchResult, TitleIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use thiserror::Error;

/// Cutoffs reported in every triple.
pub const RECALL_CUTOFFS: [usize; 3] = [1, 5, 10];
/// Results retrieved per query.
pub const EVAL_K: usize = 10;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no queries to score")]
    EmptyQuerySet,
    #[error("N must be at least 1")]
    InvalidN,
    #[error("no benchmark record has a gold label present in the index")]
    NoResolvableRecords,
    #[error("reference recall component {0} is zero")]
    ZeroReference(&'static str),
    #[error("no encoders to compare")]
    NoEncoders,
    #[error("unknown result {0:?} in a delta specification")]
    UnknownResult(String),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallTriple {
    pub r1: f64,
    pub r5: f64,
    pub r10: f64,
}

impl RecallTriple {
    pub fn new(r1: f64, r5: f64, r10: f64) -> Self {
        RecallTriple { r1, r5, r10 }
    }

    pub fn components(&self) -> [f64; 3] {
        [self.r1, self.r5, self.r10]
    }
}

/// Fraction of queries whose gold id is among the first `n` results.
pub fn recall_at_n(queries: &[(u32, SearchResult)], n: usize) -> Result<f64, EvalError> {
    if n == 0 {
        return Err(EvalError::InvalidN);
    }
    if queries.is_empty() {
        return Err(EvalError::EmptyQuerySet);
    }
    let hits = queries
        .iter()
        .filter(|(gold, r)| r.ranked.iter().take(n).any(|h| h.label_id == *gold))
        .count();
    Ok(hits as f64 / queries.len() as f64)
}

pub fn recall_triple(queries: &[(u32, SearchResult)]) -> Result<RecallTriple, EvalError> {
    Ok(RecallTriple {
        r1: recall_at_n(queries, 1)?,
        r5: recall_at_n(queries, 5)?,
        r10: recall_at_n(queries, 10)?,
    })
}

/// Mean relative gain over the three cutoffs, in percent.
pub fn delta_improvement(candidate: &RecallTriple, reference: &RecallTriple) -> Result<f64, EvalError> {
    let names = ["r1", "r5", "r10"];
    let mut sum = 0.0;
    for ((c, r), name) in candidate.components().iter().zip(reference.components()).zip(names) {
        if r <= 0.0 {
            return Err(EvalError::ZeroReference(name));
        }
        sum += (c - r) / r;
    }
    Ok(sum / 3.0 * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub recall: RecallTriple,
    pub evaluated: usize,
    /// Records whose gold label is absent from the index, or which have no
    /// skills in skills mode.
    pub excluded: usize,
}

/// Embed each record in `mode`, retrieve the top `k` labels and score
/// Recall@{1,5,10} over the records whose gold label is in the index.
pub fn evaluate(
    records: &[JobRecord],
    encoder: &dyn TextEncoder,
    mode: EmbedMode,
    index: &TitleIndex,
    k: usize,
) -> Result<Evaluation, EvalError> {
    let scored: Vec<Option<(u32, SearchResult)>> = records
        .par_iter()
        .map(|r| {
            let Some(gold) = r.normalized_title.as_deref().and_then(|g| index.label_id(g)) else {
                return Ok(None);
            };
            let q = match encoder.embed(r, mode) {
                Ok(q) => q,
                Err(EncoderError::NoSkills) => return Ok(None),
                Err(e) => return Err(EvalError::from(e)),
            };
            Ok(Some((gold, query(index, &q, k)?)))
        })
        .collect::<Result<_, EvalError>>()?;
    let queries: Vec<(u32, SearchResult)> = scored.into_iter().flatten().collect();
    if queries.is_empty() {
        return Err(EvalError::NoResolvableRecords);
    }
    Ok(Evaluation {
        recall: recall_triple(&queries)?,
        evaluated: queries.len(),
        excluded: records.len() - queries.len(),
    })
}

/// Distinct cleaned normalized titles, in first-seen order.
pub fn benchmark_labels(records: &[JobRecord]) -> Vec<String> {
    let mut seen = HashSet::new();
    records
        .iter()
        .filter_map(|r| r.normalized_title.as_deref().map(clean_text))
        .filter(|l| !l.is_empty() && seen.insert(l.clone()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub records: usize,
    pub labels: usize,
    pub stats: CorpusStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub encoder: String,
    pub mode: EmbedMode,
    pub recall: RecallTriple,
    pub evaluated: usize,
    pub excluded: usize,
}

impl ResultRow {
    /// `encoder/mode`, the name deltas refer to.
    pub fn key(&self) -> String {
        format!("{}/{}", self.encoder, self.mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub candidate: String,
    pub reference: String,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: DatasetInfo,
    pub results: Vec<ResultRow>,
    pub deltas: Vec<DeltaRow>,
    #[serde(default)]
    pub references: BTreeMap<String, RecallTriple>,
    #[serde(default)]
    pub config: BTreeMap<String, String>,
}

/// What to compare. Every encoder builds its own index over `labels`
/// (default: the benchmark's distinct normalized titles).
#[derive(Default)]
pub struct Comparison<'a> {
    pub dataset_name: String,
    pub encoders: Vec<&'a dyn TextEncoder>,
    pub modes: Vec<EmbedMode>,
    pub labels: Option<Vec<String>>,
    /// External published triples, e.g. a system that cannot be rerun.
    pub references: Vec<(String, RecallTriple)>,
    /// (candidate, reference) names: `encoder/mode` or a reference name.
    /// When empty, every result is scored against every reference.
    pub deltas: Vec<(String, String)>,
    pub config: BTreeMap<String, String>,
}

pub fn compare_encoders(benchmark: &[JobRecord], plan: &Comparison<'_>) -> Result<EvalReport, EvalError> {
    if plan.encoders.is_empty() {
        return Err(EvalError::NoEncoders);
    }
    let labels = plan.labels.clone().unwrap_or_else(|| benchmark_labels(benchmark));
    let mut results = Vec::new();
    for encoder in &plan.encoders {
        let index = build_index(&labels, *encoder)?;
        for &mode in &plan.modes {
            let e = evaluate(benchmark, *encoder, mode, &index, EVAL_K)?;
            results.push(ResultRow {
                encoder: encoder.name().to_string(),
                mode,
                recall: e.recall,
                evaluated: e.evaluated,
                excluded: e.excluded,
            });
        }
    }
    let references: BTreeMap<String, RecallTriple> = plan.references.iter().cloned().collect();
    let lookup = |name: &str| -> Result<RecallTriple, EvalError> {
        results
            .iter()
            .find(|r| r.key() == name)
            .map(|r| r.recall)
            .or_else(|| references.get(name).copied())
            .ok_or_else(|| EvalError::UnknownResult(name.to_string()))
    };
    let pairs: Vec<(String, String)> = if plan.deltas.is_empty() {
        results
            .iter()
            .flat_map(|r| plan.references.iter().map(move |(name, _)| (r.key(), name.clone())))
            .collect()
    } else {
        plan.deltas.clone()
    };
    let mut deltas = Vec::with_capacity(pairs.len());
    for (candidate, reference) in pairs {
        let percent = delta_improvement(&lookup(&candidate)?, &lookup(&reference)?)?;
        deltas.push(DeltaRow { candidate, reference, percent });
    }
    Ok(EvalReport {
        dataset: DatasetInfo {
            name: plan.dataset_name.clone(),
            records: benchmark.len(),
            labels: labels.len(),
            stats: compute_stats(benchmark),
        },
        results,
        deltas,
        references,
        config: plan.config.clone(),
    })
}

/// Aligned plain-text table: one row per (encoder, mode), references
/// appended, and a Δ column per reference when deltas exist.
pub fn render_table(report: &EvalReport) -> String {
    let refs: Vec<&String> = {
        let mut seen = Vec::new();
        for d in &report.deltas {
            if !seen.contains(&&d.reference) {
                seen.push(&d.reference);
            }
        }
        seen
    };
    let mut header = vec!["Encoder".to_string(), "Mode".into(), "R@1".into(), "R@5".into(), "R@10".into()];
    header.extend(refs.iter().map(|r| format!("Δ vs {r}")));
    header.push("Excluded".into());

    let mut rows: Vec<Vec<String>> = Vec::new();
    for r in &report.results {
        let mut row = vec![
            r.encoder.clone(),
            r.mode.to_string(),
            format!("{:.3}", r.recall.r1),
            format!("{:.3}", r.recall.r5),
            format!("{:.3}", r.recall.r10),
        ];
        for reference in &refs {
            let cell = report
                .deltas
                .iter()
                .find(|d| &&d.reference == reference && d.candidate == r.key())
                .map_or("-".to_string(), |d| format!("{:+.2}%", d.percent));
            row.push(cell);
        }
        row.push(r.excluded.to_string());
        rows.push(row);
    }
    for (name, t) in &report.references {
        let mut row = vec![name.clone(), "reference".into(), format!("{:.3}", t.r1), format!("{:.3}", t.r5), format!("{:.3}", t.r10)];
        row.extend(refs.iter().map(|_| "-".to_string()));
        row.push("-".into());
        rows.push(row);
    }

    let width = |c: usize| {
        std::iter::once(&header)
            .chain(&rows)
            .map(|r| r[c].chars().count())
            .max()
            .unwrap_or(0)
    };
    let widths: Vec<usize> = (0..header.len()).map(width).collect();
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            let pad = w - cell.chars().count();
            if i < 2 {
                let _ = write!(s, "{cell}{}", " ".repeat(pad));
            } else {
                let _ = write!(s, "{}{cell}", " ".repeat(pad));
            }
            if i + 1 < cells.len() {
                s.push_str("  ");
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(&header);
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for r in &rows {
        out.push_str(&line(r));
    }
    out
}
