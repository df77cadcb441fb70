//! Exact cosine search over embedded normalized titles.
//!
//! File layout (little endian): magic `SKIX`, u32 version, u32 dimension,
//! u32 entry count, 32-byte encoder fingerprint, then per entry a u32 label
//! id, a u32-length-prefixed UTF-8 label and `dim` f32 values.

use crate::corpus::clean_text;
use crate::encoder::{EmbedMode, Embedding, EncoderError, TextEncoder, UNIT_NORM_TOL};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::HashSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const INDEX_MAGIC: &[u8; 4] = b"SKIX";
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate label after cleaning: {0:?}")]
    DuplicateLabel(String),
    #[error("empty label set")]
    EmptyLabelSet,
    #[error("dimension mismatch: index has {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("vector is not unit-norm")]
    NotNormalized,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("index i/o failed")]
    Io(#[from] io::Error),
    #[error("index format version {found}, expected {expected}")]
    FormatVersionMismatch { found: u32, expected: u32 },
    #[error("index was built with a different encoder (fingerprint {found}, expected {expected})")]
    FingerprintMismatch { found: String, expected: String },
    #[error(transparent)]
    Encoder(#[from] EncoderError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub label_id: u32,
    pub label: String,
    pub vector: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TitleIndex {
    entries: Vec<IndexEntry>,
    dim: usize,
    fingerprint: [u8; 32],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub label_id: u32,
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SearchResult {
    pub ranked: Vec<SearchHit>,
}

impl SearchResult {
    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    /// 1-based rank of `label_id`, if retrieved.
    pub fn rank_of(&self, label_id: u32) -> Option<usize> {
        self.ranked.iter().position(|h| h.label_id == label_id).map(|p| p + 1)
    }
}

fn unit(values: &[f32]) -> bool {
    let n = values.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
    (n - 1.0).abs() < UNIT_NORM_TOL
}

impl TitleIndex {
    /// Assemble an index from labels and their vectors; ids follow input order.
    pub fn from_vectors(labels: Vec<String>, vectors: Vec<Vec<f32>>, fingerprint: [u8; 32]) -> Result<Self, IndexError> {
        if labels.is_empty() {
            return Err(IndexError::EmptyLabelSet);
        }
        if vectors.len() != labels.len() {
            return Err(IndexError::DimensionMismatch { expected: labels.len(), found: vectors.len() });
        }
        let dim = vectors.first().map_or(0, Vec::len);
        let mut seen = HashSet::new();
        let mut entries = Vec::with_capacity(labels.len());
        for (i, (label, vector)) in labels.into_iter().zip(vectors).enumerate() {
            if !seen.insert(label.clone()) {
                return Err(IndexError::DuplicateLabel(label));
            }
            if vector.len() != dim {
                return Err(IndexError::DimensionMismatch { expected: dim, found: vector.len() });
            }
            if !unit(&vector) {
                return Err(IndexError::NotNormalized);
            }
            entries.push(IndexEntry { label_id: i as u32, label, vector });
        }
        Ok(TitleIndex { entries, dim, fingerprint })
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fingerprint(&self) -> [u8; 32] {
        self.fingerprint
    }

    /// Id of a label, matched after cleaning.
    pub fn label_id(&self, label: &str) -> Option<u32> {
        let clean = clean_text(label);
        self.entries.iter().find(|e| e.label == clean).map(|e| e.label_id)
    }

    /// Refuse an index built for another encoder, unless `force`.
    pub fn check(&self, dim: usize, fingerprint: [u8; 32], force: bool) -> Result<(), IndexError> {
        if force {
            return Ok(());
        }
        if dim != self.dim {
            return Err(IndexError::DimensionMismatch { expected: self.dim, found: dim });
        }
        if fingerprint != self.fingerprint {
            return Err(IndexError::FingerprintMismatch {
                found: hex::encode(self.fingerprint),
                expected: hex::encode(fingerprint),
            });
        }
        Ok(())
    }
}

/// Embed every label in title mode. Labels are cleaned first and must stay
/// unique.
pub fn build_index(labels: &[String], encoder: &dyn TextEncoder) -> Result<TitleIndex, IndexError> {
    if labels.is_empty() {
        return Err(IndexError::EmptyLabelSet);
    }
    let clean: Vec<String> = labels.iter().map(|l| clean_text(l)).collect();
    let mut seen = HashSet::new();
    for l in &clean {
        if !seen.insert(l.as_str()) {
            return Err(IndexError::DuplicateLabel(l.clone()));
        }
    }
    let vectors: Vec<Vec<f32>> = clean
        .par_iter()
        .map(|l| encoder.embed_title(l).map(|e| e.values))
        .collect::<Result<_, _>>()?;
    TitleIndex::from_vectors(clean, vectors, encoder.fingerprint())
}

fn rank_order(a: &(f64, u32), b: &(f64, u32)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Exact top-`k` by cosine, ties broken by ascending label id.
pub fn query(index: &TitleIndex, q: &Embedding, k: usize) -> Result<SearchResult, IndexError> {
    if k == 0 {
        return Err(IndexError::InvalidK);
    }
    if q.dim() != index.dim {
        return Err(IndexError::DimensionMismatch { expected: index.dim, found: q.dim() });
    }
    if !unit(&q.values) {
        return Err(IndexError::NotNormalized);
    }
    let mut scored: Vec<(f64, u32)> = index
        .entries
        .iter()
        .map(|e| {
            let s: f64 = e.vector.iter().zip(&q.values).map(|(&a, &b)| a as f64 * b as f64).sum();
            (s, e.label_id)
        })
        .collect();
    let k = k.min(scored.len());
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, rank_order);
        scored.truncate(k);
    }
    scored.sort_by(rank_order);
    let ranked = scored
        .into_iter()
        .map(|(score, id)| SearchHit { label_id: id, label: index.entries[id as usize].label.clone(), score })
        .collect();
    Ok(SearchResult { ranked })
}

/// Embed `title` in title mode and search.
pub fn search_title(index: &TitleIndex, encoder: &dyn TextEncoder, title: &str, k: usize) -> Result<SearchResult, IndexError> {
    let q = encoder.embed_title(title)?;
    query(index, &q, k)
}

pub fn index_bytes(index: &TitleIndex) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(INDEX_MAGIC);
    out.extend_from_slice(&INDEX_VERSION.to_le_bytes());
    out.extend_from_slice(&(index.dim as u32).to_le_bytes());
    out.extend_from_slice(&(index.entries.len() as u32).to_le_bytes());
    out.extend_from_slice(&index.fingerprint);
    for e in &index.entries {
        out.extend_from_slice(&e.label_id.to_le_bytes());
        out.extend_from_slice(&(e.label.len() as u32).to_le_bytes());
        out.extend_from_slice(e.label.as_bytes());
        for v in &e.vector {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> io::Result<&'a [u8]> {
        if self.bytes.len() - self.at < n {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "index file is truncated"));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> io::Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

fn invalid(msg: impl Into<String>) -> IndexError {
    IndexError::Io(io::Error::new(io::ErrorKind::InvalidData, msg.into()))
}

pub fn parse_index(bytes: &[u8]) -> Result<TitleIndex, IndexError> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(4)? != INDEX_MAGIC {
        return Err(invalid("not an index file (bad magic)"));
    }
    let version = r.u32()?;
    if version != INDEX_VERSION {
        return Err(IndexError::FormatVersionMismatch { found: version, expected: INDEX_VERSION });
    }
    let dim = r.u32()? as usize;
    let n = r.u32()? as usize;
    let fingerprint: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
    let mut labels = Vec::with_capacity(n.min(1 << 20));
    let mut vectors = Vec::with_capacity(n.min(1 << 20));
    for i in 0..n {
        if r.u32()? as usize != i {
            return Err(invalid("label ids are not dense"));
        }
        let len = r.u32()? as usize;
        let label = std::str::from_utf8(r.take(len)?).map_err(|e| invalid(e.to_string()))?;
        labels.push(label.to_string());
        let raw = r.take(4 * dim)?;
        vectors.push(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect());
    }
    if r.at != bytes.len() {
        return Err(invalid("trailing bytes after the last entry"));
    }
    TitleIndex::from_vectors(labels, vectors, fingerprint)
}

/// Write atomically (temp file, then rename).
pub fn save_index(index: &TitleIndex, path: &Path) -> Result<(), IndexError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&index_bytes(index))?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<TitleIndex, IndexError> {
    parse_index(&fs::read(path)?)
}

/// Load and check the index against the encoder that will query it.
pub fn load_index_for(path: &Path, encoder: &dyn TextEncoder, force: bool) -> Result<TitleIndex, IndexError> {
    let index = load_index(path)?;
    index.check(encoder.dim(), encoder.fingerprint(), force)?;
    Ok(index)
}

/// Embedding mode used for a search query: combined when skills are given.
pub fn query_mode(skills: &[String]) -> EmbedMode {
    if skills.iter().any(|s| !clean_text(s).is_empty()) {
        EmbedMode::Combined
    } else {
        EmbedMode::Title
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_vec(v: &[f64]) -> Vec<f32> {
        Embedding::normalized(v.to_vec(), EmbedMode::Title).unwrap().values
    }

    fn emb(v: &[f64]) -> Embedding {
        Embedding::normalized(v.to_vec(), EmbedMode::Title).unwrap()
    }

    fn small() -> TitleIndex {
        TitleIndex::from_vectors(
            vec!["a".into(), "b".into(), "c".into()],
            vec![unit_vec(&[1.0, 0.0]), unit_vec(&[0.0, 1.0]), unit_vec(&[1.0, 1.0])],
            [7; 32],
        )
        .unwrap()
    }

    #[test]
    fn basic_queries() {
        let idx = small();
        let r = query(&idx, &emb(&[1.0, 0.0]), 3).unwrap();
        assert_eq!(r.ranked[0].label, "a");
        assert!((r.ranked[0].score - 1.0).abs() < 1e-6);
        assert_eq!(r.ranked.iter().map(|h| h.label_id).collect::<Vec<_>>(), vec![0, 2, 1]);
        assert_eq!(query(&idx, &emb(&[1.0, 0.0]), 10).unwrap().len(), 3);
        assert!(matches!(query(&idx, &emb(&[1.0, 0.0]), 0), Err(IndexError::InvalidK)));
        assert!(matches!(query(&idx, &emb(&[1.0, 0.0, 0.0]), 1), Err(IndexError::DimensionMismatch { .. })));
    }

    #[test]
    fn ties_break_by_label_id() {
        let idx = TitleIndex::from_vectors(
            vec!["x".into(), "y".into(), "z".into()],
            vec![unit_vec(&[0.0, 1.0]), unit_vec(&[1.0, 0.0]), unit_vec(&[1.0, 0.0])],
            [0; 32],
        )
        .unwrap();
        let r = query(&idx, &emb(&[1.0, 0.0]), 2).unwrap();
        assert_eq!(r.ranked.iter().map(|h| h.label_id).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn two_entries_k1() {
        let idx = TitleIndex::from_vectors(
            vec!["hi".into(), "lo".into()],
            vec![unit_vec(&[0.9, (1.0f64 - 0.81).sqrt()]), unit_vec(&[0.1, (1.0f64 - 0.01).sqrt()])],
            [0; 32],
        )
        .unwrap();
        let r = query(&idx, &emb(&[1.0, 0.0]), 1).unwrap();
        assert_eq!(r.ranked.len(), 1);
        assert_eq!(r.ranked[0].label, "hi");
        assert!((r.ranked[0].score - 0.9).abs() < 1e-6);
    }

    #[test]
    fn round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.idx");
        let idx = small();
        save_index(&idx, &path).unwrap();
        assert_eq!(load_index(&path).unwrap(), idx);

        let bytes = index_bytes(&idx);
        for cut in [3, 10, 40, bytes.len() - 1] {
            assert!(matches!(
                parse_index(&bytes[..cut]),
                Err(IndexError::Io(_)) | Err(IndexError::FormatVersionMismatch { .. })
            ));
        }
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(parse_index(&v2), Err(IndexError::FormatVersionMismatch { found: 2, .. })));

        assert!(matches!(idx.check(2, [8; 32], false), Err(IndexError::FingerprintMismatch { .. })));
        assert!(matches!(idx.check(3, [7; 32], false), Err(IndexError::DimensionMismatch { .. })));
        idx.check(2, [7; 32], false).unwrap();
        idx.check(5, [8; 32], true).unwrap();
    }

    #[test]
    fn rejects_bad_label_sets() {
        assert!(matches!(TitleIndex::from_vectors(vec![], vec![], [0; 32]), Err(IndexError::EmptyLabelSet)));
        assert!(matches!(
            TitleIndex::from_vectors(vec!["a".into(), "a".into()], vec![unit_vec(&[1.0]), unit_vec(&[1.0])], [0; 32]),
            Err(IndexError::DuplicateLabel(_))
        ));
        assert!(matches!(
            TitleIndex::from_vectors(vec!["a".into()], vec![vec![0.5, 0.5]], [0; 32]),
            Err(IndexError::NotNormalized)
        ));
    }

    fn random_index(n: usize, dim: usize, seed: u64) -> TitleIndex {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let vectors = (0..n)
            .map(|_| unit_vec(&(0..dim).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>()))
            .collect();
        TitleIndex::from_vectors((0..n).map(|i| format!("label {i}")).collect(), vectors, [1; 32]).unwrap()
    }

    proptest! {
        #[test]
        fn prefix_containment(seed in any::<u64>(), q in proptest::collection::vec(-1.0f64..1.0, 6), k in 1usize..30) {
            prop_assume!(q.iter().any(|v| v.abs() > 1e-3));
            let idx = random_index(40, 6, seed);
            let e = emb(&q);
            let a = query(&idx, &e, k).unwrap();
            let b = query(&idx, &e, k + 1).unwrap();
            prop_assert_eq!(&a.ranked[..], &b.ranked[..a.len()]);
            prop_assert!(a.ranked.windows(2).all(|w| w[0].score >= w[1].score));
        }

        #[test]
        fn positive_rescaling_keeps_ranking(seed in any::<u64>(), q in proptest::collection::vec(-1.0f64..1.0, 6), c in 0.01f64..100.0) {
            prop_assume!(q.iter().any(|v| v.abs() > 1e-3));
            let idx = random_index(30, 6, seed);
            let scaled: Vec<f64> = q.iter().map(|v| v * c).collect();
            let a = query(&idx, &emb(&q), 10).unwrap();
            let b = query(&idx, &emb(&scaled), 10).unwrap();
            let ids = |r: &SearchResult| r.ranked.iter().map(|h| h.label_id).collect::<Vec<_>>();
            prop_assert_eq!(ids(&a), ids(&b));
        }
    }
}
