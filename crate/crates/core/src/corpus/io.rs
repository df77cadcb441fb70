use super::{CorpusError, JobRecord};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoadWarning {
    /// Line could not be parsed as a record object.
    Malformed { line: usize, message: String },
    /// Line parsed but the record violates an invariant.
    Rejected { line: usize, reason: String },
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub records: Vec<JobRecord>,
    pub warnings: Vec<LoadWarning>,
    /// Non-blank lines seen.
    pub lines: usize,
}

impl LoadReport {
    pub fn malformed(&self) -> usize {
        self.warnings
            .iter()
            .filter(|w| matches!(w, LoadWarning::Malformed { .. }))
            .count()
    }
}

fn read_jsonl(
    path: &Path,
    mut accept: impl FnMut(JobRecord) -> Result<JobRecord, String>,
) -> Result<LoadReport, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut report = LoadReport::default();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        report.lines += 1;
        let lineno = idx + 1;
        match serde_json::from_str::<JobRecord>(&line) {
            Ok(record) => match accept(record) {
                Ok(record) => report.records.push(record),
                Err(reason) => report.warnings.push(LoadWarning::Rejected { line: lineno, reason }),
            },
            Err(e) => report.warnings.push(LoadWarning::Malformed {
                line: lineno,
                message: e.to_string(),
            }),
        }
    }
    let failed = report.malformed();
    if failed * 2 > report.lines {
        return Err(CorpusError::TooManyMalformed { failed, total: report.lines });
    }
    Ok(report)
}

/// Read a benchmark file. Records without a normalized title, or violating
/// other record invariants, are skipped with a warning; malformed lines are
/// skipped unless they make up more than half the file.
pub fn load_benchmark(path: &Path) -> Result<LoadReport, CorpusError> {
    read_jsonl(path, |record| {
        if record.normalized_title.is_none() {
            return Err("missing normalized_title".into());
        }
        record.validated().map_err(|e| e.to_string())
    })
}

/// Read a JSONL corpus with the same skip semantics as [`load_benchmark`],
/// without requiring normalized titles.
pub fn read_records(path: &Path) -> Result<LoadReport, CorpusError> {
    read_jsonl(path, |record| record.validated().map_err(|e| e.to_string()))
}

/// Write records as JSONL via a temporary sibling file and a rename.
pub fn write_records(path: &Path, records: &[JobRecord]) -> Result<(), CorpusError> {
    let tmp = path.with_extension("jsonl.tmp");
    {
        let file = File::create(&tmp).map_err(|e| CorpusError::io(&tmp, e))?;
        let mut out = BufWriter::new(file);
        for record in records {
            let line = serde_json::to_string(record).expect("record serializes");
            writeln!(out, "{line}").map_err(|e| CorpusError::io(&tmp, e))?;
        }
        out.flush().map_err(|e| CorpusError::io(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| CorpusError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Source;
    use proptest::prelude::*;

    fn write(dir: &tempfile::TempDir, body: &str) -> std::path::PathBuf {
        let p = dir.path().join("bench.jsonl");
        std::fs::write(&p, body).unwrap();
        p
    }

    const GOOD: &str = r#"{"title":"Senior Dev","description":"x","skills":["sql"],"normalized_title":"software developer","esco_code":"2512","source":"benchmark"}"#;

    #[test]
    fn loads_well_formed_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, &format!("{GOOD}\n{GOOD}\n\n{GOOD}\n"));
        let report = load_benchmark(&p).unwrap();
        assert_eq!(report.records.len(), 3);
        assert!(report.warnings.is_empty());
        assert_eq!(report.records[0].source, Source::Benchmark);
    }

    #[test]
    fn skips_malformed_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, &format!("{GOOD}\n{{not json\n{GOOD}\n{GOOD}\n"));
        let report = load_benchmark(&p).unwrap();
        assert_eq!(report.records.len(), 3);
        assert_eq!(report.warnings.len(), 1);
        assert!(matches!(report.warnings[0], LoadWarning::Malformed { line: 2, .. }));
    }

    #[test]
    fn fails_when_most_lines_are_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, &format!("{GOOD}\nx\ny\n"));
        assert!(matches!(
            load_benchmark(&p),
            Err(CorpusError::TooManyMalformed { failed: 2, total: 3 })
        ));
    }

    #[test]
    fn missing_skills_and_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            r#"{"title":"a","description":"","normalized_title":"b","esco_code":null,"source":"benchmark","extra":1}
{"title":"c","description":"","skills":[],"normalized_title":null,"esco_code":null,"source":"vacancy"}
"#,
        );
        let report = load_benchmark(&p).unwrap();
        assert_eq!(report.records.len(), 1);
        assert!(report.records[0].skills.is_empty());
        assert!(matches!(report.warnings[0], LoadWarning::Rejected { line: 2, .. }));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_benchmark(Path::new("/nonexistent/bench.jsonl")),
            Err(CorpusError::Io { .. })
        ));
    }

    fn arb_record() -> impl Strategy<Value = JobRecord> {
        (
            "[a-zA-Z][a-zA-Z ]{0,20}",
            ".{0,40}",
            proptest::collection::vec("[a-z]{1,6}( [a-z]{1,6})?", 0..6),
            proptest::option::of("[a-z ]{1,20}"),
            "[0-9]{4}",
            prop_oneof![
                Just(Source::Vacancy),
                Just(Source::Resume),
                Just(Source::Benchmark),
                Just(Source::Synthetic)
            ],
        )
            .prop_map(|(title, description, skills, normalized_title, code, source)| {
                let esco_code = normalized_title.as_ref().map(|_| code);
                JobRecord { title, description, skills, normalized_title, esco_code, source }
                    .validated()
                    .unwrap()
            })
    }

    proptest! {
        #[test]
        fn write_then_load_is_identity(records in proptest::collection::vec(arb_record(), 0..8)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("c.jsonl");
            write_records(&p, &records).unwrap();
            let back = read_records(&p).unwrap();
            prop_assert_eq!(&back.records, &records);
            let with_gold: Vec<_> = records.iter().filter(|r| r.normalized_title.is_some()).cloned().collect();
            prop_assert_eq!(load_benchmark(&p).unwrap().records, with_gold);
        }
    }
}
