use crate::lock::Lock;
use crate::{Cli, Command, EmbedArgs, EvaluateArgs, IndexArgs, PreprocessArgs, SearchArgs, StatsArgs, SynthArgs, TrainArgs};
use anyhow::{anyhow, bail, Context, Result};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use titlenorm::corpus::{
    clean_text, compute_stats, dedup_records, extract_skills, filter_relevant_sentences, is_target_language,
    load_benchmark, read_records, write_records, Gazetteer, JobRecord, LoadReport, LoadWarning, SynthConfig, Taxonomy,
};
use titlenorm::encoder::{
    load_checkpoint, save_checkpoint, DualEncoder, EncoderConfig, EncoderParams, StaticBaseline,
    StaticTable, TextEncoder,
};
use titlenorm::eval::{compare_encoders, render_table, Comparison, RecallTriple};
use titlenorm::index::{build_index, load_index, query, query_mode, save_index};
use titlenorm::tokenizer::Vocabulary;
use titlenorm::training::{train_with, Probe, TrainConfig, TrainPair};

pub fn run(cli: &Cli) -> Result<()> {
    let out = Output { quiet: cli.quiet };
    match &cli.command {
        Command::Preprocess(a) => preprocess(a, &out),
        Command::Stats(a) => stats(a),
        Command::Train(a) => train(a, cli, &out),
        Command::Embed(a) => embed(a, &out),
        Command::Index(a) => index(a, &out),
        Command::Search(a) => search(a),
        Command::Evaluate(a) => evaluate(a, cli, &out),
        Command::Synth(a) => synth(a, cli, &out),
    }
}

/// Progress lines go to stderr so stdout stays machine-readable.
struct Output {
    quiet: bool,
}

impl Output {
    fn progress(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn warnings(&self, path: &Path, report: &LoadReport) {
        if self.quiet {
            return;
        }
        for w in &report.warnings {
            match w {
                LoadWarning::Malformed { line, message } => {
                    eprintln!("warning: {}:{line}: skipped malformed line: {message}", path.display())
                }
                LoadWarning::Rejected { line, reason } => {
                    eprintln!("warning: {}:{line}: skipped record: {reason}", path.display())
                }
            }
        }
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_encoder(checkpoint: &Path, vocab: Option<&Path>) -> Result<DualEncoder> {
    let (params, _) = load_checkpoint(checkpoint)
        .with_context(|| format!("cannot load checkpoint {}", checkpoint.display()))?;
    let vocab_path = vocab.map(Path::to_path_buf).unwrap_or_else(|| with_suffix(checkpoint, ".vocab"));
    let vocab = Vocabulary::load(&vocab_path)
        .with_context(|| format!("cannot load vocabulary {}", vocab_path.display()))?;
    let name = checkpoint.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(DualEncoder::new(params, vocab)?.with_name(name))
}

fn load_corpus(path: &Path, out: &Output) -> Result<Vec<JobRecord>> {
    let report = read_records(path)?;
    out.warnings(path, &report);
    Ok(report.records)
}

fn load_bench(path: &Path, out: &Output) -> Result<Vec<JobRecord>> {
    let report = load_benchmark(path)?;
    out.warnings(path, &report);
    if report.records.is_empty() {
        bail!("benchmark {} has no usable records", path.display());
    }
    Ok(report.records)
}

#[derive(Debug, Default)]
struct PreprocessCounts {
    read: usize,
    malformed: usize,
    rejected: usize,
    dropped_language: usize,
    dropped_empty: usize,
    duplicates: usize,
    kept: usize,
}

/// Titles and descriptions are cleaned, the description must pass the
/// language gate, and skills become the given ones plus any gazetteer hits
/// in the relevant sentences. Applying it to its own output changes nothing.
fn preprocess_record(record: JobRecord, gazetteer: &Gazetteer, counts: &mut PreprocessCounts) -> Result<Option<JobRecord>> {
    let title = clean_text(&record.title);
    let description = clean_text(&record.description);
    if !description.is_empty() && !is_target_language(&description) {
        counts.dropped_language += 1;
        return Ok(None);
    }
    let mut skills: Vec<String> = record.skills.iter().map(|s| clean_text(s)).collect();
    skills.extend(extract_skills(&filter_relevant_sentences(&description), gazetteer)?);
    let cleaned = JobRecord {
        title,
        description,
        skills,
        normalized_title: record.normalized_title.as_deref().map(clean_text),
        ..record
    }
    .validated()?;
    if cleaned.skills.is_empty() {
        counts.dropped_empty += 1;
        return Ok(None);
    }
    Ok(Some(cleaned))
}

fn preprocess(a: &PreprocessArgs, out: &Output) -> Result<()> {
    let gazetteer = match &a.gazetteer {
        Some(p) => Gazetteer::load(p)?,
        None => Gazetteer::builtin(),
    };
    let report = read_records(&a.input)?;
    out.warnings(&a.input, &report);
    let mut counts = PreprocessCounts {
        read: report.lines,
        malformed: report.malformed(),
        rejected: report.warnings.len() - report.malformed(),
        ..Default::default()
    };
    let mut kept = Vec::new();
    for record in report.records {
        if let Some(r) = preprocess_record(record, &gazetteer, &mut counts)? {
            kept.push(r);
        }
    }
    let before = kept.len();
    let kept = dedup_records(kept);
    counts.duplicates = before - kept.len();
    counts.kept = kept.len();
    let _lock = Lock::acquire(&a.output)?;
    write_records(&a.output, &kept)?;
    let c = &counts;
    println!("read\t{}", c.read);
    println!("malformed\t{}", c.malformed);
    println!("rejected\t{}", c.rejected);
    println!("dropped_language\t{}", c.dropped_language);
    println!("dropped_no_skills\t{}", c.dropped_empty);
    println!("duplicates\t{}", c.duplicates);
    println!("kept\t{}", c.kept);
    Ok(())
}

fn stats(a: &StatsArgs) -> Result<()> {
    let report = read_records(&a.input)?;
    let stats = compute_stats(&report.records);
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}

fn synth(a: &SynthArgs, cli: &Cli, out: &Output) -> Result<()> {
    let config = SynthConfig {
        families: a.families,
        skills_per_family: a.skills_per_family,
        records_per_family: a.records_per_family,
        min_skills_per_record: a.min_skills,
        max_skills_per_record: a.max_skills,
        noise: a.noise,
        title_variants: a.title_variants,
        ambiguous_pairs: a.ambiguous_pairs,
        modifier_rate: a.modifier_rate,
        foreign_rate: a.foreign_rate,
    };
    let taxonomy = Taxonomy::generate(&config, cli.data_seed)?;
    let corpus = taxonomy.sample(&config, cli.data_seed.wrapping_add(1))?;
    {
        let _lock = Lock::acquire(&a.output)?;
        write_records(&a.output, &corpus.records)?;
    }
    out.progress(format!("wrote {} records to {}", corpus.records.len(), a.output.display()));
    if let Some(path) = &a.benchmark_output {
        let bench_config = SynthConfig { records_per_family: a.benchmark_records_per_family, ..config };
        let bench = taxonomy.sample(&bench_config, cli.data_seed.wrapping_add(2))?;
        let _lock = Lock::acquire(path)?;
        write_records(path, &bench.records)?;
        out.progress(format!("wrote {} benchmark records to {}", bench.records.len(), path.display()));
    }
    Ok(())
}

fn vocabulary_text(pairs: &[TrainPair]) -> Vec<String> {
    pairs
        .iter()
        .map(|p| {
            let mut line = clean_text(&p.title);
            for s in &p.skills {
                line.push(' ');
                line.push_str(&clean_text(s));
            }
            line
        })
        .collect()
}

fn train(a: &TrainArgs, cli: &Cli, out: &Output) -> Result<()> {
    let records = load_corpus(&a.corpus, out)?;
    let pairs: Vec<TrainPair> = records.iter().filter_map(TrainPair::from_record).collect();
    if pairs.is_empty() {
        bail!("{} has no records with skills to train on", a.corpus.display());
    }
    out.progress(format!("{} training pairs from {} records", pairs.len(), records.len()));
    let vocab_path = a.vocab.clone().unwrap_or_else(|| with_suffix(&a.output, ".vocab"));
    let (params, vocab) = match &a.resume {
        Some(ckpt) => {
            let encoder = load_encoder(ckpt, None)?;
            out.progress(format!("resuming from {}", ckpt.display()));
            (encoder.params().clone(), encoder.vocab().clone())
        }
        None => {
            let vocab = Vocabulary::build(&vocabulary_text(&pairs), a.min_frequency)?;
            let config = EncoderConfig {
                hidden_dim: a.hidden_dim,
                num_layers: a.num_layers,
                num_heads: a.num_heads,
                ffn_dim: a.ffn_dim,
                pooled_dim: a.pooled_dim,
                dropout_rate: a.dropout,
                init_seed: cli.model_seed,
                ..EncoderConfig::new(vocab.len())
            };
            (EncoderParams::init(&config)?, vocab)
        }
    };
    let config = TrainConfig {
        batch_size: a.batch_size,
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        scale: a.scale,
        weight_decay: a.weight_decay,
        shuffle_seed: cli.data_seed,
        validation_fraction: a.validation_fraction,
        checkpoint_every: a.checkpoint_every,
        bidirectional: a.bidirectional,
    };
    let probe = match &a.benchmark {
        Some(p) => Some(Probe::from_records(&load_bench(p, out)?)),
        None => None,
    };

    let _lock = Lock::acquire(&a.output)?;
    vocab.save(&vocab_path)?;
    let (trained, log) = train_with(params, &vocab, &pairs, &config, probe.as_ref(), |step, params| {
        save_checkpoint(params, &a.output, Some(&vocab))?;
        out.progress(format!("step {step}: checkpoint written"));
        Ok(())
    })?;
    let manifest = save_checkpoint(&trained, &a.output, Some(&vocab))?;
    let log_path = a.log.clone().unwrap_or_else(|| with_suffix(&a.output, ".log.jsonl"));
    log.write_jsonl(&log_path).with_context(|| format!("cannot write {}", log_path.display()))?;

    let losses = log.step_losses();
    println!("steps\t{}", losses.len());
    if let Some(l) = losses.last() {
        println!("final_loss\t{l:.6}");
    }
    if let Some(v) = log.validations().last() {
        if let Some(l) = v.loss {
            println!("validation_loss\t{l:.6}");
        }
        if let Some(r) = v.recall_at_1 {
            println!("validation_recall_at_1\t{r:.4}");
        }
    }
    println!("checkpoint\t{}", a.output.display());
    println!("sha256\t{}", manifest.checkpoint_sha256);
    Ok(())
}

fn embed(a: &EmbedArgs, out: &Output) -> Result<()> {
    let encoder = load_encoder(&a.checkpoint, a.vocab.as_deref())?;
    let records = load_corpus(&a.input, out)?;
    let _lock = a.output.as_deref().map(Lock::acquire).transpose()?;
    let sink: Box<dyn Write> = match &a.output {
        Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut sink = BufWriter::new(sink);
    let mut skipped = 0usize;
    for r in &records {
        let e = match encoder.embed(r, a.mode) {
            Ok(e) => e,
            Err(titlenorm::encoder::EncoderError::NoSkills) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let line = serde_json::json!({
            "title": r.title,
            "normalized_title": r.normalized_title,
            "mode": a.mode,
            "embedding": e.values,
        });
        writeln!(sink, "{line}")?;
    }
    sink.flush()?;
    if skipped > 0 {
        out.progress(format!("skipped {skipped} records without skills"));
    }
    Ok(())
}

fn read_labels(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(String::from).collect())
}

fn index(a: &IndexArgs, out: &Output) -> Result<()> {
    let encoder = load_encoder(&a.checkpoint, a.vocab.as_deref())?;
    let labels = match (&a.labels, &a.benchmark) {
        (Some(p), _) => read_labels(p)?,
        (None, Some(p)) => titlenorm::eval::benchmark_labels(&load_bench(p, out)?),
        (None, None) => unreachable!("clap requires one label source"),
    };
    let index = build_index(&labels, &encoder)?;
    let _lock = Lock::acquire(&a.output)?;
    save_index(&index, &a.output)?;
    println!("indexed\t{}", index.len());
    Ok(())
}

fn parse_skills(list: Option<&str>) -> Vec<String> {
    list.map(|s| s.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect())
        .unwrap_or_default()
}

fn search(a: &SearchArgs) -> Result<()> {
    let encoder = load_encoder(&a.checkpoint, a.vocab.as_deref())?;
    let index = load_index(&a.index).with_context(|| format!("cannot load index {}", a.index.display()))?;
    index.check(encoder.dim(), encoder.fingerprint(), a.force)?;
    let skills = parse_skills(a.skills.as_deref());
    let mode = query_mode(&skills);
    let record = JobRecord::new(a.query.clone(), skills);
    let q = encoder.embed(&record, mode)?;
    let result = query(&index, &q, a.k)?;
    let mut stdout = std::io::stdout().lock();
    for (rank, hit) in result.ranked.iter().enumerate() {
        writeln!(stdout, "{}\t{:.4}\t{}", rank + 1, hit.score, hit.label)?;
    }
    Ok(())
}

fn parse_reference(text: &str) -> Result<RecallTriple> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| anyhow!("bad reference value {p:?}: {e}")))
        .collect::<Result<_>>()?;
    match parts.as_slice() {
        &[r1, r5, r10] => Ok(RecallTriple::new(r1, r5, r10)),
        _ => bail!("--reference needs three comma-separated values (R@1,R@5,R@10), got {}", parts.len()),
    }
}

fn evaluate(a: &EvaluateArgs, cli: &Cli, out: &Output) -> Result<()> {
    if a.checkpoints.is_empty() && a.static_baseline_dim == 0 {
        bail!("nothing to evaluate: pass --checkpoint and/or --static-baseline-dim");
    }
    let bench = load_bench(&a.benchmark, out)?;
    let trained: Vec<DualEncoder> = a.checkpoints.iter().map(|c| load_encoder(c, None)).collect::<Result<_>>()?;
    let baseline = (a.static_baseline_dim > 0)
        .then(|| -> Result<StaticBaseline> {
            let vocab = match trained.first() {
                Some(e) => e.vocab().clone(),
                None => {
                    let text: Vec<String> = bench
                        .iter()
                        .map(|r| format!("{} {}", clean_text(&r.title), clean_text(&r.skills.join(" "))))
                        .collect();
                    Vocabulary::build(&text, 1)?
                }
            };
            let table = StaticTable::random(vocab, a.static_baseline_dim, cli.model_seed);
            Ok(StaticBaseline::new("static-random", table))
        })
        .transpose()?;

    let mut encoders: Vec<&dyn TextEncoder> = trained.iter().map(|e| e as &dyn TextEncoder).collect();
    if let Some(b) = &baseline {
        encoders.push(b);
    }
    let mut config = BTreeMap::new();
    config.insert("benchmark".to_string(), a.benchmark.display().to_string());
    config.insert("model_seed".to_string(), cli.model_seed.to_string());
    for (i, c) in a.checkpoints.iter().enumerate() {
        config.insert(format!("checkpoint.{i}"), c.display().to_string());
        config.insert(format!("checkpoint.{i}.sha256"), hex(&trained[i].fingerprint()));
    }
    let references = match &a.reference {
        Some(r) => vec![(a.reference_name.clone(), parse_reference(r)?)],
        None => Vec::new(),
    };
    let plan = Comparison {
        dataset_name: a
            .benchmark
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        encoders,
        modes: a.modes.clone(),
        references,
        config,
        ..Default::default()
    };
    let report = compare_encoders(&bench, &plan)?;
    let table = render_table(&report);
    print!("{table}");
    if let Some(path) = &a.output {
        let _lock = Lock::acquire(path)?;
        std::fs::write(path, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
        let txt = path.with_extension("txt");
        std::fs::write(&txt, &table).with_context(|| format!("cannot write {}", txt.display()))?;
        out.progress(format!("wrote {} and {}", path.display(), txt.display()));
    }
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
