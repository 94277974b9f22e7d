//! Run configuration and end-to-end orchestration: classify, evaluate,
//! index, split. The `amrclass` binary is a thin argument parser over the
//! functions in this module, and the crate examples call them directly.
//!
//! Every run writes a `run_manifest.json` holding the parameters and content
//! digests of all inputs; its digest is stamped into each output file, so two
//! runs with identical configuration and inputs produce byte-identical
//! artifacts regardless of where they write.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::align::{search, AlignError, ScoringScheme, WordIndex};
use crate::evalkit::{
    emit_tables, score, score_crossmapped, EvalError, EvalReport, RunFingerprint, TableLayout,
};
use crate::extract::{extract_batch, ExtractError, PredictionRow, SynonymLexicon};
use crate::labelspace::{DrugClass, LabelError, LabelMap};
use crate::llmclient::{LlmClient, LlmError, ResponseCache};
use crate::promptgen::{
    blast_job, sequence_job, PromptError, PromptJob, TemplateKind, TruncationPolicy,
};
use crate::seqio::{
    self, parse_fasta, preprocess, read_manifest, Dataset, SeqIoError, SeqRecord, SourceDb, Split,
};

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    SeqIo(#[from] SeqIoError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignerConfig {
    pub word_size: usize,
    pub top_k: usize,
    #[serde(flatten)]
    pub scheme: ScoringScheme,
}

impl Default for AlignerConfig {
    fn default() -> Self {
        AlignerConfig {
            word_size: 11,
            top_k: 5,
            scheme: ScoringScheme::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            fractions: [0.8, 0.1, 0.1],
            seed: 17,
        }
    }
}

/// One run, one file. Relative paths are resolved against the directory the
/// config file lives in.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Dataset to classify: FASTA or JSON-lines manifest (by extension).
    pub input: PathBuf,
    /// Source database tag applied when the input is plain FASTA.
    pub input_source_db: SourceDb,
    /// References for the alignment-augmented template.
    pub reference_fasta: Option<PathBuf>,
    /// Prebuilt index; takes precedence over `reference_fasta`.
    pub index_path: Option<PathBuf>,
    /// Label integration table; omitted means the builtin table.
    pub label_table: Option<PathBuf>,
    /// Extra synonym lexicon rows; omitted means the builtin rows.
    pub synonyms: Option<PathBuf>,
    pub template: TemplateKind,
    pub aligner: AlignerConfig,
    pub backend: crate::llmclient::BackendConfig,
    pub split: SplitConfig,
    pub truncation: TruncationPolicy,
    pub output_dir: PathBuf,
    /// Response cache location; defaults to `<output_dir>/cache.jsonl`.
    pub cache_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: PathBuf::new(),
            input_source_db: SourceDb::Megares,
            reference_fasta: None,
            index_path: None,
            label_table: None,
            synonyms: None,
            template: TemplateKind::SequenceOnly,
            aligner: AlignerConfig::default(),
            backend: crate::llmclient::BackendConfig::default(),
            split: SplitConfig::default(),
            truncation: TruncationPolicy::default(),
            output_dir: PathBuf::from("out"),
            cache_path: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&p);
            }
        };
        resolve(&mut self.input);
        resolve(&mut self.output_dir);
        for p in [
            &mut self.reference_fasta,
            &mut self.index_path,
            &mut self.label_table,
            &mut self.synonyms,
            &mut self.cache_path,
            &mut self.backend.mock_rules,
            &mut self.backend.adapter,
        ]
        .into_iter()
        .flatten()
        {
            resolve(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.as_os_str().is_empty() {
            return Err(PipelineError::Config("input path is required".into()));
        }
        if !self.input.exists() {
            return Err(PipelineError::Config(format!(
                "input {} does not exist",
                self.input.display()
            )));
        }
        if self.template == TemplateKind::BlastAugmented
            && self.reference_fasta.is_none()
            && self.index_path.is_none()
        {
            return Err(PipelineError::Config(
                "BLAST_AUGMENTED needs reference_fasta or index_path".into(),
            ));
        }
        self.backend.validate()?;
        self.aligner.scheme.validate()?;
        Ok(())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_digest(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Everything that identifies a run, with content digests instead of paths so
/// the manifest is location-independent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub template: String,
    pub backend: crate::llmclient::BackendFingerprint,
    pub aligner: AlignerConfig,
    pub truncation: TruncationPolicy,
    pub input_digest: String,
    pub reference_digest: Option<String>,
    pub label_table_digest: String,
    pub synonyms_digest: String,
    pub mock_rules_digest: Option<String>,
    pub adapter_digest: Option<String>,
    pub scoring_notes: String,
}

impl RunManifest {
    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("manifest serializes"))
    }
}

const SCORING_NOTES: &str = "prediction correct iff in ground-truth set; UNCLASSIFIED always \
     incorrect, counted in unclassified rate, excluded from precision denominators; weighted \
     averaging by class support (weighted recall == accuracy); macro over all nine classes";

fn build_manifest(cfg: &RunConfig) -> Result<RunManifest> {
    let builtin_label = include_str!("../data/label_map.tsv");
    let builtin_syn = include_str!("../data/synonyms.tsv");
    Ok(RunManifest {
        tool: "amrclass".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        template: cfg.template.as_str().into(),
        backend: cfg.backend.fingerprint(),
        aligner: cfg.aligner.clone(),
        truncation: cfg.truncation,
        input_digest: file_digest(&cfg.input)?,
        reference_digest: match (&cfg.index_path, &cfg.reference_fasta) {
            (Some(p), _) if p.exists() => Some(file_digest(p)?),
            (_, Some(p)) => Some(file_digest(p)?),
            _ => None,
        },
        label_table_digest: match &cfg.label_table {
            Some(p) => file_digest(p)?,
            None => sha256_hex(builtin_label.as_bytes()),
        },
        synonyms_digest: match &cfg.synonyms {
            Some(p) => file_digest(p)?,
            None => sha256_hex(builtin_syn.as_bytes()),
        },
        mock_rules_digest: match &cfg.backend.mock_rules {
            Some(p) => Some(file_digest(p)?),
            None => None,
        },
        adapter_digest: match &cfg.backend.adapter {
            Some(p) => Some(file_digest(p)?),
            None => None,
        },
        scoring_notes: SCORING_NOTES.into(),
    })
}

fn load_label_map(cfg: &RunConfig) -> Result<LabelMap> {
    let mut map = match &cfg.label_table {
        Some(path) => LabelMap::load(BufReader::new(File::open(path)?))?,
        None => LabelMap::load(include_str!("../data/label_map.tsv").as_bytes())?,
    };
    match &cfg.synonyms {
        Some(path) => map.load_synonyms(BufReader::new(File::open(path)?))?,
        None => map.load_synonyms(include_str!("../data/synonyms.tsv").as_bytes())?,
    }
    Ok(map)
}

/// Read a dataset from FASTA or a JSON-lines manifest, by extension.
pub fn load_dataset(path: &Path, source_db: SourceDb) -> Result<Dataset> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    if ext == "jsonl" || ext == "json" {
        Ok(read_manifest(BufReader::new(File::open(path)?))?)
    } else {
        let records = parse_fasta(BufReader::new(File::open(path)?), source_db)?;
        Ok(Dataset::new(records))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifySummary {
    pub n_input: usize,
    pub n_dropped: usize,
    pub n_jobs: usize,
    pub n_cached: usize,
    pub n_failures: usize,
    pub manifest_digest: String,
    pub predictions_path: PathBuf,
}

/// Full pipeline: preprocess, (optionally) search, render, complete, extract.
/// Already-cached jobs are skipped by the response cache, so reruns are
/// resumable and cheap.
pub fn classify_run(cfg: &RunConfig) -> Result<ClassifySummary> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let manifest = build_manifest(cfg)?;
    let manifest_digest = manifest.digest();

    let dataset = load_dataset(&cfg.input, cfg.input_source_db)?;
    let n_input = dataset.records.len();
    let outcome = preprocess(dataset.records);
    let records = outcome.records;
    let n_dropped = outcome.dropped.len();

    let label_map = load_label_map(cfg)?;
    let lexicon = SynonymLexicon::from_label_map(&label_map)?;

    // render jobs, searching first when the template wants hits
    let mut jobs: Vec<PromptJob> = Vec::with_capacity(records.len());
    let mut hits_out = BufWriter::new(File::create(cfg.output_dir.join("hits.jsonl"))?);
    match cfg.template {
        TemplateKind::SequenceOnly => {
            for rec in &records {
                jobs.push(sequence_job(rec, &cfg.truncation)?);
            }
        }
        TemplateKind::BlastAugmented => {
            let index = match &cfg.index_path {
                Some(path) => WordIndex::load(path)?,
                None => {
                    let ref_path = cfg.reference_fasta.as_ref().expect("validated");
                    let refs =
                        parse_fasta(BufReader::new(File::open(ref_path)?), cfg.input_source_db)?;
                    let refs = preprocess(refs).records;
                    WordIndex::build(&refs, cfg.aligner.word_size)?
                }
            };
            for rec in &records {
                let hits = search(&index, rec, &cfg.aligner.scheme, cfg.aligner.top_k)?;
                for hit in &hits {
                    hits_out.write_all(hit.to_json_line().as_bytes())?;
                    hits_out.write_all(b"\n")?;
                }
                jobs.push(blast_job(rec, &hits, &cfg.truncation));
            }
        }
    }
    hits_out.flush()?;

    let mut jobs_out = BufWriter::new(File::create(cfg.output_dir.join("jobs.jsonl"))?);
    crate::promptgen::write_jobs(&jobs, &mut jobs_out)?;
    jobs_out.flush()?;

    let cache_path = cfg
        .cache_path
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join("cache.jsonl"));
    let cache = ResponseCache::open(&cache_path)?;
    let client = LlmClient::new(cfg.backend.clone())?;
    let results = client.run_batch(&jobs, &cache);

    let mut replies = Vec::new();
    let mut failures = Vec::new();
    let mut n_cached = 0usize;
    for result in results {
        match result {
            Ok(reply) => {
                if reply.cached {
                    n_cached += 1;
                }
                replies.push(reply);
            }
            Err(failure) => failures.push(failure),
        }
    }

    let predictions = extract_batch(&replies, &lexicon);
    let predictions_path = cfg.output_dir.join("predictions.jsonl");
    {
        let mut out = BufWriter::new(File::create(&predictions_path)?);
        for pred in &predictions {
            let row = PredictionRow {
                record_id: pred.record_id.clone(),
                predicted_class: pred.predicted_class,
                counts: pred.counts.clone(),
                template_kind: cfg.template,
                backend: cfg.backend.fingerprint(),
                manifest_digest: manifest_digest.clone(),
            };
            serde_json::to_writer(&mut out, &row).map_err(std::io::Error::other)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
    }

    if !failures.is_empty() {
        #[derive(Serialize)]
        struct FailureRow<'a> {
            job_id: &'a str,
            error: &'a str,
            manifest_digest: &'a str,
        }
        let mut out = BufWriter::new(File::create(cfg.output_dir.join("failures.jsonl"))?);
        for failure in &failures {
            let row = FailureRow {
                job_id: &failure.job_id,
                error: &failure.error,
                manifest_digest: &manifest_digest,
            };
            serde_json::to_writer(&mut out, &row).map_err(std::io::Error::other)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
    }

    std::fs::write(
        cfg.output_dir.join("run_manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
    )?;

    Ok(ClassifySummary {
        n_input,
        n_dropped,
        n_jobs: jobs.len(),
        n_cached,
        n_failures: failures.len(),
        manifest_digest,
        predictions_path,
    })
}

/// Read back a predictions file.
pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    use std::io::BufRead;
    let mut rows = Vec::new();
    for (lineno, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: PredictionRow = serde_json::from_str(&line).map_err(|e| {
            PipelineError::Config(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub predictions: PathBuf,
    pub truth: PathBuf,
    pub label_table: Option<PathBuf>,
    pub layout: TableLayout,
    /// Target database for the cross-label layout.
    pub target_db: SourceDb,
    /// Restrict scoring to records in this split bucket of the truth manifest.
    pub only_split: Option<Split>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalSummary {
    pub layout: String,
    pub n_scored: usize,
    pub report: EvalReport,
    pub text_path: PathBuf,
    pub csv_path: PathBuf,
}

/// Score a predictions file against a truth manifest and write the table pair
/// for the requested layout.
pub fn eval_run(args: &EvalArgs) -> Result<EvalSummary> {
    std::fs::create_dir_all(&args.output_dir)?;
    let rows = read_predictions(&args.predictions)?;
    if rows.is_empty() {
        return Err(PipelineError::Config(format!(
            "{} holds no predictions",
            args.predictions.display()
        )));
    }
    let truth_dataset = load_dataset(&args.truth, SourceDb::Megares)?;
    let (map, label_table_digest) = match &args.label_table {
        Some(path) => (
            LabelMap::load(BufReader::new(File::open(path)?))?,
            file_digest(path)?,
        ),
        None => (
            LabelMap::builtin(),
            sha256_hex(include_str!("../data/label_map.tsv").as_bytes()),
        ),
    };

    let keep = |id: &str| -> bool {
        match (&args.only_split, &truth_dataset.split_assignment) {
            (Some(bucket), Some(assignment)) => assignment.get(id) == Some(bucket),
            (Some(_), None) => false,
            (None, _) => true,
        }
    };
    let predictions: Vec<crate::extract::Prediction> = rows
        .iter()
        .filter(|r| keep(&r.record_id))
        .map(|r| crate::extract::Prediction {
            record_id: r.record_id.clone(),
            predicted_class: r.predicted_class,
            counts: r.counts.clone(),
        })
        .collect();
    if predictions.is_empty() {
        return Err(PipelineError::Config(
            "no predictions left after split filtering".into(),
        ));
    }

    let fingerprint = RunFingerprint {
        model_name: rows[0].backend.model_name.clone(),
        template: rows[0].template_kind.as_str().into(),
        backend_kind: rows[0].backend.kind.clone(),
        // aligner parameters live in the classify manifest this digest names
        aligner: rows[0].manifest_digest.clone(),
        lexicon_digest: String::new(),
        label_table_digest,
    };

    let report = match args.layout {
        TableLayout::CrossLabel => {
            let mut truth: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
            for rec in &truth_dataset.records {
                truth.insert(rec.id.clone(), rec.raw_labels.iter().cloned().collect());
            }
            let outcome = score_crossmapped(&predictions, &truth, &map, args.target_db)?;
            EvalReport::accuracy_only(&outcome, fingerprint)
        }
        _ => {
            let mut truth: BTreeMap<String, BTreeSet<DrugClass>> = BTreeMap::new();
            for rec in &truth_dataset.records {
                if rec.raw_labels.is_empty() {
                    continue;
                }
                truth.insert(rec.id.clone(), map.canonicalize(rec)?);
            }
            score(&predictions, &truth, fingerprint)?
        }
    };

    let tables = emit_tables(std::slice::from_ref(&report), args.layout)?;
    let eval_manifest = serde_json::json!({
        "tool": "amrclass",
        "version": env!("CARGO_PKG_VERSION"),
        "layout": args.layout.as_str(),
        "predictions_digest": file_digest(&args.predictions)?,
        "truth_digest": file_digest(&args.truth)?,
        "classify_manifest_digest": rows[0].manifest_digest,
        "scoring_notes": SCORING_NOTES,
    });
    let eval_digest = sha256_hex(&serde_json::to_vec(&eval_manifest).expect("serializes"));

    let stem = args.layout.as_str().to_ascii_lowercase();
    let text_path = args.output_dir.join(format!("report_{stem}.txt"));
    let csv_path = args.output_dir.join(format!("report_{stem}.csv"));
    std::fs::write(
        &text_path,
        format!("# run-manifest: {eval_digest}\n{}", tables.text),
    )?;
    std::fs::write(
        &csv_path,
        format!("# run-manifest: {eval_digest}\n{}", tables.csv),
    )?;
    std::fs::write(
        args.output_dir.join(format!("eval_manifest_{stem}.json")),
        serde_json::to_string_pretty(&eval_manifest).expect("serializes") + "\n",
    )?;

    let n_scored = predictions.len();
    Ok(EvalSummary {
        layout: args.layout.as_str().into(),
        n_scored,
        report,
        text_path,
        csv_path,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexSummary {
    pub n_references: usize,
    pub total_bases: u64,
    pub index_path: PathBuf,
}

/// Build and persist a word index over a reference FASTA.
pub fn index_run(refs_fasta: &Path, out: &Path, word_size: usize) -> Result<IndexSummary> {
    let refs = parse_fasta(BufReader::new(File::open(refs_fasta)?), SourceDb::Megares)?;
    let refs = preprocess(refs).records;
    let index = WordIndex::build(&refs, word_size)?;
    index.save(out)?;
    Ok(IndexSummary {
        n_references: index.references().len(),
        total_bases: index.total_db_length(),
        index_path: out.to_path_buf(),
    })
}

/// Stratified split of a dataset by canonical drug class; records without
/// labels form their own stratum.
pub fn split_run(
    input: &Path,
    source_db: SourceDb,
    label_table: Option<&Path>,
    fractions: [f64; 3],
    seed: u64,
    out: &Path,
) -> Result<Dataset> {
    let dataset = load_dataset(input, source_db)?;
    let map = match label_table {
        Some(path) => LabelMap::load(BufReader::new(File::open(path)?))?,
        None => LabelMap::builtin(),
    };
    // pre-validate labels so stratification errors carry the offending label
    for rec in &dataset.records {
        if !rec.raw_labels.is_empty() {
            map.canonicalize(rec)?;
        }
    }
    let split = seqio::split(&dataset, fractions, seed, |rec| {
        match map.canonicalize(rec) {
            Ok(classes) if !classes.is_empty() => classes
                .iter()
                .map(|c| c.canonical_name())
                .collect::<Vec<_>>()
                .join("+"),
            _ => "unlabeled".to_string(),
        }
    })?;
    let mut out_file = BufWriter::new(File::create(out)?);
    seqio::write_manifest(&split, &mut out_file)?;
    out_file.flush()?;
    Ok(split)
}

/// Render-only debugging: produce the jobs a classify run would send.
pub fn prompt_run(cfg: &RunConfig, record_id: Option<&str>) -> Result<Vec<PromptJob>> {
    cfg.validate()?;
    let dataset = load_dataset(&cfg.input, cfg.input_source_db)?;
    let records: Vec<SeqRecord> = preprocess(dataset.records)
        .records
        .into_iter()
        .filter(|r| record_id.is_none_or(|id| r.id == id))
        .collect();
    if records.is_empty() {
        return Err(PipelineError::Config(match record_id {
            Some(id) => format!("record {id:?} not found in input"),
            None => "input holds no usable records".into(),
        }));
    }
    let mut jobs = Vec::new();
    match cfg.template {
        TemplateKind::SequenceOnly => {
            for rec in &records {
                jobs.push(sequence_job(rec, &cfg.truncation)?);
            }
        }
        TemplateKind::BlastAugmented => {
            let index = match &cfg.index_path {
                Some(path) => WordIndex::load(path)?,
                None => {
                    let ref_path = cfg.reference_fasta.as_ref().expect("validated");
                    let refs =
                        parse_fasta(BufReader::new(File::open(ref_path)?), cfg.input_source_db)?;
                    WordIndex::build(&preprocess(refs).records, cfg.aligner.word_size)?
                }
            };
            for rec in &records {
                let hits = search(&index, rec, &cfg.aligner.scheme, cfg.aligner.top_k)?;
                jobs.push(blast_job(rec, &hits, &cfg.truncation));
            }
        }
    }
    Ok(jobs)
}
