//! Thin subcommand wrapper over the library pipeline.
//!
//! Exit codes: 0 success, 1 partial per-record failures during classify,
//! 2 configuration or input errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use amrclass::evalkit::TableLayout;
use amrclass::pipeline::{
    classify_run, eval_run, index_run, prompt_run, split_run, EvalArgs, RunConfig,
};
use amrclass::seqio::{SourceDb, Split};

#[derive(Parser)]
#[command(name = "amrclass", version)]
#[command(about = "Classify antimicrobial-resistance genes into drug classes with LLM prompts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a word index over a reference FASTA
    Index {
        /// Reference FASTA
        refs: PathBuf,
        /// Output index file
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 11)]
        word_size: usize,
    },
    /// Run the full pipeline from a run-config file
    Classify {
        /// Run configuration (JSON)
        #[arg(short, long)]
        config: PathBuf,
        /// Override the output directory
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Override the template kind (SEQUENCE_ONLY | BLAST_AUGMENTED)
        #[arg(long)]
        template: Option<String>,
    },
    /// Score a predictions file against a truth manifest
    Eval {
        #[arg(short, long)]
        predictions: PathBuf,
        /// Truth manifest (JSON lines with raw_labels)
        #[arg(short, long)]
        truth: PathBuf,
        /// Layout: unclassified | full | cross
        #[arg(long, default_value = "full")]
        layout: String,
        /// Label table TSV (defaults to the builtin table)
        #[arg(long)]
        label_table: Option<PathBuf>,
        /// Target database for --layout cross
        #[arg(long, default_value = "CARD")]
        target_db: String,
        /// Score only records assigned to this split (TRAIN | DEV | TEST)
        #[arg(long)]
        split: Option<String>,
        #[arg(short, long, default_value = "reports")]
        out: PathBuf,
    },
    /// Stratified train/dev/test split of a dataset
    Split {
        /// Input dataset (FASTA or manifest JSON lines)
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Source database tag for FASTA input
        #[arg(long, default_value = "MEGARES")]
        source_db: String,
        /// Comma-separated train,dev,test fractions
        #[arg(long, default_value = "0.8,0.1,0.1")]
        fractions: String,
        #[arg(long, default_value_t = 17)]
        seed: u64,
        #[arg(long)]
        label_table: Option<PathBuf>,
    },
    /// Render prompts without calling any backend
    Prompt {
        #[arg(short, long)]
        config: PathBuf,
        /// Render only this record
        #[arg(long)]
        record_id: Option<String>,
        /// Write jobs here instead of printing prompts
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn parse_layout(s: &str) -> anyhow::Result<TableLayout> {
    match s.to_ascii_lowercase().as_str() {
        "unclassified" | "unclassified_rate" | "rate" => Ok(TableLayout::UnclassifiedRate),
        "full" | "full_metrics" | "metrics" => Ok(TableLayout::FullMetrics),
        "cross" | "cross_label" => Ok(TableLayout::CrossLabel),
        other => anyhow::bail!("unknown layout {other:?} (use unclassified|full|cross)"),
    }
}

fn parse_db(s: &str) -> anyhow::Result<SourceDb> {
    SourceDb::parse(s).with_context(|| format!("unknown source db {s:?} (use MEGARES|CARD)"))
}

fn parse_split_bucket(s: &str) -> anyhow::Result<Split> {
    match s.to_ascii_uppercase().as_str() {
        "TRAIN" => Ok(Split::Train),
        "DEV" => Ok(Split::Dev),
        "TEST" => Ok(Split::Test),
        other => anyhow::bail!("unknown split bucket {other:?} (use TRAIN|DEV|TEST)"),
    }
}

fn parse_fractions(s: &str) -> anyhow::Result<[f64; 3]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad fractions {s:?}"))?;
    anyhow::ensure!(
        parts.len() == 3,
        "need exactly three fractions, got {}",
        parts.len()
    );
    Ok([parts[0], parts[1], parts[2]])
}

fn run() -> anyhow::Result<u8> {
    match Cli::parse().command {
        Command::Index {
            refs,
            out,
            word_size,
        } => {
            let summary = index_run(&refs, &out, word_size)?;
            println!(
                "indexed {} sequences ({} bp total) -> {}",
                summary.n_references,
                summary.total_bases,
                summary.index_path.display()
            );
            Ok(0)
        }
        Command::Classify {
            config,
            output_dir,
            template,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            if let Some(t) = template {
                cfg.template = match t.to_ascii_uppercase().as_str() {
                    "SEQUENCE_ONLY" => amrclass::promptgen::TemplateKind::SequenceOnly,
                    "BLAST_AUGMENTED" => amrclass::promptgen::TemplateKind::BlastAugmented,
                    other => anyhow::bail!("unknown template {other:?}"),
                };
            }
            let summary = classify_run(&cfg)?;
            println!(
                "classified {} records ({} dropped, {} cached, {} failed) -> {}",
                summary.n_jobs,
                summary.n_dropped,
                summary.n_cached,
                summary.n_failures,
                summary.predictions_path.display()
            );
            println!("run manifest digest: {}", summary.manifest_digest);
            Ok(if summary.n_failures > 0 { 1 } else { 0 })
        }
        Command::Eval {
            predictions,
            truth,
            layout,
            label_table,
            target_db,
            split,
            out,
        } => {
            let summary = eval_run(&EvalArgs {
                predictions,
                truth,
                label_table,
                layout: parse_layout(&layout)?,
                target_db: parse_db(&target_db)?,
                only_split: split.as_deref().map(parse_split_bucket).transpose()?,
                output_dir: out,
            })?;
            print!("{}", std::fs::read_to_string(&summary.text_path)?);
            println!(
                "scored {} predictions; wrote {} and {}",
                summary.n_scored,
                summary.text_path.display(),
                summary.csv_path.display()
            );
            Ok(0)
        }
        Command::Split {
            input,
            out,
            source_db,
            fractions,
            seed,
            label_table,
        } => {
            let dataset = split_run(
                &input,
                parse_db(&source_db)?,
                label_table.as_deref(),
                parse_fractions(&fractions)?,
                seed,
                &out,
            )?;
            let map = dataset.split_assignment.expect("split assigned");
            let count = |b: Split| map.values().filter(|s| **s == b).count();
            println!(
                "split {} records: {} train / {} dev / {} test -> {}",
                map.len(),
                count(Split::Train),
                count(Split::Dev),
                count(Split::Test),
                out.display()
            );
            Ok(0)
        }
        Command::Prompt {
            config,
            record_id,
            out,
        } => {
            let cfg = RunConfig::load(&config)?;
            let jobs = prompt_run(&cfg, record_id.as_deref())?;
            match out {
                Some(path) => {
                    let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
                    amrclass::promptgen::write_jobs(&jobs, &mut file)?;
                    println!("wrote {} job(s) -> {}", jobs.len(), path.display());
                }
                None => {
                    for job in &jobs {
                        println!("{}", job.prompt);
                    }
                }
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
