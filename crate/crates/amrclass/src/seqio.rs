//! FASTA parsing, preprocessing, stratified splitting, and dataset manifests.
//!
//! A dataset on disk is either a FASTA file or a JSON-lines manifest with one
//! record per line (keys `id`, `header`, `sequence`, `source_db`,
//! `raw_labels`, `split`). Preprocessing uppercases sequences and drops
//! records containing characters outside `{A,C,G,T,N}`.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Result<T> = std::result::Result<T, SeqIoError>;

#[derive(Debug, Error)]
pub enum SeqIoError {
    #[error("malformed FASTA at line {line}: {reason}")]
    MalformedFasta { line: usize, reason: String },
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error(
        "class {class:?} has {available} record(s) but the split uses {required} non-empty buckets"
    )]
    InsufficientClassSupport {
        class: String,
        available: usize,
        required: usize,
    },
    #[error("split fractions must be non-negative and sum to 1.0, got {0:?}")]
    BadFractions([f64; 3]),
    #[error("manifest line {line}: {source}")]
    BadManifest {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which reference database a record was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SourceDb {
    #[serde(rename = "MEGARES")]
    Megares,
    #[serde(rename = "CARD")]
    Card,
}

impl SourceDb {
    pub fn as_str(&self) -> &'static str {
        match self {
            SourceDb::Megares => "MEGARES",
            SourceDb::Card => "CARD",
        }
    }

    pub fn parse(s: &str) -> Option<SourceDb> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MEGARES" => Some(SourceDb::Megares),
            "CARD" => Some(SourceDb::Card),
            _ => None,
        }
    }
}

/// One DNA sequence with its identifiers and source-database labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeqRecord {
    pub id: String,
    pub header: String,
    pub sequence: String,
    pub source_db: SourceDb,
    pub raw_labels: Vec<String>,
}

/// Split bucket assignment for one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    #[serde(rename = "TRAIN")]
    Train,
    #[serde(rename = "DEV")]
    Dev,
    #[serde(rename = "TEST")]
    Test,
}

/// An ordered record collection plus an optional split assignment.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub records: Vec<SeqRecord>,
    pub split_assignment: Option<BTreeMap<String, Split>>,
    pub seed: u64,
}

impl Dataset {
    pub fn new(records: Vec<SeqRecord>) -> Self {
        Dataset {
            records,
            split_assignment: None,
            seed: 0,
        }
    }

    /// Records assigned to `bucket`, in dataset order.
    pub fn bucket(&self, bucket: Split) -> Vec<&SeqRecord> {
        match &self.split_assignment {
            None => Vec::new(),
            Some(map) => self
                .records
                .iter()
                .filter(|r| map.get(&r.id) == Some(&bucket))
                .collect(),
        }
    }
}

/// Parse FASTA text into records. The id is the header token up to the first
/// whitespace; the full header is kept verbatim. Sequence lines are
/// concatenated with all whitespace stripped; case is preserved (run
/// [`preprocess`] afterwards).
pub fn parse_fasta<R: BufRead>(input: R, source_db: SourceDb) -> Result<Vec<SeqRecord>> {
    let mut records: Vec<SeqRecord> = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    let mut current: Option<(String, String, String, usize)> = None; // id, header, seq, header line

    let mut flush = |cur: &mut Option<(String, String, String, usize)>,
                     recs: &mut Vec<SeqRecord>|
     -> Result<()> {
        if let Some((id, header, seq, header_line)) = cur.take() {
            if seq.is_empty() {
                return Err(SeqIoError::MalformedFasta {
                    line: header_line,
                    reason: format!("entry {:?} has no sequence", id),
                });
            }
            if !seen_ids.insert(id.clone()) {
                return Err(SeqIoError::DuplicateId(id));
            }
            recs.push(SeqRecord {
                id,
                header,
                sequence: seq,
                source_db,
                raw_labels: Vec::new(),
            });
        }
        Ok(())
    };

    for (lineno, line) in input.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if let Some(header) = line.strip_prefix('>') {
            flush(&mut current, &mut records)?;
            let header = header.to_string();
            let id = header.split_whitespace().next().unwrap_or("").to_string();
            current = Some((id, header, String::new(), lineno));
        } else if line.trim().is_empty() {
            continue;
        } else {
            match &mut current {
                None => {
                    return Err(SeqIoError::MalformedFasta {
                        line: lineno,
                        reason: "sequence data before any '>' header".into(),
                    })
                }
                Some((_, _, seq, _)) => {
                    seq.extend(line.chars().filter(|c| !c.is_whitespace()));
                }
            }
        }
    }
    flush(&mut current, &mut records)?;
    Ok(records)
}

/// Write records back out as FASTA, wrapping sequences at `width` columns.
pub fn write_fasta<W: Write>(records: &[SeqRecord], width: usize, out: &mut W) -> Result<()> {
    let width = width.max(1);
    for rec in records {
        writeln!(out, ">{}", rec.header)?;
        let bytes = rec.sequence.as_bytes();
        for chunk in bytes.chunks(width) {
            out.write_all(chunk)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Why a record was removed during preprocessing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DropReason {
    EmptySequence,
    InvalidCharacter(char),
}

#[derive(Debug, Clone)]
pub struct DroppedRecord {
    pub id: String,
    pub reason: DropReason,
}

#[derive(Debug, Clone, Default)]
pub struct PreprocessOutcome {
    pub records: Vec<SeqRecord>,
    pub dropped: Vec<DroppedRecord>,
}

fn valid_base(c: char) -> bool {
    matches!(c, 'A' | 'C' | 'G' | 'T' | 'N')
}

/// Uppercase every sequence and drop records that are empty or contain
/// characters outside `{A,C,G,T,N}`. 'N' is kept because reference databases
/// carry it as an ambiguity placeholder; all other IUPAC codes invalidate the
/// record. Idempotent.
pub fn preprocess(records: Vec<SeqRecord>) -> PreprocessOutcome {
    let mut out = PreprocessOutcome::default();
    for mut rec in records {
        rec.sequence = rec.sequence.to_uppercase();
        if rec.sequence.is_empty() {
            out.dropped.push(DroppedRecord {
                id: rec.id,
                reason: DropReason::EmptySequence,
            });
            continue;
        }
        match rec.sequence.chars().find(|c| !valid_base(*c)) {
            Some(bad) => out.dropped.push(DroppedRecord {
                id: rec.id,
                reason: DropReason::InvalidCharacter(bad),
            }),
            None => out.records.push(rec),
        }
    }
    out
}

/// Stratified train/dev/test split. Records are grouped by `stratum_of`
/// (typically the canonical drug class), each group is shuffled with a
/// ChaCha stream seeded from `seed`, and cut proportionally to `fractions`.
/// Groups are visited in sorted key order, so identical inputs always yield
/// the identical assignment.
pub fn split<F>(dataset: &Dataset, fractions: [f64; 3], seed: u64, stratum_of: F) -> Result<Dataset>
where
    F: Fn(&SeqRecord) -> String,
{
    if fractions.iter().any(|f| *f < 0.0) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(SeqIoError::BadFractions(fractions));
    }
    let buckets_in_use = fractions.iter().filter(|f| **f > 0.0).count();

    let mut strata: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, rec) in dataset.records.iter().enumerate() {
        strata.entry(stratum_of(rec)).or_default().push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment: BTreeMap<String, Split> = BTreeMap::new();
    for (class, mut idxs) in strata {
        if idxs.len() < buckets_in_use {
            return Err(SeqIoError::InsufficientClassSupport {
                class,
                available: idxs.len(),
                required: buckets_in_use,
            });
        }
        idxs.shuffle(&mut rng);
        let n = idxs.len() as f64;
        let cut1 = ((fractions[0] * n).round() as usize).min(idxs.len());
        let cut2 = (((fractions[0] + fractions[1]) * n).round() as usize).clamp(cut1, idxs.len());
        for (pos, idx) in idxs.iter().enumerate() {
            let bucket = if pos < cut1 {
                Split::Train
            } else if pos < cut2 {
                Split::Dev
            } else {
                Split::Test
            };
            assignment.insert(dataset.records[*idx].id.clone(), bucket);
        }
    }

    Ok(Dataset {
        records: dataset.records.clone(),
        split_assignment: Some(assignment),
        seed,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRow {
    id: String,
    header: String,
    sequence: String,
    source_db: SourceDb,
    raw_labels: Vec<String>,
    split: Option<Split>,
}

/// Write the dataset as a JSON-lines manifest, one record per line.
pub fn write_manifest<W: Write>(dataset: &Dataset, out: &mut W) -> Result<()> {
    for rec in &dataset.records {
        let row = ManifestRow {
            id: rec.id.clone(),
            header: rec.header.clone(),
            sequence: rec.sequence.clone(),
            source_db: rec.source_db,
            raw_labels: rec.raw_labels.clone(),
            split: dataset
                .split_assignment
                .as_ref()
                .and_then(|m| m.get(&rec.id).copied()),
        };
        serde_json::to_writer(&mut *out, &row).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Read a JSON-lines manifest back into a dataset.
pub fn read_manifest<R: BufRead>(input: R) -> Result<Dataset> {
    let mut records = Vec::new();
    let mut assignment: BTreeMap<String, Split> = BTreeMap::new();
    let mut any_split = false;
    let mut seen: HashSet<String> = HashSet::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: ManifestRow =
            serde_json::from_str(&line).map_err(|source| SeqIoError::BadManifest {
                line: lineno + 1,
                source,
            })?;
        if !seen.insert(row.id.clone()) {
            return Err(SeqIoError::DuplicateId(row.id));
        }
        if let Some(bucket) = row.split {
            assignment.insert(row.id.clone(), bucket);
            any_split = true;
        }
        records.push(SeqRecord {
            id: row.id,
            header: row.header,
            sequence: row.sequence,
            source_db: row.source_db,
            raw_labels: row.raw_labels,
        });
    }
    Ok(Dataset {
        records,
        split_assignment: if any_split { Some(assignment) } else { None },
        seed: 0,
    })
}

/// Pull a raw label out of a pipe-delimited FASTA header field, e.g. field 2
/// of `MEG_411|Drugs|Betalactams|...`.
pub fn label_from_header(header: &str, delimiter: char, field: usize) -> Option<String> {
    header
        .split(delimiter)
        .nth(field)
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
}
