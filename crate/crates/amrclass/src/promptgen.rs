//! Render classification prompts, byte-for-byte.
//!
//! Two templates exist: sequence-only and alignment-augmented. Both embed the
//! fixed nine-class list exactly once. The alignment-augmented template
//! serializes hits as a bracketed list of mapping literals with single-quoted
//! keys and values in a fixed key order; [`parse_hitlist`] reads that literal
//! form back for round-trip checks.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{AlignmentHit, HitRecord};
use crate::seqio::SeqRecord;

pub type Result<T> = std::result::Result<T, PromptError>;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("record {0:?} has an empty sequence")]
    EmptySequence(String),
    #[error("bad hit list literal at byte {at}: {reason}")]
    BadHitList { at: usize, reason: String },
    #[error("jobs line {line}: {source}")]
    BadJobLine {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The nine drug classes exactly as they appear inside every prompt.
pub const CLASS_LIST: &str = "Sulfonamides, Aminoglycosides, Betalactams, Glycopeptides, \
                              Tetracyclines, Phenicol, Fluoroquinolones, MLS, Multi-drug_resistance";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemplateKind {
    #[serde(rename = "SEQUENCE_ONLY")]
    SequenceOnly,
    #[serde(rename = "BLAST_AUGMENTED")]
    BlastAugmented,
}

impl TemplateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TemplateKind::SequenceOnly => "SEQUENCE_ONLY",
            TemplateKind::BlastAugmented => "BLAST_AUGMENTED",
        }
    }
}

/// A rendered prompt bound to the record it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptJob {
    pub job_id: String,
    pub record_id: String,
    pub template_kind: TemplateKind,
    pub prompt: String,
    pub truncated: bool,
}

/// Optional input-size limits; both default to off. Truncation is recorded on
/// the job so evaluation can stratify by it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TruncationPolicy {
    pub max_sequence_bases: Option<usize>,
    pub max_alignment_columns: Option<usize>,
}

/// `Tell me the resistance drug among drugs (<classes>) with DNA sequence
/// (<SEQ>)?` — the full uppercase sequence, unwrapped.
pub fn render_sequence_prompt(record: &SeqRecord) -> Result<String> {
    if record.sequence.is_empty() {
        return Err(PromptError::EmptySequence(record.id.clone()));
    }
    Ok(format!(
        "Tell me the resistance drug among drugs ({CLASS_LIST}) with DNA sequence ({})?",
        record.sequence
    ))
}

/// Sequence-only prompt as a job, applying the truncation policy.
pub fn sequence_job(record: &SeqRecord, policy: &TruncationPolicy) -> Result<PromptJob> {
    if record.sequence.is_empty() {
        return Err(PromptError::EmptySequence(record.id.clone()));
    }
    let (seq, truncated) = match policy.max_sequence_bases {
        Some(limit) if record.sequence.len() > limit => (&record.sequence[..limit], true),
        _ => (record.sequence.as_str(), false),
    };
    Ok(PromptJob {
        job_id: record.id.clone(),
        record_id: record.id.clone(),
        template_kind: TemplateKind::SequenceOnly,
        prompt: format!(
            "Tell me the resistance drug among drugs ({CLASS_LIST}) with DNA sequence ({seq})?"
        ),
        truncated,
    })
}

/// `Tell me the resistance drug among drugs (<classes>) with DNA information
/// (<HITLIST>)?` — an empty hit list renders as `([])`.
pub fn render_blast_prompt(hits: &[AlignmentHit]) -> String {
    let records: Vec<HitRecord<'_>> = hits.iter().map(AlignmentHit::to_record).collect();
    format!(
        "Tell me the resistance drug among drugs ({CLASS_LIST}) with DNA information ({})?",
        render_hitlist(&records)
    )
}

/// Alignment-augmented prompt as a job, applying the truncation policy to the
/// three row strings.
pub fn blast_job(
    record: &SeqRecord,
    hits: &[AlignmentHit],
    policy: &TruncationPolicy,
) -> PromptJob {
    let mut truncated = false;
    let clipped: Vec<(String, String, String)> = hits
        .iter()
        .map(|h| {
            let mut clip = |row: &str| match policy.max_alignment_columns {
                Some(limit) if row.len() > limit => {
                    truncated = true;
                    row[..limit].to_string()
                }
                _ => row.to_string(),
            };
            (
                clip(&h.query_sequence),
                clip(&h.match_sequence),
                clip(&h.subject_sequence),
            )
        })
        .collect();
    let records: Vec<HitRecord<'_>> = hits
        .iter()
        .zip(&clipped)
        .map(|(h, (q, m, s))| HitRecord {
            sequence_title: &h.sequence_title,
            alignment_length: h.alignment_length,
            e_value: h.e_value,
            query_sequence: q,
            match_sequence: m,
            subject_sequence: s,
        })
        .collect();
    PromptJob {
        job_id: record.id.clone(),
        record_id: record.id.clone(),
        template_kind: TemplateKind::BlastAugmented,
        prompt: format!(
            "Tell me the resistance drug among drugs ({CLASS_LIST}) with DNA information ({})?",
            render_hitlist(&records)
        ),
        truncated,
    }
}

/// Shortest round-trip decimal for e-values; zero renders as `0.0`.
fn format_evalue(value: f64) -> String {
    format!("{value:?}")
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            _ => out.push(c),
        }
    }
    out.push('\'');
    out
}

fn render_hitlist(records: &[HitRecord<'_>]) -> String {
    let mut out = String::from("[");
    for (i, r) in records.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&format!(
            "{{'sequence_title': {}, 'alignment_length': {}, 'e_value': {}, \
             'query_sequence': {}, 'match_sequence': {}, 'subject_sequence': {}}}",
            quote(r.sequence_title),
            r.alignment_length,
            format_evalue(r.e_value),
            quote(r.query_sequence),
            quote(r.match_sequence),
            quote(r.subject_sequence),
        ));
    }
    out.push(']');
    out
}

/// One hit read back from the mapping-literal form.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedHit {
    pub sequence_title: String,
    pub alignment_length: usize,
    pub e_value: f64,
    pub query_sequence: String,
    pub match_sequence: String,
    pub subject_sequence: String,
}

/// Parse the bracketed mapping-literal list produced by the alignment
/// template back into hits.
pub fn parse_hitlist(input: &str) -> Result<Vec<ParsedHit>> {
    let mut p = Parser {
        bytes: input.as_bytes(),
        pos: 0,
    };
    p.expect(b'[')?;
    let mut hits = Vec::new();
    p.skip_ws();
    if p.peek() == Some(b']') {
        return Ok(hits);
    }
    loop {
        hits.push(p.parse_entry()?);
        p.skip_ws();
        match p.next() {
            Some(b',') => p.skip_ws(),
            Some(b']') => break,
            other => {
                return Err(p.error(format!("expected ',' or ']', found {other:?}")));
            }
        }
    }
    Ok(hits)
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, reason: String) -> PromptError {
        PromptError::BadHitList {
            at: self.pos,
            reason,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<u8> {
        let b = self.peek();
        if b.is_some() {
            self.pos += 1;
        }
        b
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ') | Some(b'\t')) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, want: u8) -> Result<()> {
        match self.next() {
            Some(b) if b == want => Ok(()),
            other => Err(self.error(format!("expected {:?}, found {other:?}", want as char))),
        }
    }

    fn parse_quoted(&mut self) -> Result<String> {
        self.expect(b'\'')?;
        let mut out = String::new();
        loop {
            match self.next() {
                Some(b'\'') => return Ok(out),
                Some(b'\\') => match self.next() {
                    Some(b'\'') => out.push('\''),
                    Some(b'\\') => out.push('\\'),
                    other => return Err(self.error(format!("bad escape {other:?}"))),
                },
                Some(b) => out.push(b as char),
                None => return Err(self.error("unterminated string".into())),
            }
        }
    }

    fn parse_number(&mut self) -> Result<f64> {
        let start = self.pos;
        while matches!(
            self.peek(),
            Some(b'0'..=b'9') | Some(b'.') | Some(b'-') | Some(b'+') | Some(b'e') | Some(b'E')
        ) {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii number");
        text.parse::<f64>()
            .map_err(|e| self.error(format!("bad number {text:?}: {e}")))
    }

    fn parse_entry(&mut self) -> Result<ParsedHit> {
        self.expect(b'{')?;
        let mut hit = ParsedHit {
            sequence_title: String::new(),
            alignment_length: 0,
            e_value: 0.0,
            query_sequence: String::new(),
            match_sequence: String::new(),
            subject_sequence: String::new(),
        };
        loop {
            self.skip_ws();
            let key = self.parse_quoted()?;
            self.skip_ws();
            self.expect(b':')?;
            self.skip_ws();
            match key.as_str() {
                "sequence_title" => hit.sequence_title = self.parse_quoted()?,
                "query_sequence" => hit.query_sequence = self.parse_quoted()?,
                "match_sequence" => hit.match_sequence = self.parse_quoted()?,
                "subject_sequence" => hit.subject_sequence = self.parse_quoted()?,
                "alignment_length" => hit.alignment_length = self.parse_number()? as usize,
                "e_value" => hit.e_value = self.parse_number()?,
                other => return Err(self.error(format!("unknown key {other:?}"))),
            }
            self.skip_ws();
            match self.next() {
                Some(b',') => continue,
                Some(b'}') => return Ok(hit),
                other => return Err(self.error(format!("expected ',' or '}}', found {other:?}"))),
            }
        }
    }
}

/// Persist jobs as JSON lines.
pub fn write_jobs<W: Write>(jobs: &[PromptJob], out: &mut W) -> Result<()> {
    for job in jobs {
        serde_json::to_writer(&mut *out, job).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jobs<R: BufRead>(input: R) -> Result<Vec<PromptJob>> {
    let mut jobs = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        jobs.push(
            serde_json::from_str(&line).map_err(|source| PromptError::BadJobLine {
                line: lineno + 1,
                source,
            })?,
        );
    }
    Ok(jobs)
}
