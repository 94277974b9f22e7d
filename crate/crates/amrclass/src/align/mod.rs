//! Mini word-indexed seed-and-extend local nucleotide aligner.
//!
//! A search runs in four stages: exact w-mer seeds shared between query and
//! subject are merged into maximal runs per diagonal, each run is extended
//! without gaps under an X-drop rule, surviving segments are re-extended with
//! gapped X-drop dynamic programming anchored at the segment midpoint, and
//! the best alignment per subject is kept. Hits are ranked by e-value
//! (equivalently by score) and the top k returned.
//!
//! Deliberate simplifications versus production BLAST, fine at this scale:
//! one-hit seeding rather than the two-hit heuristic, ungapped lambda/K
//! applied to gapped scores (ranking is score-monotone either way), and one
//! alignment per subject with no multi-segment chaining.

mod gapped;
mod index;
mod stats;
mod ungapped;

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::seqio::SeqRecord;

pub use gapped::Op;
pub use index::{IndexedRef, WordIndex, INDEX_MAGIC, MAX_WORD_SIZE, MIN_WORD_SIZE};
pub use stats::{evalue, expected_pair_score, solve_lambda, EvalueParams, EVALUE_UNDERFLOW};

use gapped::extend_anchored;
use ungapped::{ungapped_extend, Hsp, SeedRun};

pub type Result<T> = std::result::Result<T, AlignError>;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("reference set is empty")]
    EmptyReferenceSet,
    #[error("word size {word_size} outside {MIN_WORD_SIZE}..={MAX_WORD_SIZE}")]
    BadWordSize { word_size: usize },
    #[error("no positive lambda root: expected per-pair score {expected} is not negative")]
    NoPositiveRoot { expected: f64 },
    #[error("invalid scoring scheme: {0}")]
    InvalidScheme(String),
    #[error("top_k must be at least 1")]
    BadTopK,
    #[error("invalid index file: {0}")]
    InvalidIndex(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Match/mismatch/gap scores plus the extension and statistics knobs.
///
/// Gap costs use the BLAST convention: a gap of length k costs
/// `gap_open + k * gap_extend`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ScoringScheme {
    pub match_score: i32,
    pub mismatch_score: i32,
    pub gap_open: i32,
    pub gap_extend: i32,
    pub x_drop_ungapped: i32,
    pub x_drop_gapped: i32,
    /// Ungapped segments scoring below this never reach gapped extension.
    pub min_hsp_score: i32,
    /// Karlin–Altschul K; only the e-value scale, never the ranking.
    pub k_param: f64,
}

impl Default for ScoringScheme {
    fn default() -> Self {
        ScoringScheme {
            match_score: 2,
            mismatch_score: -3,
            gap_open: -5,
            gap_extend: -2,
            x_drop_ungapped: 20,
            x_drop_gapped: 30,
            min_hsp_score: 16,
            k_param: 0.46,
        }
    }
}

impl ScoringScheme {
    pub fn validate(&self) -> Result<()> {
        if self.match_score <= 0 {
            return Err(AlignError::InvalidScheme(
                "match score must be positive".into(),
            ));
        }
        if self.mismatch_score >= 0 {
            return Err(AlignError::InvalidScheme(
                "mismatch score must be negative".into(),
            ));
        }
        if self.gap_open >= 0 || self.gap_extend >= 0 {
            return Err(AlignError::InvalidScheme(
                "gap penalties must be negative".into(),
            ));
        }
        if self.x_drop_ungapped <= 0 || self.x_drop_gapped <= 0 {
            return Err(AlignError::InvalidScheme(
                "x-drop thresholds must be positive".into(),
            ));
        }
        if self.k_param <= 0.0 {
            return Err(AlignError::InvalidScheme("k must be positive".into()));
        }
        if expected_pair_score(self) >= 0.0 {
            return Err(AlignError::NoPositiveRoot {
                expected: expected_pair_score(self),
            });
        }
        Ok(())
    }
}

/// One scored local alignment against a subject sequence.
///
/// The three row strings always have equal length; the match row carries `|`
/// exactly where the query and subject characters are equal non-gap bases.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentHit {
    pub subject_id: String,
    pub sequence_title: String,
    pub alignment_length: usize,
    pub e_value: f64,
    pub raw_score: i32,
    pub query_sequence: String,
    pub match_sequence: String,
    pub subject_sequence: String,
    /// 0-based offset of the first aligned base on the query.
    pub query_start: usize,
    /// 0-based offset of the first aligned base on the subject.
    pub subject_start: usize,
}

/// The exported record shape: exactly the six keys, in this order.
#[derive(Debug, Serialize)]
pub struct HitRecord<'a> {
    pub sequence_title: &'a str,
    pub alignment_length: usize,
    pub e_value: f64,
    pub query_sequence: &'a str,
    pub match_sequence: &'a str,
    pub subject_sequence: &'a str,
}

impl AlignmentHit {
    pub fn to_record(&self) -> HitRecord<'_> {
        HitRecord {
            sequence_title: &self.sequence_title,
            alignment_length: self.alignment_length,
            e_value: self.e_value,
            query_sequence: &self.query_sequence,
            match_sequence: &self.match_sequence,
            subject_sequence: &self.subject_sequence,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("hit record serializes")
    }
}

/// Search the index for local alignments of `query`, returning at most
/// `top_k` hits sorted by ascending e-value (ties: descending score, then
/// subject id). An empty result is a valid outcome.
pub fn search(
    index: &WordIndex,
    query: &SeqRecord,
    scheme: &ScoringScheme,
    top_k: usize,
) -> Result<Vec<AlignmentHit>> {
    scheme.validate()?;
    if top_k == 0 {
        return Err(AlignError::BadTopK);
    }
    let params = EvalueParams::for_search(scheme, query.sequence.len(), index.total_db_length())?;

    let q = query.sequence.as_bytes();
    let w = index.word_size();
    if q.len() < w {
        return Ok(Vec::new());
    }

    // seed stage: shared w-mers grouped by (subject, diagonal)
    let mut seeds: BTreeMap<(u32, i64), Vec<u32>> = BTreeMap::new();
    for q_off in 0..=(q.len() - w) {
        let Some(packed) = index::pack_word(&q[q_off..q_off + w]) else {
            continue;
        };
        for &(ref_idx, s_off) in index.occurrences_packed(packed) {
            let diag = q_off as i64 - i64::from(s_off);
            seeds.entry((ref_idx, diag)).or_default().push(q_off as u32);
        }
    }

    // merge overlapping/adjacent seeds into maximal exact runs, extend each
    // run without gaps, keep segments above the score cutoff
    let mut hsps: Vec<(u32, i64, Hsp)> = Vec::new();
    for ((ref_idx, diag), q_offs) in &seeds {
        let subject = &index.references()[*ref_idx as usize].seq;
        let mut run_start = q_offs[0] as usize;
        let mut run_end = run_start + w;
        let flush = |start: usize, end: usize, hsps: &mut Vec<(u32, i64, Hsp)>| {
            let run = SeedRun {
                q_start: start,
                s_start: (start as i64 - diag) as usize,
                len: end - start,
            };
            let hsp = ungapped_extend(q, subject, run, scheme);
            if hsp.score >= scheme.min_hsp_score {
                hsps.push((*ref_idx, *diag, hsp));
            }
        };
        for &q_off in &q_offs[1..] {
            let q_off = q_off as usize;
            if q_off <= run_end {
                run_end = q_off + w;
            } else {
                flush(run_start, run_end, &mut hsps);
                run_start = q_off;
                run_end = q_off + w;
            }
        }
        flush(run_start, run_end, &mut hsps);
    }

    // gapped re-extension anchored at each surviving segment's midpoint;
    // one best alignment kept per subject
    let mut seen_anchor: HashSet<(u32, usize, usize)> = HashSet::new();
    let mut best_per_subject: HashMap<u32, gapped::AnchoredAlignment> = HashMap::new();
    for (ref_idx, diag, hsp) in hsps {
        let q_mid = hsp.q_mid();
        let s_mid = (q_mid as i64 - diag) as usize;
        if !seen_anchor.insert((ref_idx, q_mid, s_mid)) {
            continue;
        }
        let subject = &index.references()[ref_idx as usize].seq;
        let aln = extend_anchored(q, subject, q_mid, s_mid, scheme, scheme.x_drop_gapped);
        match best_per_subject.get(&ref_idx) {
            Some(cur)
                if (
                    cur.score,
                    std::cmp::Reverse(cur.q_start),
                    std::cmp::Reverse(cur.s_start),
                ) >= (
                    aln.score,
                    std::cmp::Reverse(aln.q_start),
                    std::cmp::Reverse(aln.s_start),
                ) => {}
            _ => {
                best_per_subject.insert(ref_idx, aln);
            }
        }
    }

    let mut hits: Vec<AlignmentHit> = best_per_subject
        .into_iter()
        .map(|(ref_idx, aln)| {
            let subject = &index.references()[ref_idx as usize];
            let (query_row, match_row, subject_row) =
                render_rows(q, &subject.seq, aln.q_start, aln.s_start, &aln.ops);
            AlignmentHit {
                subject_id: subject.id.clone(),
                sequence_title: subject.title.clone(),
                alignment_length: aln.ops.len(),
                e_value: evalue(aln.score, &params),
                raw_score: aln.score,
                query_sequence: query_row,
                match_sequence: match_row,
                subject_sequence: subject_row,
                query_start: aln.q_start,
                subject_start: aln.s_start,
            }
        })
        .collect();

    hits.sort_by(|a, b| {
        a.e_value
            .partial_cmp(&b.e_value)
            .expect("e-values are never NaN")
            .then(b.raw_score.cmp(&a.raw_score))
            .then(a.subject_id.cmp(&b.subject_id))
    });
    hits.truncate(top_k);
    Ok(hits)
}

/// Render the three alignment rows from an op path. Gaps print as `-`; the
/// match row carries `|` wherever the two characters are equal (and `N`
/// renders as `|` against `N`, even though scoring treats it as a mismatch).
fn render_rows(
    q: &[u8],
    s: &[u8],
    q_start: usize,
    s_start: usize,
    ops: &[Op],
) -> (String, String, String) {
    let mut query_row = String::with_capacity(ops.len());
    let mut match_row = String::with_capacity(ops.len());
    let mut subject_row = String::with_capacity(ops.len());
    let (mut qi, mut si) = (q_start, s_start);
    for op in ops {
        match op {
            Op::Pair => {
                let (qc, sc) = (q[qi] as char, s[si] as char);
                query_row.push(qc);
                subject_row.push(sc);
                match_row.push(if qc == sc { '|' } else { ' ' });
                qi += 1;
                si += 1;
            }
            Op::QueryGap => {
                query_row.push('-');
                match_row.push(' ');
                subject_row.push(s[si] as char);
                si += 1;
            }
            Op::SubjectGap => {
                query_row.push(q[qi] as char);
                match_row.push(' ');
                subject_row.push('-');
                qi += 1;
            }
        }
    }
    (query_row, match_row, subject_row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqio::{parse_fasta, preprocess, SourceDb};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::path::Path;

    fn rec(id: &str, seq: &str) -> SeqRecord {
        SeqRecord {
            id: id.into(),
            header: format!("{id} synthetic"),
            sequence: seq.into(),
            source_db: SourceDb::Megares,
            raw_labels: vec![],
        }
    }

    fn random_seq(rng: &mut StdRng, n: usize) -> String {
        (0..n)
            .map(|_| b"ACGT"[rng.gen_range(0..4)] as char)
            .collect()
    }

    #[test]
    fn identical_query_gets_full_length_hit() {
        let mut rng = StdRng::seed_from_u64(11);
        let subject = random_seq(&mut rng, 500);
        let mut refs = vec![rec("target", &subject)];
        // pad the database towards 1 Mbp so the e-value context is realistic
        for i in 0..40 {
            refs.push(rec(&format!("pad{i}"), &random_seq(&mut rng, 25_000)));
        }
        let index = WordIndex::build(&refs, 11).unwrap();
        assert!(index.total_db_length() > 1_000_000);

        let hits = search(&index, &rec("q", &subject), &ScoringScheme::default(), 5).unwrap();
        assert!(!hits.is_empty());
        let top = &hits[0];
        assert_eq!(top.subject_id, "target");
        assert_eq!(top.alignment_length, 500);
        assert_eq!(top.raw_score, 1000);
        assert!(top.match_sequence.chars().all(|c| c == '|'));
        assert!(top.e_value < 1e-50);
        assert_eq!(top.e_value, 0.0);
    }

    #[test]
    fn disjoint_sequences_yield_no_hits() {
        // poly-A query against a poly-C database shares no 11-mer
        let index = WordIndex::build(&[rec("r", &"C".repeat(200))], 11).unwrap();
        let hits = search(
            &index,
            &rec("q", &"A".repeat(200)),
            &ScoringScheme::default(),
            5,
        )
        .unwrap();
        assert!(hits.is_empty());
    }

    #[test]
    fn short_query_yields_no_hits() {
        let index = WordIndex::build(&[rec("r", &"A".repeat(50))], 11).unwrap();
        let hits = search(&index, &rec("q", "AAAA"), &ScoringScheme::default(), 5).unwrap();
        assert!(hits.is_empty());
    }

    #[test]
    fn rejects_zero_top_k() {
        let index = WordIndex::build(&[rec("r", &"A".repeat(50))], 11).unwrap();
        assert!(matches!(
            search(
                &index,
                &rec("q", &"A".repeat(50)),
                &ScoringScheme::default(),
                0
            ),
            Err(AlignError::BadTopK)
        ));
    }

    #[test]
    fn gap_renders_dash_in_subject_row() {
        let mut rng = StdRng::seed_from_u64(7);
        let left = random_seq(&mut rng, 40);
        let right = random_seq(&mut rng, 40);
        let subject = format!("{left}{right}");
        let query = format!("{left}GG{right}"); // two extra bases in the query
        let index = WordIndex::build(&[rec("r", &subject)], 11).unwrap();
        let hits = search(&index, &rec("q", &query), &ScoringScheme::default(), 5).unwrap();
        assert_eq!(hits.len(), 1);
        let hit = &hits[0];
        assert_eq!(hit.raw_score, 80 * 2 - 9);
        assert!(hit.subject_sequence.contains("--"));
        assert_eq!(hit.query_sequence.len(), hit.alignment_length);
        assert_eq!(hit.match_sequence.len(), hit.alignment_length);
        assert_eq!(hit.subject_sequence.len(), hit.alignment_length);
        // stripping gaps recovers contiguous substrings
        let q_flat: String = hit.query_sequence.chars().filter(|c| *c != '-').collect();
        assert!(query.contains(&q_flat));
        let s_flat: String = hit.subject_sequence.chars().filter(|c| *c != '-').collect();
        assert!(subject.contains(&s_flat));
    }

    #[test]
    fn search_is_deterministic() {
        let mut rng = StdRng::seed_from_u64(3);
        let refs: Vec<SeqRecord> = (0..20)
            .map(|i| rec(&format!("r{i:02}"), &random_seq(&mut rng, 400)))
            .collect();
        let base = refs[4].sequence.clone();
        let index = WordIndex::build(&refs, 11).unwrap();
        let query = rec("q", &base[50..350]);
        let a = search(&index, &query, &ScoringScheme::default(), 5).unwrap();
        let b = search(&index, &query, &ScoringScheme::default(), 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].subject_id, "r04");
    }

    #[test]
    fn hit_json_uses_exact_key_order() {
        let hit = AlignmentHit {
            subject_id: "s".into(),
            sequence_title: "s title".into(),
            alignment_length: 4,
            e_value: 0.0,
            raw_score: 8,
            query_sequence: "ACGT".into(),
            match_sequence: "||||".into(),
            subject_sequence: "ACGT".into(),
            query_start: 0,
            subject_start: 0,
        };
        assert_eq!(
            hit.to_json_line(),
            r#"{"sequence_title":"s title","alignment_length":4,"e_value":0.0,"query_sequence":"ACGT","match_sequence":"||||","subject_sequence":"ACGT"}"#
        );
    }

    #[test]
    fn fixture_vanxy_self_hit_fills_every_record_field() {
        let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
        let refs = parse_fasta(
            std::fs::read_to_string(fixtures.join("refs.fasta"))
                .unwrap()
                .as_bytes(),
            SourceDb::Megares,
        )
        .unwrap();
        let refs = preprocess(refs).records;
        let vanxy = refs
            .iter()
            .find(|r| r.header.contains("vanXY-C"))
            .expect("vanXY-C fixture present")
            .clone();
        assert_eq!(vanxy.sequence.len(), 673);

        let index = WordIndex::build(&refs, 11).unwrap();
        let hits = search(
            &index,
            &rec("q", &vanxy.sequence),
            &ScoringScheme::default(),
            5,
        )
        .unwrap();
        let top = &hits[0];
        assert_eq!(
            top.sequence_title,
            "gi|1035502645|ref|NG_048504.1| Enterococcus casseliflavus vanXY-C gene for \
             D-Ala-D-Ala dipeptidase/D-Ala-D-Ala carboxypeptidase VanXY-C, complete CDS"
        );
        assert_eq!(top.alignment_length, 673);
        assert_eq!(top.e_value, 0.0);
        assert_eq!(top.query_sequence.len(), 673);
        assert_eq!(top.match_sequence.len(), 673);
        assert_eq!(top.subject_sequence.len(), 673);
        assert!(top.match_sequence.chars().all(|c| c == '|'));
    }

    #[test]
    fn ranking_follows_descending_score() {
        let mut rng = StdRng::seed_from_u64(42);
        // five subjects sharing a core region with increasing divergence
        let core = random_seq(&mut rng, 200);
        let mut refs = Vec::new();
        for i in 0..5 {
            let mut seq: Vec<u8> = core.clone().into_bytes();
            for _ in 0..(i * 6) {
                let pos = rng.gen_range(15..seq.len() - 15);
                let cur = seq[pos];
                let mut next = b"ACGT"[rng.gen_range(0..4)];
                while next == cur {
                    next = b"ACGT"[rng.gen_range(0..4)];
                }
                seq[pos] = next;
            }
            refs.push(rec(&format!("s{i}"), &String::from_utf8(seq).unwrap()));
        }
        let index = WordIndex::build(&refs, 11).unwrap();
        let hits = search(&index, &rec("q", &core), &ScoringScheme::default(), 5).unwrap();
        assert_eq!(hits.len(), 5);
        for pair in hits.windows(2) {
            assert!(pair[0].raw_score >= pair[1].raw_score);
            assert!(pair[0].e_value <= pair[1].e_value);
        }
        assert_eq!(hits[0].subject_id, "s0");
    }
}
