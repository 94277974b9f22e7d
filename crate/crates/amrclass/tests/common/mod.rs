//! Shared test oracles, independent of the library's implementation paths:
//! a full Smith–Waterman affine-gap scorer, seeded random pair generators,
//! and a brute-force classification-metric calculator.

use amrclass::align::ScoringScheme;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const BASES: [u8; 4] = *b"ACGT";

pub fn random_seq(rng: &mut ChaCha8Rng, len: usize) -> Vec<u8> {
    (0..len).map(|_| BASES[rng.gen_range(0..4)]).collect()
}

/// Full affine-gap local alignment score (Gotoh), O(m·n) time, O(n) memory.
/// Gap of length k costs `gap_open + k * gap_extend`, matching the scheme
/// convention; `N` never matches.
pub fn smith_waterman(q: &[u8], s: &[u8], scheme: &ScoringScheme) -> i32 {
    let n = s.len();
    let open = scheme.gap_open + scheme.gap_extend;
    let extend = scheme.gap_extend;
    let neg = i32::MIN / 4;

    let mut h_prev = vec![0i32; n + 1];
    let mut h_cur = vec![0i32; n + 1];
    let mut f = vec![neg; n + 1]; // gap in subject column state
    let mut best = 0i32;

    for i in 1..=q.len() {
        let mut e = neg; // gap in query, within-row state
        h_cur[0] = 0;
        for j in 1..=n {
            e = (e + extend).max(h_cur[j - 1] + open);
            f[j] = (f[j] + extend).max(h_prev[j] + open);
            let sub = if q[i - 1] == s[j - 1] && q[i - 1] != b'N' {
                scheme.match_score
            } else {
                scheme.mismatch_score
            };
            let h = (h_prev[j - 1] + sub).max(e).max(f[j]).max(0);
            h_cur[j] = h;
            if h > best {
                best = h;
            }
        }
        std::mem::swap(&mut h_prev, &mut h_cur);
    }
    best
}

fn shares_word(q: &[u8], s: &[u8], w: usize) -> bool {
    use std::collections::HashSet;
    if q.len() < w || s.len() < w {
        return false;
    }
    let words: HashSet<&[u8]> = s.windows(w).collect();
    q.windows(w).any(|word| words.contains(word))
}

/// One random related pair, 50–300 bp, guaranteed to share at least one
/// exact 11-mer. Four out of five pairs are mutated copies (substitutions
/// plus small indels); the rest are unrelated sequences with a shared
/// planted block.
pub fn related_pair(rng: &mut ChaCha8Rng) -> (Vec<u8>, Vec<u8>) {
    loop {
        let subject_len = rng.gen_range(50..=300);
        let subject = random_seq(rng, subject_len);
        let query = if rng.gen_range(0..5) < 4 {
            mutated_copy(rng, &subject)
        } else {
            planted_share(rng, &subject)
        };
        if query.len() >= 50 && query.len() <= 300 && shares_word(&query, &subject, 11) {
            return (query, subject);
        }
    }
}

fn mutated_copy(rng: &mut ChaCha8Rng, subject: &[u8]) -> Vec<u8> {
    let mut seq = subject.to_vec();
    let sub_rate: f64 = rng.gen_range(0.0..0.12);
    for base in seq.iter_mut() {
        if rng.gen_bool(sub_rate) {
            let mut next = BASES[rng.gen_range(0..4)];
            while next == *base {
                next = BASES[rng.gen_range(0..4)];
            }
            *base = next;
        }
    }
    for _ in 0..rng.gen_range(0..=3) {
        if seq.len() < 30 {
            break;
        }
        let pos = rng.gen_range(10..seq.len() - 10);
        let len = rng.gen_range(1..=3).min(seq.len() - pos - 5);
        if rng.gen_bool(0.5) {
            seq.drain(pos..pos + len);
        } else {
            let insert = random_seq(rng, len);
            seq.splice(pos..pos, insert);
        }
    }
    seq
}

fn planted_share(rng: &mut ChaCha8Rng, subject: &[u8]) -> Vec<u8> {
    let block_len = rng.gen_range(11..=30).min(subject.len());
    let s_at = rng.gen_range(0..=subject.len() - block_len);
    let block = &subject[s_at..s_at + block_len];
    let query_len = rng.gen_range(50..=300);
    let mut query = random_seq(rng, query_len);
    let q_at = rng.gen_range(0..=query.len() - block_len);
    query[q_at..q_at + block_len].copy_from_slice(block);
    query
}

/// Brute-force multiclass metrics for single-label ground truth with
/// predictions that may be None (unclassified). Returns
/// (accuracy, unclassified_rate, weighted p/r/f1, macro p/r/f1).
#[allow(clippy::type_complexity)]
pub fn brute_force_metrics(
    truth: &[usize],
    preds: &[Option<usize>],
    n_classes: usize,
) -> (f64, f64, [f64; 3], [f64; 3]) {
    assert_eq!(truth.len(), preds.len());
    let n = truth.len() as f64;
    let correct = truth
        .iter()
        .zip(preds)
        .filter(|(t, p)| **p == Some(**t))
        .count();
    let unclassified = preds.iter().filter(|p| p.is_none()).count();

    let mut weighted = [0.0f64; 3];
    let mut macro_sums = [0.0f64; 3];
    for c in 0..n_classes {
        let tp = truth
            .iter()
            .zip(preds)
            .filter(|(t, p)| **t == c && **p == Some(c))
            .count() as f64;
        let predicted = preds.iter().filter(|p| **p == Some(c)).count() as f64;
        let support = truth.iter().filter(|t| **t == c).count() as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if support > 0.0 { tp / support } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        weighted[0] += precision * support;
        weighted[1] += recall * support;
        weighted[2] += f1 * support;
        macro_sums[0] += precision;
        macro_sums[1] += recall;
        macro_sums[2] += f1;
    }
    for value in weighted.iter_mut() {
        *value /= n;
    }
    for value in macro_sums.iter_mut() {
        *value /= n_classes as f64;
    }
    (
        correct as f64 / n,
        unclassified as f64 / n,
        weighted,
        macro_sums,
    )
}

/// Deterministic shuffle helper for order-invariance checks.
pub fn shuffled<T: Clone>(items: &[T], rng: &mut ChaCha8Rng) -> Vec<T> {
    let mut copy = items.to_vec();
    copy.shuffle(rng);
    copy
}
