//! Gapped X-drop extension: affine-gap dynamic programming that grows an
//! alignment outward from an anchor pair, pruning cells that fall more than
//! `x_drop_gapped` below the best score seen so far.
//!
//! Gap costs follow the BLAST convention: a gap of length k costs
//! `gap_open + k * gap_extend` (both negative), i.e. opening a gap costs
//! `gap_open + gap_extend` and each further column `gap_extend`.

use super::ungapped::pair_score;
use super::ScoringScheme;

/// One alignment column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    /// Query base aligned to subject base (match or mismatch).
    Pair,
    /// Gap in the query row: a subject base is consumed.
    QueryGap,
    /// Gap in the subject row: a query base is consumed.
    SubjectGap,
}

/// Result of extending in one direction from the anchor.
#[derive(Debug, Clone, Default)]
pub(crate) struct Extension {
    pub score: i32,
    pub q_consumed: usize,
    pub s_consumed: usize,
    /// Columns from the anchor outward.
    pub ops: Vec<Op>,
}

const NEG: i32 = i32::MIN / 4;

// Traceback nibbles. For the aligned layer the source is the layer of the
// diagonal predecessor; for the gap layers it records open-vs-extend.
const SRC_NONE: u8 = 0;
const SRC_M: u8 = 1;
const SRC_D: u8 = 2;
const SRC_E: u8 = 3;

#[inline]
fn alive(v: i32, best: i32, x_drop: i32) -> bool {
    i64::from(v) >= i64::from(best) - i64::from(x_drop)
}

/// Extend into `q`/`s` starting immediately after the anchor; `(0, 0)` is the
/// zero-score corner. Returns the best-scoring path and its end coordinates.
pub(crate) fn extend_one_direction(
    q: &[u8],
    s: &[u8],
    scheme: &ScoringScheme,
    x_drop: i32,
) -> Extension {
    let n = s.len();
    let open_cost = scheme.gap_open + scheme.gap_extend;
    let extend_cost = scheme.gap_extend;

    // layer values for the previous and current row
    let mut m_prev = vec![NEG; n + 1];
    let mut d_prev = vec![NEG; n + 1];
    let mut e_prev = vec![NEG; n + 1];
    let mut m_cur = vec![NEG; n + 1];
    let mut d_cur = vec![NEG; n + 1];
    let mut e_cur = vec![NEG; n + 1];

    // traceback: per row, the window start and one packed byte per cell
    let mut tb_rows: Vec<(usize, Vec<u8>)> = Vec::new();

    let mut best = 0i32;
    let mut best_pos = (0usize, 0usize); // (i, j)
    let mut best_layer = SRC_M;

    // row 0: the anchor corner plus a leading gap chain in the query row
    m_prev[0] = 0;
    let mut prev_lo = 0usize;
    let mut prev_hi = 0usize;
    {
        let mut j = 1;
        while j <= n {
            let open = m_prev[j - 1] + open_cost;
            let ext = e_prev[j - 1] + extend_cost;
            let v = open.max(ext);
            if !alive(v, best, x_drop) {
                break;
            }
            e_prev[j] = v;
            prev_hi = j;
            j += 1;
        }
    }
    tb_rows.push((0, Vec::new())); // row 0 traceback is implicit

    for i in 1..=q.len() {
        // nothing can appear left of prev_lo: every DP move keeps or
        // increases the column
        let start_j = prev_lo;
        let mut first_alive: Option<usize> = None;
        let mut last_alive = 0usize;

        let mut tb: Vec<u8> = Vec::new();
        let tb_lo = start_j;

        let mut j = start_j;
        loop {
            if j > n {
                break;
            }
            let (m_val, m_src, d_val, d_src, e_val, e_src) = if j == 0 {
                // column 0: only a gap in the subject row is possible
                let open = m_prev[0] + open_cost;
                let ext = d_prev[0] + extend_cost;
                let (d_val, d_src) = if open >= ext {
                    (open, SRC_M)
                } else {
                    (ext, SRC_D)
                };
                (NEG, SRC_NONE, d_val, d_src, NEG, SRC_NONE)
            } else {
                let in_prev = |col: usize| col >= prev_lo && col <= prev_hi;
                let sub = pair_score(q[i - 1], s[j - 1], scheme);
                let (m_val, m_src) = if in_prev(j - 1) {
                    let mm = m_prev[j - 1];
                    let dd = d_prev[j - 1];
                    let ee = e_prev[j - 1];
                    let mut v = mm;
                    let mut src = SRC_M;
                    if dd > v {
                        v = dd;
                        src = SRC_D;
                    }
                    if ee > v {
                        v = ee;
                        src = SRC_E;
                    }
                    if v <= NEG {
                        (NEG, SRC_NONE)
                    } else {
                        (v + sub, src)
                    }
                } else {
                    (NEG, SRC_NONE)
                };
                let (d_val, d_src) = if in_prev(j) {
                    let open = m_prev[j] + open_cost;
                    let ext = d_prev[j] + extend_cost;
                    if m_prev[j] <= NEG && d_prev[j] <= NEG {
                        (NEG, SRC_NONE)
                    } else if open >= ext {
                        (open, SRC_M)
                    } else {
                        (ext, SRC_D)
                    }
                } else {
                    (NEG, SRC_NONE)
                };
                let (e_val, e_src) = {
                    let prev_m = if j > tb_lo { m_cur[j - 1] } else { NEG };
                    let prev_e = if j > tb_lo { e_cur[j - 1] } else { NEG };
                    let open = prev_m + open_cost;
                    let ext = prev_e + extend_cost;
                    if prev_m <= NEG && prev_e <= NEG {
                        (NEG, SRC_NONE)
                    } else if open >= ext {
                        (open, SRC_M)
                    } else {
                        (ext, SRC_E)
                    }
                };
                (m_val, m_src, d_val, d_src, e_val, e_src)
            };

            let cell_best = m_val.max(d_val).max(e_val);
            let cell_alive = cell_best > NEG && alive(cell_best, best, x_drop);

            if cell_alive {
                m_cur[j] = m_val;
                d_cur[j] = d_val;
                e_cur[j] = e_val;
                if first_alive.is_none() {
                    first_alive = Some(j);
                }
                last_alive = j;
                if m_val > best {
                    best = m_val;
                    best_pos = (i, j);
                    best_layer = SRC_M;
                }
            } else {
                m_cur[j] = NEG;
                d_cur[j] = NEG;
                e_cur[j] = NEG;
            }
            tb.push(pack_tb(
                if cell_alive { m_src } else { SRC_NONE },
                if cell_alive { d_src } else { SRC_NONE },
                if cell_alive { e_src } else { SRC_NONE },
            ));

            // beyond the previous row's reach, only in-row gap chains can
            // stay alive; once the chain dies there is nothing further right
            if j > prev_hi && !cell_alive {
                break;
            }
            j += 1;
        }

        let Some(first) = first_alive else {
            tb_rows.push((tb_lo, tb));
            break;
        };
        tb_rows.push((tb_lo, tb));

        std::mem::swap(&mut m_prev, &mut m_cur);
        std::mem::swap(&mut d_prev, &mut d_cur);
        std::mem::swap(&mut e_prev, &mut e_cur);
        prev_lo = first;
        prev_hi = last_alive;
        // reset only the window the next row may write
        let reset_to = (last_alive + 2).min(n + 1);
        for v in &mut m_cur[..reset_to] {
            *v = NEG;
        }
        for v in &mut d_cur[..reset_to] {
            *v = NEG;
        }
        for v in &mut e_cur[..reset_to] {
            *v = NEG;
        }
    }

    walk_back(best, best_pos, best_layer, &tb_rows)
}

#[inline]
fn pack_tb(m_src: u8, d_src: u8, e_src: u8) -> u8 {
    m_src | (d_src << 2) | (e_src << 4)
}

fn tb_at(tb_rows: &[(usize, Vec<u8>)], i: usize, j: usize) -> u8 {
    let (lo, row) = &tb_rows[i];
    row.get(j.wrapping_sub(*lo)).copied().unwrap_or(0)
}

fn walk_back(
    score: i32,
    (mut i, mut j): (usize, usize),
    mut layer: u8,
    tb_rows: &[(usize, Vec<u8>)],
) -> Extension {
    let (q_consumed, s_consumed) = (i, j);
    let mut ops = Vec::with_capacity(i + j);
    while i > 0 || j > 0 {
        if i == 0 {
            ops.push(Op::QueryGap);
            j -= 1;
            continue;
        }
        if j == 0 {
            ops.push(Op::SubjectGap);
            i -= 1;
            continue;
        }
        let byte = tb_at(tb_rows, i, j);
        match layer {
            SRC_M => {
                ops.push(Op::Pair);
                layer = byte & 0b11;
                debug_assert_ne!(layer, SRC_NONE, "traceback broke at M({i},{j})");
                i -= 1;
                j -= 1;
            }
            SRC_D => {
                ops.push(Op::SubjectGap);
                layer = if (byte >> 2) & 0b11 == SRC_D {
                    SRC_D
                } else {
                    SRC_M
                };
                i -= 1;
            }
            SRC_E => {
                ops.push(Op::QueryGap);
                layer = if (byte >> 4) & 0b11 == SRC_E {
                    SRC_E
                } else {
                    SRC_M
                };
                j -= 1;
            }
            _ => unreachable!("invalid traceback layer"),
        }
    }
    ops.reverse();
    Extension {
        score,
        q_consumed,
        s_consumed,
        ops,
    }
}

/// A full anchored alignment: left extension + anchor column + right
/// extension.
#[derive(Debug, Clone)]
pub(crate) struct AnchoredAlignment {
    pub score: i32,
    pub q_start: usize,
    pub s_start: usize,
    pub ops: Vec<Op>,
}

/// Run gapped X-drop extension in both directions from the anchor pair
/// `(q_mid, s_mid)`, which is always kept as an aligned column.
pub(crate) fn extend_anchored(
    q: &[u8],
    s: &[u8],
    q_mid: usize,
    s_mid: usize,
    scheme: &ScoringScheme,
    x_drop: i32,
) -> AnchoredAlignment {
    let right = extend_one_direction(&q[q_mid + 1..], &s[s_mid + 1..], scheme, x_drop);

    let q_left: Vec<u8> = q[..q_mid].iter().rev().copied().collect();
    let s_left: Vec<u8> = s[..s_mid].iter().rev().copied().collect();
    let left = extend_one_direction(&q_left, &s_left, scheme, x_drop);

    let mut ops = Vec::with_capacity(left.ops.len() + 1 + right.ops.len());
    ops.extend(left.ops.iter().rev());
    ops.push(Op::Pair);
    ops.extend(right.ops.iter());

    AnchoredAlignment {
        score: left.score + pair_score(q[q_mid], s[s_mid], scheme) + right.score,
        q_start: q_mid - left.q_consumed,
        s_start: s_mid - left.s_consumed,
        ops,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scheme() -> ScoringScheme {
        ScoringScheme::default()
    }

    const BIG_X: i32 = i32::MAX / 4;

    #[test]
    fn empty_extension_scores_zero() {
        let ext = extend_one_direction(b"", b"", &scheme(), 30);
        assert_eq!(ext.score, 0);
        assert!(ext.ops.is_empty());
    }

    #[test]
    fn identical_suffixes_extend_fully() {
        let ext = extend_one_direction(b"ACGTACGT", b"ACGTACGT", &scheme(), 30);
        assert_eq!(ext.score, 16);
        assert_eq!(ext.q_consumed, 8);
        assert_eq!(ext.s_consumed, 8);
        assert!(ext.ops.iter().all(|op| *op == Op::Pair));
    }

    #[test]
    fn trailing_mismatches_are_trimmed() {
        let ext = extend_one_direction(b"ACGTAAAA", b"ACGTCCCC", &scheme(), 30);
        assert_eq!(ext.score, 8);
        assert_eq!(ext.q_consumed, 4);
    }

    #[test]
    fn gap_is_opened_when_it_pays() {
        // query has 2 extra bases; crossing them costs 5 + 2*2 = 9 and buys
        // 10 more matches (+20)
        let q = b"ACGTACGTGGTTTTTTTTTT";
        let s = b"ACGTACGTTTTTTTTTTT";
        let ext = extend_one_direction(q, s, &scheme(), 30);
        assert_eq!(ext.score, 8 * 2 - 9 + 10 * 2);
        assert_eq!(ext.q_consumed, 20);
        assert_eq!(ext.s_consumed, 18);
        let gap_cols = ext.ops.iter().filter(|op| **op == Op::SubjectGap).count();
        assert_eq!(gap_cols, 2);
    }

    #[test]
    fn xdrop_prunes_far_from_diagonal() {
        // with a tiny x-drop the 9-cost gap is never bridged
        let q = b"ACGTACGTGGTTTTTTTTTT";
        let s = b"ACGTACGTTTTTTTTTTT";
        let ext = extend_one_direction(q, s, &scheme(), 5);
        assert_eq!(ext.score, 16);
        assert_eq!(ext.q_consumed, 8);
    }

    #[test]
    fn anchored_alignment_spans_both_sides() {
        let q = b"TTTTACGTACGTAAAA";
        let s = b"TTTTACGTACGTAAAA";
        let aln = extend_anchored(q, s, 8, 8, &scheme(), BIG_X);
        assert_eq!(aln.score, 32);
        assert_eq!(aln.q_start, 0);
        assert_eq!(aln.s_start, 0);
        assert_eq!(aln.ops.len(), 16);
    }

    #[test]
    fn anchored_alignment_drops_noisy_flanks() {
        // identical core, unrelated flanks: the alignment must stay local
        let q = b"GGGGGGGGACGTACGTACGTCCCCCCCC";
        let s = b"AAAAAAAAACGTACGTACGTTTTTTTTT";
        let aln = extend_anchored(q, s, 14, 14, &scheme(), 30);
        assert_eq!(aln.q_start, 8);
        assert_eq!(aln.s_start, 8);
        assert_eq!(aln.ops.len(), 12);
        assert_eq!(aln.score, 24);
    }
}
