//! Ungapped X-drop extension of exact seed runs into high-scoring segment
//! pairs (HSPs).

use super::ScoringScheme;

/// A maximal run of exact word matches on one diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct SeedRun {
    pub q_start: usize,
    pub s_start: usize,
    pub len: usize,
}

/// An ungapped locally-extended segment pair on one diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Hsp {
    pub q_start: usize,
    /// Exclusive end on the query.
    pub q_end: usize,
    pub s_start: usize,
    pub score: i32,
}

impl Hsp {
    /// Query coordinate of the segment midpoint, the anchor for gapped
    /// re-extension.
    pub fn q_mid(&self) -> usize {
        (self.q_start + self.q_end - 1) / 2
    }
}

/// Score one aligned base pair. `N` never counts as a match, even against
/// another `N`.
#[inline]
pub(crate) fn pair_score(a: u8, b: u8, scheme: &ScoringScheme) -> i32 {
    if a == b && a != b'N' {
        scheme.match_score
    } else {
        scheme.mismatch_score
    }
}

/// Extend a seed run in both directions without gaps, stopping a direction
/// once the running score falls `x_drop_ungapped` below its best.
pub(crate) fn ungapped_extend(
    query: &[u8],
    subject: &[u8],
    run: SeedRun,
    scheme: &ScoringScheme,
) -> Hsp {
    let run_score = scheme.match_score * run.len as i32;

    // right
    let mut best_right = 0i32;
    let mut right_len = 0usize;
    let mut running = 0i32;
    let mut k = 0usize;
    while run.q_start + run.len + k < query.len() && run.s_start + run.len + k < subject.len() {
        running += pair_score(
            query[run.q_start + run.len + k],
            subject[run.s_start + run.len + k],
            scheme,
        );
        k += 1;
        if running > best_right {
            best_right = running;
            right_len = k;
        } else if running <= best_right - scheme.x_drop_ungapped {
            break;
        }
    }

    // left
    let mut best_left = 0i32;
    let mut left_len = 0usize;
    running = 0;
    k = 0;
    while k < run.q_start && k < run.s_start {
        running += pair_score(
            query[run.q_start - 1 - k],
            subject[run.s_start - 1 - k],
            scheme,
        );
        k += 1;
        if running > best_left {
            best_left = running;
            left_len = k;
        } else if running <= best_left - scheme.x_drop_ungapped {
            break;
        }
    }

    Hsp {
        q_start: run.q_start - left_len,
        q_end: run.q_start + run.len + right_len,
        s_start: run.s_start - left_len,
        score: run_score + best_left + best_right,
    }
}
