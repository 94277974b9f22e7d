//! Karlin–Altschul statistics for match/mismatch scoring under uniform base
//! frequencies.
//!
//! With uniform p = 1/4 per base, 4 of the 16 base pairs score `match` and 12
//! score `mismatch`, so lambda is the unique positive root of
//!
//! ```text
//! 0.25 * exp(lambda * match) + 0.75 * exp(lambda * mismatch) = 1
//! ```
//!
//! which exists iff the expected per-pair score is negative. E-values follow
//! the standard `E = K * m * n * exp(-lambda * S)` with K left configurable
//! (the pipeline only relies on the score-monotone ranking).

use super::{AlignError, Result, ScoringScheme};

/// E-values below this print as exactly 0.0, mirroring how vanishing values
/// appear in exported hit records.
pub const EVALUE_UNDERFLOW: f64 = 1e-180;

/// Parameters of the extreme-value distribution used for e-values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalueParams {
    pub lambda: f64,
    pub k: f64,
    /// Query length in nucleotides.
    pub effective_m: usize,
    /// Total database length in nucleotides.
    pub effective_n: u64,
}

impl EvalueParams {
    pub fn for_search(scheme: &ScoringScheme, query_len: usize, db_len: u64) -> Result<Self> {
        Ok(EvalueParams {
            lambda: solve_lambda(scheme)?,
            k: scheme.k_param,
            effective_m: query_len,
            effective_n: db_len,
        })
    }
}

/// Solve for lambda by bisection. The bracket starts just above zero (zero is
/// always a trivial root; the expected-score invariant makes the restriction
/// decreasing there) and doubles until the function turns positive.
pub fn solve_lambda(scheme: &ScoringScheme) -> Result<f64> {
    let expected = expected_pair_score(scheme);
    if expected >= 0.0 || scheme.match_score <= 0 {
        return Err(AlignError::NoPositiveRoot { expected });
    }
    let f = |lambda: f64| {
        0.25 * (lambda * f64::from(scheme.match_score)).exp()
            + 0.75 * (lambda * f64::from(scheme.mismatch_score)).exp()
            - 1.0
    };

    let mut lo = 1e-9;
    debug_assert!(f(lo) < 0.0);
    let mut hi = 1.0;
    while f(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(AlignError::NoPositiveRoot { expected });
        }
    }
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Expected score of one aligned pair under uniform base frequencies.
pub fn expected_pair_score(scheme: &ScoringScheme) -> f64 {
    (4.0 * f64::from(scheme.match_score) + 12.0 * f64::from(scheme.mismatch_score)) / 16.0
}

/// `E = K * m * n * exp(-lambda * S)`, clamped to 0.0 below
/// [`EVALUE_UNDERFLOW`].
pub fn evalue(score: i32, params: &EvalueParams) -> f64 {
    let e = params.k
        * params.effective_m as f64
        * params.effective_n as f64
        * (-params.lambda * f64::from(score)).exp();
    if e < EVALUE_UNDERFLOW {
        0.0
    } else {
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scheme(match_score: i32, mismatch_score: i32) -> ScoringScheme {
        ScoringScheme {
            match_score,
            mismatch_score,
            ..ScoringScheme::default()
        }
    }

    // Root values pinned with an independent high-precision bisection on the
    // stated transcendental equation.
    const LAMBDA_PLUS2_MINUS3: f64 = 0.6337314430979077;
    const LAMBDA_PLUS1_MINUS2: f64 = 1.3327057628202604;

    #[test]
    fn lambda_default_scheme() {
        let lambda = solve_lambda(&ScoringScheme::default()).unwrap();
        assert!((lambda - LAMBDA_PLUS2_MINUS3).abs() < 1e-10, "{lambda}");
    }

    #[test]
    fn lambda_residual_is_tiny() {
        let s = ScoringScheme::default();
        let lambda = solve_lambda(&s).unwrap();
        let residual = 0.25 * (2.0 * lambda).exp() + 0.75 * (-3.0 * lambda).exp() - 1.0;
        assert!(residual.abs() < 1e-9, "{residual}");
    }

    #[test]
    fn lambda_other_scheme() {
        let lambda = solve_lambda(&scheme(1, -2)).unwrap();
        assert!((lambda - LAMBDA_PLUS1_MINUS2).abs() < 1e-10, "{lambda}");
    }

    #[test]
    fn lambda_plus1_minus1_is_ln3() {
        // 0.25 e^l + 0.75 e^-l = 1 has the closed-form positive root ln 3
        let lambda = solve_lambda(&scheme(1, -1)).unwrap();
        assert!((lambda - 3f64.ln()).abs() < 1e-10, "{lambda}");
    }

    #[test]
    fn doubling_the_scheme_halves_lambda() {
        let base = solve_lambda(&scheme(2, -3)).unwrap();
        let doubled = solve_lambda(&scheme(4, -6)).unwrap();
        assert!((doubled - base / 2.0).abs() < 1e-10);
    }

    #[test]
    fn nonnegative_expectation_has_no_root() {
        // 4*3 + 12*(-1) = 0: expected score is exactly zero
        let err = solve_lambda(&scheme(3, -1)).unwrap_err();
        assert!(matches!(err, AlignError::NoPositiveRoot { .. }));
        assert!(matches!(
            solve_lambda(&scheme(4, -1)),
            Err(AlignError::NoPositiveRoot { .. })
        ));
    }

    #[test]
    fn evalue_at_zero_score_is_kmn() {
        let p = EvalueParams {
            lambda: LAMBDA_PLUS2_MINUS3,
            k: 0.46,
            effective_m: 500,
            effective_n: 1_000_000,
        };
        let e = evalue(0, &p);
        assert!((e - 0.46 * 500.0 * 1_000_000.0).abs() < 1e-3);
    }

    #[test]
    fn evalue_matches_reference_point() {
        // independent oracle: 0.46 * 100 * 1000 * exp(-lambda * 30)
        let p = EvalueParams {
            lambda: LAMBDA_PLUS2_MINUS3,
            k: 0.46,
            effective_m: 100,
            effective_n: 1000,
        };
        let e = evalue(30, &p);
        assert!((e - 2.546688160623691e-4).abs() < 1e-15, "{e}");
    }

    #[test]
    fn evalue_underflow_clamps_to_zero() {
        let p = EvalueParams {
            lambda: LAMBDA_PLUS2_MINUS3,
            k: 0.46,
            effective_m: 500,
            effective_n: 1_000_000,
        };
        // identical 500 bp pair scores 1000; the e-value is ~1e-267
        assert_eq!(evalue(1000, &p), 0.0);
    }

    #[test]
    fn evalue_strictly_decreasing_in_score() {
        let p = EvalueParams {
            lambda: LAMBDA_PLUS2_MINUS3,
            k: 0.46,
            effective_m: 100,
            effective_n: 10_000,
        };
        let mut prev = f64::INFINITY;
        for s in [0, 5, 10, 20, 40, 80] {
            let e = evalue(s, &p);
            assert!(e < prev, "score {s}: {e} !< {prev}");
            prev = e;
        }
    }
}
