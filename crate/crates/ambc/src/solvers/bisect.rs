//! Bisection over a monotone feasibility predicate.
//!
//! Max-min objectives reduce to "is level Q achievable?" queries that are
//! monotone in Q. The query returns a witness (the allocation achieving the
//! level) so the caller gets both the optimal level and a point attaining it.

use crate::error::Error;

/// Largest level `q` in `[lo, hi]` for which `feas(q)` returns a witness,
/// located to within `tol`, together with the witness of the returned level.
///
/// Requires `feas(lo)` to succeed; errors otherwise. Calls `feas` at most
/// `2 + ceil(log2((hi - lo)/tol))` times, halving the bracket each step.
pub fn bisect_maximin<T>(
    mut feas: impl FnMut(f64) -> Option<T>,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<(f64, T), Error> {
    assert!(tol > 0.0, "bisection tolerance must be positive");
    let mut witness = feas(lo).ok_or_else(|| {
        Error::infeasible(format!("level {lo} is infeasible at the lower bracket"))
    })?;
    if hi <= lo {
        return Ok((lo, witness));
    }
    if let Some(w) = feas(hi) {
        return Ok((hi, w));
    }
    let mut lo = lo;
    let mut hi = hi;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match feas(mid) {
            Some(w) => {
                witness = w;
                lo = mid;
            }
            None => hi = mid,
        }
    }
    Ok((lo, witness))
}
