//! Sturm sequence eigenvalue counting for open (non-periodic) symmetric
//! tridiagonal matrices.

/// Number of eigenvalues strictly below `x`.
///
/// `off[i]` couples `i` and `i + 1`. Counts the negative pivots of the
/// LDL^T factorization of `T - x`; a vanishing pivot is replaced by the
/// positive value `tiny * |off|` (or `tiny` when the coupling is zero), so an
/// eigenvalue sitting exactly at `x` is not counted.
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let n = diag.len();
    if n == 0 {
        return 0;
    }
    assert_eq!(off.len(), n - 1, "off-diagonal must have length n - 1");
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = diag[0] - x;
    for i in 0..n {
        if i > 0 {
            let b = off[i - 1];
            q = (diag[i] - x) - b * b / q;
        }
        if q == 0.0 {
            let guard = off.get(i).map_or(0.0, |b| b.abs());
            q = if guard > 0.0 { tiny * guard } else { tiny };
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Number of eigenvalues in `[lo, hi)`.
pub fn sturm_interval_count(diag: &[f64], off: &[f64], lo: f64, hi: f64) -> usize {
    if hi <= lo {
        return 0;
    }
    sturm_count(diag, off, hi) - sturm_count(diag, off, lo)
}
