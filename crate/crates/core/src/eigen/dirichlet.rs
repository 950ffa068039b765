//! Closed-form spectrum of the open-chain hopping matrix `Δ_n`
//! (zeros on the diagonal, ones on the first off-diagonals).

use std::f64::consts::PI;

use super::dense::SymMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DirichletSpectrum {
    pub n: usize,
    /// `2 cos(kπ/(n+1))`, `k = 1..=n` (descending in `k`).
    pub eigenvalues: Vec<f64>,
    /// Row `k-1` is `(sin(kjπ/(n+1)))_j` scaled to unit length.
    pub eigenvectors: Vec<Vec<f64>>,
}

pub fn dirichlet_spectrum(n: usize) -> Result<DirichletSpectrum> {
    if n == 0 {
        return Err(Error::invalid("Dirichlet chain needs n >= 1"));
    }
    let h = PI / (n + 1) as f64;
    let norm = (2.0 / (n + 1) as f64).sqrt();
    let eigenvalues = (1..=n).map(|k| 2.0 * (k as f64 * h).cos()).collect();
    let eigenvectors = (1..=n)
        .map(|k| (1..=n).map(|j| norm * ((k * j) as f64 * h).sin()).collect())
        .collect();
    Ok(DirichletSpectrum {
        n,
        eigenvalues,
        eigenvectors,
    })
}

/// Minimum pairwise distance between the closed-form eigenvalues.
///
/// The eigenvalues are monotone in `k`, so the minimum is attained between
/// neighbours in `k`; this is the `O(n)` form of the pairwise minimum.
pub fn dirichlet_min_gap(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid("minimum gap needs n >= 2"));
    }
    let h = PI / (n + 1) as f64;
    let values: Vec<f64> = (1..=n).map(|k| 2.0 * (k as f64 * h).cos()).collect();
    Ok(values
        .windows(2)
        .map(|w| (w[0] - w[1]).abs())
        .fold(f64::INFINITY, f64::min))
}

/// `min_{2<=n<=n_max} n^2 · min_gap(n)`: an empirical value for `1/K_1`.
pub fn calibrate_gap_constant(n_max: usize) -> Result<f64> {
    (2..=n_max)
        .map(|n| dirichlet_min_gap(n).map(|g| (n * n) as f64 * g))
        .try_fold(f64::INFINITY, |acc, x| x.map(|x| acc.min(x)))
}

/// The matrix `Δ_n` itself.
pub fn dirichlet_matrix(n: usize) -> SymMatrix {
    SymMatrix::tridiagonal(&vec![0.0; n], &vec![1.0; n.saturating_sub(1)])
}
