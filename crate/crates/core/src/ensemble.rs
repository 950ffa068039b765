//! Parallel execution of independent realizations.
//!
//! Work items are realization indices. Results are collected into a vector
//! indexed by realization, so any reduction done afterwards sees them in
//! ascending index order no matter how many threads ran or how work was
//! stolen.

use rayon::prelude::*;

use crate::eigen::{self, SpectralSample, SpectrumMeta};
use crate::error::{Error, Result};
use crate::model::{sample_potential, DisorderSpec, Hamiltonian, LatticeCube};

/// Worker configuration. `workers == 0` means rayon's default pool size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Parallelism {
    pub workers: usize,
}

impl Default for Parallelism {
    fn default() -> Self {
        Self { workers: 1 }
    }
}

impl Parallelism {
    pub fn new(workers: usize) -> Self {
        Self { workers }
    }

    /// Runs `f(r)` for `r` in `range` and returns results in index order.
    /// The first failure (lowest index) wins.
    pub fn map<T, F>(&self, range: std::ops::Range<u64>, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync + Send,
    {
        if self.workers == 1 {
            return range.map(f).collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::invalid(format!("cannot build worker pool: {e}")))?;
        let results: Vec<Result<T>> = pool.install(|| range.into_par_iter().map(&f).collect());
        results.into_iter().collect()
    }
}

/// Samples realization `r` and returns its spectrum (eigenvalues only unless
/// `with_vectors`).
pub fn realization_spectrum(
    cube: &LatticeCube,
    spec: &DisorderSpec,
    realization_index: u64,
    with_vectors: bool,
) -> Result<SpectralSample> {
    let pot = sample_potential(cube, spec, realization_index)?;
    let h = Hamiltonian::assemble(cube, &pot)?;
    let meta = SpectrumMeta::of(&pot);
    let sample = if with_vectors {
        eigen::eig_all(&h, meta)
    } else {
        eigen::eigenvalues(&h, meta)
    };
    sample.map_err(|e| e.in_realization(spec.base_seed, realization_index))
}

/// Eigenvalues of realizations `0..count`, each reduced by `reduce` before
/// being collected, so large spectra need not be kept in memory.
pub fn map_spectra<T, F>(
    cube: &LatticeCube,
    spec: &DisorderSpec,
    count: u64,
    par: Parallelism,
    reduce: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&SpectralSample) -> T + Sync + Send,
{
    par.map(0..count, |r| {
        realization_spectrum(cube, spec, r, false).map(|s| reduce(&s))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worker_count_does_not_change_results() {
        let cube = LatticeCube::new(1, 15).unwrap();
        let spec = DisorderSpec::default_uniform(42);
        let a = map_spectra(&cube, &spec, 12, Parallelism::new(1), |s| {
            s.eigenvalues.clone()
        })
        .unwrap();
        let b = map_spectra(&cube, &spec, 12, Parallelism::new(3), |s| {
            s.eigenvalues.clone()
        })
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn first_error_is_reported_with_index() {
        let err = Parallelism::new(2)
            .map(0..10, |r| {
                if r >= 4 {
                    Err(Error::invalid("boom").in_realization(9, r))
                } else {
                    Ok(r)
                }
            })
            .unwrap_err();
        match err {
            Error::Realization {
                realization_index, ..
            } => assert_eq!(realization_index, 4),
            other => panic!("unexpected {other}"),
        }
    }
}
