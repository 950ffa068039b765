//! Spectra of finite-volume Hamiltonians.
//!
//! Full decompositions go through the dense Householder/QL solver. When only
//! eigenvalues of a 1D periodic chain are needed the banded path is used
//! instead; both are direct methods and agree to rounding.

mod band;
mod dense;
mod dirichlet;
mod sturm;

pub use band::{interleaved_ring_order, BandMatrix};
pub use dense::{eigh, eigvalsh, tridiagonal_eigenvalues, EigenBasis, SymMatrix};
pub use dirichlet::{
    calibrate_gap_constant, dirichlet_matrix, dirichlet_min_gap, dirichlet_spectrum,
    DirichletSpectrum,
};
pub use sturm::{sturm_count, sturm_interval_count};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Hamiltonian, Potential};

/// Default cap on the order of matrices handed to the dense solver.
pub const DEFAULT_DENSE_LIMIT: usize = 4096;

/// Residual tolerance relative to `‖H‖_F`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
/// Tolerance on `max |Φ^T Φ - I|`.
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-10;

/// Provenance of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectrumMeta {
    pub dim: usize,
    pub half_side: usize,
    pub base_seed: u64,
    pub realization_index: u64,
}

impl SpectrumMeta {
    pub fn of(pot: &Potential) -> Self {
        Self {
            dim: pot.cube.dim(),
            half_side: pot.cube.half_side(),
            base_seed: pot.seed_used,
            realization_index: pot.realization_index,
        }
    }
}

/// One realization's spectrum: ascending eigenvalues (with multiplicity)
/// and, when requested, an aligned orthonormal eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSample {
    pub meta: SpectrumMeta,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<EigenBasis>,
}

impl SpectralSample {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn basis(&self) -> Result<&EigenBasis> {
        self.eigenvectors.as_ref().ok_or(Error::MissingEigenvectors)
    }

    pub fn vector(&self, k: usize) -> Result<&[f64]> {
        Ok(self.basis()?.vector(k))
    }

    /// Distance from `E_k` to the rest of the spectrum.
    pub fn gap_to_rest(&self, k: usize) -> f64 {
        let ev = &self.eigenvalues;
        let below = k.checked_sub(1).map_or(f64::INFINITY, |j| ev[k] - ev[j]);
        let above = ev.get(k + 1).map_or(f64::INFINITY, |x| x - ev[k]);
        below.min(above)
    }

    /// Number of eigenvalues in the closed interval `[lo, hi]`.
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        count_in_sorted(&self.eigenvalues, lo, hi)
    }
}

/// Number of entries of an ascending slice inside `[lo, hi]`.
pub fn count_in_sorted(sorted: &[f64], lo: f64, hi: f64) -> usize {
    if hi < lo {
        return 0;
    }
    let a = sorted.partition_point(|&x| x < lo);
    let b = sorted.partition_point(|&x| x <= hi);
    b - a
}

/// Full eigendecomposition of `H` (Householder + implicit QL).
pub fn eig_all(h: &Hamiltonian, meta: SpectrumMeta) -> Result<SpectralSample> {
    eig_all_with_limit(h, meta, DEFAULT_DENSE_LIMIT)
}

pub fn eig_all_with_limit(
    h: &Hamiltonian,
    meta: SpectrumMeta,
    limit: usize,
) -> Result<SpectralSample> {
    let n = h.order();
    if n > limit {
        return Err(Error::TooLarge { order: n, limit });
    }
    let (eigenvalues, basis) = eigh(&h.to_dense())
        .map_err(|e| e.in_realization(meta.base_seed, meta.realization_index))?;
    Ok(SpectralSample {
        meta,
        eigenvalues,
        eigenvectors: Some(basis),
    })
}

/// Eigenvalues only. 1D chains take the banded path.
pub fn eigenvalues(h: &Hamiltonian, meta: SpectrumMeta) -> Result<SpectralSample> {
    eigenvalues_with_limit(h, meta, DEFAULT_DENSE_LIMIT)
}

pub fn eigenvalues_with_limit(
    h: &Hamiltonian,
    meta: SpectrumMeta,
    limit: usize,
) -> Result<SpectralSample> {
    let n = h.order();
    let result = if h.cube().dim() == 1 {
        BandMatrix::periodic_chain(h.diagonal()).eigenvalues()
    } else {
        if n > limit {
            return Err(Error::TooLarge { order: n, limit });
        }
        eigvalsh(&h.to_dense())
    };
    let eigenvalues =
        result.map_err(|e| e.in_realization(meta.base_seed, meta.realization_index))?;
    Ok(SpectralSample {
        meta,
        eigenvalues,
        eigenvectors: None,
    })
}

/// Largest residual `‖Hφ_k - E_k φ_k‖_2` over the sample.
pub fn max_residual(h: &Hamiltonian, sample: &SpectralSample) -> Result<f64> {
    let basis = sample.basis()?;
    let mut worst = 0.0f64;
    for (k, &lam) in sample.eigenvalues.iter().enumerate() {
        let v = basis.vector(k);
        let hv = h.apply(v);
        let r: f64 = hv.iter().zip(v).map(|(a, b)| (a - lam * b).powi(2)).sum();
        worst = worst.max(r.sqrt());
    }
    Ok(worst)
}

/// Checks the residual and orthonormality invariants of a decomposition.
pub fn validate_decomposition(h: &Hamiltonian, sample: &SpectralSample) -> Result<()> {
    let scale = h.frobenius_norm().max(1.0);
    let res = max_residual(h, sample)?;
    if res > RESIDUAL_TOLERANCE * scale {
        return Err(Error::invalid(format!(
            "residual {res:e} exceeds tolerance"
        )));
    }
    let orth = sample.basis()?.orthonormality_defect();
    if orth > ORTHONORMALITY_TOLERANCE {
        return Err(Error::invalid(format!(
            "orthonormality defect {orth:e} exceeds tolerance"
        )));
    }
    if !sample.eigenvalues.windows(2).all(|w| w[0] <= w[1]) {
        return Err(Error::invalid("eigenvalues not sorted"));
    }
    Ok(())
}
