use serde::{Deserialize, Serialize};

use crate::eigen::count_in_sorted;
use crate::ensemble::{map_spectra, Parallelism};
use crate::error::{Error, Result};
use crate::model::{DisorderSpec, LatticeCube};
use crate::rng::stream_seed;

use super::report::mean_and_se;

pub const DEFAULT_BANDWIDTH: f64 = 0.05;

const DOS_STREAM_TAG: u64 = 0x444f_535f_5345_4544;

/// Seed for a DOS ensemble that shares no draws with the ensemble seeded by
/// `base_seed`.
pub fn independent_seed(base_seed: u64) -> u64 {
    stream_seed(base_seed, &[DOS_STREAM_TAG])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DosEstimate {
    pub grid: Vec<f64>,
    pub nu_hat: Vec<f64>,
    pub nu_std_error: Vec<f64>,
    pub n_hat: Vec<f64>,
    pub bandwidth: f64,
    pub realizations_used: u64,
    pub n_sites: usize,
    pub flags: Vec<String>,
}

impl DosEstimate {
    /// Trapezoid integral of `nu_hat` over the grid.
    pub fn total_mass(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.nu_hat.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    /// `(nu_hat, std_error)` at grid point `e`, which must be on the grid.
    pub fn at(&self, e: f64) -> Result<(f64, f64)> {
        self.grid
            .iter()
            .position(|&x| x == e)
            .map(|i| (self.nu_hat[i], self.nu_std_error[i]))
            .ok_or_else(|| Error::invalid(format!("energy {e} is not on the DOS grid")))
    }
}

/// Box-kernel density of states and integrated density of states, averaged
/// over realizations `0..realizations` of `H_ω(Λ_L)`.
pub fn estimate_dos(
    dim: usize,
    half_side: usize,
    spec: &DisorderSpec,
    realizations: u64,
    grid: &[f64],
    bandwidth: f64,
    par: Parallelism,
) -> Result<DosEstimate> {
    spec.validate()?;
    if realizations < 10 {
        return Err(Error::invalid(
            "density of states needs at least 10 realizations",
        ));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::invalid("bandwidth must be positive"));
    }
    if grid.is_empty()
        || !grid.iter().all(|x| x.is_finite())
        || !grid.windows(2).all(|w| w[0] < w[1])
    {
        return Err(Error::invalid(
            "grid must be non-empty, finite and strictly ascending",
        ));
    }
    let cube = LatticeCube::new(dim, half_side)?;
    let n_sites = cube.n_sites();
    let g = grid.len();

    let per_realization = map_spectra(&cube, spec, realizations, par, |s| {
        let ev = &s.eigenvalues;
        let mut row = Vec::with_capacity(2 * g);
        for &e in grid {
            row.push(count_in_sorted(ev, e - bandwidth, e + bandwidth) as u32);
        }
        for &e in grid {
            row.push(ev.partition_point(|&x| x <= e) as u32);
        }
        row
    })?;

    let norm = 2.0 * bandwidth * n_sites as f64;
    let mut nu_hat = Vec::with_capacity(g);
    let mut nu_std_error = Vec::with_capacity(g);
    let mut n_hat = Vec::with_capacity(g);
    let mut column = vec![0.0; per_realization.len()];
    for i in 0..g {
        for (c, row) in column.iter_mut().zip(&per_realization) {
            *c = row[i] as f64 / norm;
        }
        let (m, se) = mean_and_se(&column);
        nu_hat.push(m);
        nu_std_error.push(se.unwrap_or(0.0));
        let below: u64 = per_realization.iter().map(|row| row[g + i] as u64).sum();
        n_hat.push(below as f64 / (realizations as f64 * n_sites as f64));
    }

    let mut flags = Vec::new();
    // With no levels near the grid the disorder density bounds ν from above.
    let mut nu_max = nu_hat.iter().cloned().fold(0.0, f64::max);
    if nu_max == 0.0 {
        nu_max = spec.density_sup();
    }
    let spacing = 1.0 / (nu_max * n_sites as f64);
    if bandwidth < 2.0 * spacing {
        flags.push("bandwidth-below-twice-mean-spacing".to_string());
    }

    Ok(DosEstimate {
        grid: grid.to_vec(),
        nu_hat,
        nu_std_error,
        n_hat,
        bandwidth,
        realizations_used: realizations,
        n_sites,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hull_grid(spec: &DisorderSpec, dim: usize, step: f64) -> Vec<f64> {
        let (lo, hi) = spec.spectrum_hull(dim);
        let n = ((hi - lo) / step).round() as usize;
        (0..=n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .collect()
    }

    #[test]
    fn mass_and_ids_limits() {
        let spec = DisorderSpec::default_uniform(3);
        let grid = hull_grid(&spec, 1, 0.01);
        let dos = estimate_dos(1, 100, &spec, 20, &grid, 0.05, Parallelism::default()).unwrap();
        assert!(
            (dos.total_mass() - 1.0).abs() < 0.02,
            "{}",
            dos.total_mass()
        );
        assert_eq!(*dos.n_hat.last().unwrap(), 1.0);
        assert_eq!(dos.n_hat[0], 0.0);
        assert!(dos.n_hat.windows(2).all(|w| w[0] <= w[1]));
        assert!(dos.nu_hat.iter().all(|&x| x >= 0.0));
        assert!(dos.flags.is_empty());
    }

    #[test]
    fn narrow_bandwidth_is_flagged() {
        let spec = DisorderSpec::default_uniform(3);
        let dos = estimate_dos(1, 10, &spec, 10, &[2.0], 1e-3, Parallelism::default()).unwrap();
        assert_eq!(dos.flags, vec!["bandwidth-below-twice-mean-spacing"]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = DisorderSpec::default_uniform(3);
        let p = Parallelism::default();
        assert!(estimate_dos(1, 10, &spec, 9, &[2.0], 0.05, p).is_err());
        assert!(estimate_dos(1, 10, &spec, 10, &[2.0, 1.0], 0.05, p).is_err());
        assert!(estimate_dos(1, 10, &spec, 10, &[2.0], 0.0, p).is_err());
    }

    #[test]
    fn independent_seed_differs() {
        assert_ne!(independent_seed(1), 1);
        assert_ne!(independent_seed(1), independent_seed(2));
    }
}
