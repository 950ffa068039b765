//! Localization centers, exponential decay fits and eigenvalue matching
//! between a box and a smaller box that shares its potential.

use serde::{Deserialize, Serialize};

use crate::eigen::{self, SpectralSample, SpectrumMeta};
use crate::error::{Error, Result};
use crate::model::{sample_potential, DisorderSpec, Hamiltonian, LatticeCube};
use crate::stats::Interval;

/// Amplitudes at or below this are excluded from decay fits.
pub const AMPLITUDE_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRecord {
    pub index: usize,
    pub energy: f64,
    pub center: Vec<i64>,
    pub center_site: usize,
    /// `-slope` of the fit of `log|φ|` against distance, clamped at zero.
    pub decay_rate: f64,
    /// Fitted intercept over `ln L`; `None` when `L < 2`.
    pub prefactor_exponent: Option<f64>,
    /// Largest excess of `log|φ(x)|` over the fitted line.
    pub max_violation: f64,
    pub sites_fitted: usize,
    /// Fewer than two distinct distances above the floor: the decay rate is
    /// set by the floor, not by a fit.
    pub cutoff_limited: bool,
}

/// Site maximizing `|φ|`. Flat indices are lexicographic in the
/// multi-index, so the first maximum is the lexicographically smallest.
pub fn center_site(phi: &[f64]) -> usize {
    let mut best = 0;
    let mut best_abs = f64::NEG_INFINITY;
    for (i, x) in phi.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    best
}

/// Periodic sup-norm distance from `center` to every site.
fn distances_from(cube: &LatticeCube, coords: &[Vec<i64>], center: usize) -> Vec<usize> {
    let side = cube.side();
    let c = &coords[center];
    coords
        .iter()
        .map(|x| {
            x.iter()
                .zip(c)
                .map(|(&a, &b)| {
                    let d = (a - b).unsigned_abs() as usize;
                    d.min(side - d)
                })
                .max()
                .unwrap_or(0)
        })
        .collect()
}

fn fit_record(
    cube: &LatticeCube,
    coords: &[Vec<i64>],
    index: usize,
    energy: f64,
    phi: &[f64],
) -> LocalizationRecord {
    let center = center_site(phi);
    let dist = distances_from(cube, coords, center);
    let pts: Vec<(f64, f64)> = phi
        .iter()
        .zip(&dist)
        .filter(|(p, _)| p.abs() > AMPLITUDE_FLOOR)
        .map(|(p, &d)| (d as f64, p.abs().ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();

    let (decay_rate, intercept, cutoff_limited) = if sxx > 0.0 {
        let slope = sxy / sxx;
        ((-slope).max(0.0), my - slope * mx, false)
    } else {
        let peak = phi[center].abs().ln();
        (peak - AMPLITUDE_FLOOR.ln(), peak, true)
    };
    let max_violation = pts
        .iter()
        .map(|&(x, y)| y - (intercept - decay_rate * x))
        .fold(0.0, f64::max);
    let l = cube.half_side();
    LocalizationRecord {
        index,
        energy,
        center: coords[center].clone(),
        center_site: center,
        decay_rate,
        prefactor_exponent: (l >= 2).then(|| intercept / (l as f64).ln()),
        max_violation,
        sites_fitted: pts.len(),
        cutoff_limited,
    }
}

/// One record per eigenvalue of a sample with eigenvectors.
pub fn localization_centers(sample: &SpectralSample) -> Result<Vec<LocalizationRecord>> {
    localization_centers_for(sample, 0..sample.len())
}

/// Records for a subset of eigenvalue indices.
pub fn localization_centers_for(
    sample: &SpectralSample,
    indices: impl IntoIterator<Item = usize>,
) -> Result<Vec<LocalizationRecord>> {
    let basis = sample.basis()?;
    let cube = LatticeCube::new(sample.meta.dim, sample.meta.half_side)?;
    if cube.n_sites() != basis.order() {
        return Err(Error::CubeMismatch {
            expected: cube.n_sites(),
            found: basis.order(),
        });
    }
    let coords: Vec<Vec<i64>> = (0..cube.n_sites()).map(|s| cube.coords(s)).collect();
    indices
        .into_iter()
        .map(|k| {
            if k >= sample.len() {
                return Err(Error::invalid(format!("eigenvalue index {k} out of range")));
            }
            Ok(fit_record(
                &cube,
                &coords,
                k,
                sample.eigenvalues[k],
                basis.vector(k),
            ))
        })
        .collect()
}

/// Eigenvalue indices `floor(lo*N) .. ceil(hi*N)` for a fractional window of
/// the ordered spectrum.
pub fn quantile_indices(n: usize, lo: f64, hi: f64) -> std::ops::Range<usize> {
    let a = ((lo.clamp(0.0, 1.0) * n as f64).floor() as usize).min(n);
    let b = ((hi.clamp(0.0, 1.0) * n as f64).ceil() as usize).min(n);
    a..b.max(a)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

/// Geometry of a box-matching run: `Λ_L` against `γ + Λ_m`,
/// `m = min(floor(ℓ(1+ε)), L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxMatchingSetup {
    pub dim: usize,
    pub big_half_side: usize,
    pub ell: usize,
    pub epsilon: f64,
    pub window: Interval,
    pub center: Vec<i64>,
}

impl BoxMatchingSetup {
    pub fn validate(&self) -> Result<()> {
        if self.center.len() != self.dim {
            return Err(Error::invalid("center arity differs from d"));
        }
        if self.ell == 0 || self.ell > self.big_half_side {
            return Err(Error::invalid(format!(
                "inner half-side {} must lie in 1..={}",
                self.ell, self.big_half_side
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon must be nonnegative"));
        }
        self.window.check_finite("matching window")
    }

    pub fn outer_half_side(&self) -> usize {
        ((self.ell as f64 * (1.0 + self.epsilon)).floor() as usize).min(self.big_half_side)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMatch {
    pub index: usize,
    pub energy: f64,
    pub center: Vec<i64>,
    pub decay_rate: f64,
    pub nearest: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxMatchingReport {
    pub meta: SpectrumMeta,
    pub outer_half_side: usize,
    pub matches: Vec<LevelMatch>,
    pub max_distance: Option<f64>,
    /// Median decay rate over the matched levels.
    pub nu_hat: Option<f64>,
    /// `exp(-ν̂ ε ℓ / 4)`.
    pub reference_scale: Option<f64>,
}

/// Matches eigenvalues of `H(Λ_L)` in the window whose centers lie in
/// `γ + Λ_ℓ` to the nearest eigenvalue of `H(γ + Λ_m)`, where the small box
/// carries the restriction of the same potential.
pub fn box_matching(
    setup: &BoxMatchingSetup,
    spec: &DisorderSpec,
    realization_index: u64,
) -> Result<BoxMatchingReport> {
    setup.validate()?;
    let cube = LatticeCube::new(setup.dim, setup.big_half_side)?;
    let pot = sample_potential(&cube, spec, realization_index)?;
    let meta = SpectrumMeta::of(&pot);
    let h = Hamiltonian::assemble(&cube, &pot)?;
    let big = eigen::eig_all(&h, meta)?;

    let lo = big.eigenvalues.partition_point(|&x| x < setup.window.lo);
    let hi = big.eigenvalues.partition_point(|&x| x <= setup.window.hi);
    let records = localization_centers_for(&big, lo..hi.max(lo))?;
    let gamma = cube.flat_index(&setup.center);
    let inside: Vec<&LocalizationRecord> = records
        .iter()
        .filter(|r| cube.distance(r.center_site, gamma) <= setup.ell)
        .collect();

    let m = setup.outer_half_side();
    let mut report = BoxMatchingReport {
        meta,
        outer_half_side: m,
        matches: Vec::new(),
        max_distance: None,
        nu_hat: None,
        reference_scale: None,
    };
    if inside.is_empty() {
        return Ok(report);
    }

    let small_values = if m == setup.big_half_side {
        big.eigenvalues.clone()
    } else {
        let sub = pot.restrict(&setup.center, m)?;
        let hs = Hamiltonian::assemble(&sub.cube, &sub)?;
        eigen::eigenvalues(&hs, SpectrumMeta::of(&sub))?.eigenvalues
    };
    for r in inside {
        let p = small_values.partition_point(|&x| x < r.energy);
        let nearest = [p.checked_sub(1), (p < small_values.len()).then_some(p)]
            .into_iter()
            .flatten()
            .map(|i| small_values[i])
            .min_by(|a, b| (a - r.energy).abs().total_cmp(&(b - r.energy).abs()))
            .ok_or_else(|| Error::invalid("small box has no eigenvalues"))?;
        report.matches.push(LevelMatch {
            index: r.index,
            energy: r.energy,
            center: r.center.clone(),
            decay_rate: r.decay_rate,
            nearest,
            distance: (nearest - r.energy).abs(),
        });
    }
    report.max_distance = report.matches.iter().map(|x| x.distance).reduce(f64::max);
    report.nu_hat = median(
        &report
            .matches
            .iter()
            .map(|x| x.decay_rate)
            .collect::<Vec<_>>(),
    );
    report.reference_scale = report
        .nu_hat
        .map(|nu| (-nu * setup.epsilon * setup.ell as f64 / 4.0).exp());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::EigenBasis;
    use crate::model::Potential;

    fn sample_with_vectors(dim: usize, l: usize, values: Vec<f64>) -> SpectralSample {
        let cube = LatticeCube::new(dim, l).unwrap();
        let pot = Potential::from_values(cube, values).unwrap();
        let h = Hamiltonian::assemble(&cube, &pot).unwrap();
        eigen::eig_all(&h, SpectrumMeta::of(&pot)).unwrap()
    }

    #[test]
    fn one_hot_vector_is_cutoff_limited() {
        let cube = LatticeCube::new(1, 3).unwrap();
        let coords: Vec<Vec<i64>> = (0..7).map(|s| cube.coords(s)).collect();
        let mut phi = vec![0.0; 7];
        phi[4] = 1.0;
        let r = fit_record(&cube, &coords, 0, 0.0, &phi);
        assert_eq!(r.center, vec![1]);
        assert!(r.cutoff_limited);
        assert!((r.decay_rate + AMPLITUDE_FLOOR.ln()).abs() < 1e-12);
        assert_eq!(r.max_violation, 0.0);
    }

    #[test]
    fn ties_go_to_smallest_multi_index() {
        let cube = LatticeCube::new(2, 1).unwrap();
        let coords: Vec<Vec<i64>> = (0..9).map(|s| cube.coords(s)).collect();
        let mut phi = vec![0.1; 9];
        phi[cube.flat_index(&[1, -1])] = -0.5;
        phi[cube.flat_index(&[0, 1])] = 0.5;
        let r = fit_record(&cube, &coords, 0, 0.0, &phi);
        assert_eq!(r.center, vec![0, 1]);
    }

    #[test]
    fn exact_exponential_is_recovered() {
        let cube = LatticeCube::new(1, 20).unwrap();
        let coords: Vec<Vec<i64>> = (0..41).map(|s| cube.coords(s)).collect();
        let c = cube.flat_index(&[3]);
        let phi: Vec<f64> = (0..41)
            .map(|s| (-0.7 * cube.distance(s, c) as f64).exp())
            .collect();
        let r = fit_record(&cube, &coords, 0, 0.0, &phi);
        assert_eq!(r.center, vec![3]);
        assert!((r.decay_rate - 0.7).abs() < 1e-12);
        assert!(r.max_violation < 1e-12);
        assert!(r.prefactor_exponent.unwrap().abs() < 1e-12);
    }

    #[test]
    fn records_cover_every_level() {
        let s = sample_with_vectors(1, 6, (0..13).map(|i| (i * 7 % 13) as f64 * 0.3).collect());
        let recs = localization_centers(&s).unwrap();
        assert_eq!(recs.len(), 13);
        for r in &recs {
            let phi = s.vector(r.index).unwrap();
            let m = phi.iter().map(|x| x.abs()).fold(0.0, f64::max);
            assert_eq!(phi[r.center_site].abs(), m);
        }
    }

    #[test]
    fn missing_vectors_rejected() {
        let s = SpectralSample {
            meta: SpectrumMeta {
                dim: 1,
                half_side: 1,
                base_seed: 0,
                realization_index: 0,
            },
            eigenvalues: vec![0.0; 3],
            eigenvectors: None::<EigenBasis>,
        };
        assert!(localization_centers(&s).is_err());
    }

    #[test]
    fn quantile_window_indices() {
        assert_eq!(quantile_indices(1001, 0.3, 0.7), 300..701);
        assert_eq!(quantile_indices(10, 0.0, 1.0), 0..10);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0]), Some(2.5));
    }

    #[test]
    fn full_sized_inner_box_matches_exactly() {
        let setup = BoxMatchingSetup {
            dim: 1,
            big_half_side: 30,
            ell: 30,
            epsilon: 0.5,
            window: Interval::new(-10.0, 10.0),
            center: vec![0],
        };
        let rep = box_matching(&setup, &DisorderSpec::default_uniform(4), 0).unwrap();
        assert_eq!(rep.outer_half_side, 30);
        assert_eq!(rep.matches.len(), 61);
        assert_eq!(rep.max_distance, Some(0.0));
    }

    #[test]
    fn window_outside_spectrum_is_empty() {
        let setup = BoxMatchingSetup {
            dim: 1,
            big_half_side: 30,
            ell: 10,
            epsilon: 0.3,
            window: Interval::new(20.0, 21.0),
            center: vec![0],
        };
        let rep = box_matching(&setup, &DisorderSpec::default_uniform(4), 0).unwrap();
        assert!(rep.matches.is_empty());
        assert_eq!(rep.max_distance, None);
    }
}
