//! Eigenvalue-counting estimators: expected counts, second factorial
//! moments and simultaneous-hit probabilities at two energies.

use crate::eigen::count_in_sorted;
use crate::ensemble::{map_spectra, Parallelism};
use crate::error::{Error, Result};
use crate::model::{DisorderSpec, LatticeCube};

use super::report::{mean_and_se, EstimatorReport};
use super::Interval;

const LOW_POWER_WEGNER: u64 = 100;
const LOW_POWER_MINAMI: u64 = 1000;

/// Eigenvalue counts in each window, one row per realization `0..R`.
pub fn window_counts(
    dim: usize,
    half_side: usize,
    spec: &DisorderSpec,
    windows: &[Interval],
    realizations: u64,
    par: Parallelism,
) -> Result<Vec<Vec<u32>>> {
    spec.validate()?;
    for w in windows {
        w.check_finite("counting window")?;
    }
    let cube = LatticeCube::new(dim, half_side)?;
    map_spectra(&cube, spec, realizations, par, |s| {
        windows
            .iter()
            .map(|w| count_in_sorted(&s.eigenvalues, w.lo, w.hi) as u32)
            .collect()
    })
}

fn column(rows: &[Vec<u32>], i: usize) -> Vec<u32> {
    rows.iter().map(|r| r[i]).collect()
}

/// Expected eigenvalue count in `J` and its ratio to `|J| |Λ|`.
pub fn wegner_from_counts(counts: &[u32], j: Interval, n_sites: usize) -> EstimatorReport {
    let r = counts.len() as u64;
    let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let (mean, se) = mean_and_se(&values);
    let denom = j.length() * n_sites as f64;
    let mut rep = EstimatorReport::new("wegner", r);
    rep.param("J", j).param("volume", n_sites);
    rep.estimate("mean_count", mean, se);
    let ratio = (denom > 0.0).then(|| mean / denom);
    rep.ratio(
        "count_per_length_volume",
        ratio,
        se.filter(|_| denom > 0.0).map(|s| s / denom),
    );
    rep.count("total_count", counts.iter().map(|&c| c as u64).sum());
    rep.count(
        "max_count",
        counts.iter().copied().max().unwrap_or(0) as u64,
    );
    if r < LOW_POWER_WEGNER {
        rep.flag("low-power");
    }
    rep
}

pub fn wegner_estimator(
    dim: usize,
    half_side: usize,
    spec: &DisorderSpec,
    j: Interval,
    realizations: u64,
    par: Parallelism,
) -> Result<EstimatorReport> {
    let rows = window_counts(dim, half_side, spec, &[j], realizations, par)?;
    let n_sites = LatticeCube::new(dim, half_side)?.n_sites();
    let mut rep = wegner_from_counts(&column(&rows, 0), j, n_sites);
    rep.param("d", dim)
        .param("L", half_side)
        .param("seed", spec.base_seed);
    Ok(rep)
}

/// Second factorial moment `E[tr 1_J (tr 1_K - 1)]` and its ratio to
/// `|J| |K| |Λ|^2`. The integer sum of the per-realization products is
/// reported as `sum_second_factorial`.
pub fn minami_from_counts(
    counts_j: &[u32],
    counts_k: &[u32],
    j: Interval,
    k: Interval,
    n_sites: usize,
) -> Result<EstimatorReport> {
    if !j.is_subset_of(&k) {
        return Err(Error::invalid(format!(
            "J = [{}, {}] is not contained in K = [{}, {}]",
            j.lo, j.hi, k.lo, k.hi
        )));
    }
    if counts_j.len() != counts_k.len() {
        return Err(Error::invalid("count columns differ in length"));
    }
    let products: Vec<u64> = counts_j
        .iter()
        .zip(counts_k)
        .map(|(&cj, &ck)| cj as u64 * (ck as u64).saturating_sub(1))
        .collect();
    let values: Vec<f64> = products.iter().map(|&p| p as f64).collect();
    let (mean, se) = mean_and_se(&values);
    let n = n_sites as f64;
    let denom = j.length() * k.length() * n * n;
    let r = counts_j.len() as u64;
    let mut rep = EstimatorReport::new("minami", r);
    rep.param("J", j).param("K", k).param("volume", n_sites);
    rep.estimate("second_factorial_moment", mean, se);
    let ok = denom > 0.0;
    rep.ratio(
        "moment_per_length_length_volume_sq",
        ok.then(|| mean / denom),
        se.filter(|_| ok).map(|s| s / denom),
    );
    rep.count("sum_second_factorial", products.iter().sum());
    rep.count("sum_count_j", counts_j.iter().map(|&c| c as u64).sum());
    if r < LOW_POWER_MINAMI {
        rep.flag("low-power");
    }
    Ok(rep)
}

pub fn minami_estimator(
    dim: usize,
    half_side: usize,
    spec: &DisorderSpec,
    j: Interval,
    k: Interval,
    realizations: u64,
    par: Parallelism,
) -> Result<EstimatorReport> {
    if !j.is_subset_of(&k) {
        return Err(Error::invalid("J must be contained in K"));
    }
    let rows = window_counts(dim, half_side, spec, &[j, k], realizations, par)?;
    let n_sites = LatticeCube::new(dim, half_side)?.n_sites();
    let mut rep = minami_from_counts(&column(&rows, 0), &column(&rows, 1), j, k, n_sites)?;
    rep.param("d", dim)
        .param("L", half_side)
        .param("seed", spec.base_seed);
    Ok(rep)
}

/// Geometry of the two-energy experiment: eigenvalues of the small box
/// `Λ_ℓ`, `ℓ = round(L^α)`, tested against windows `E ± L^{-d}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecorrelationSetup {
    pub dim: usize,
    pub big_half_side: usize,
    pub alpha: f64,
    pub e: f64,
    pub e_prime: f64,
}

impl DecorrelationSetup {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.big_half_side == 0 || self.dim == 0 {
            return Err(Error::invalid("d and L must be positive"));
        }
        if !(self.e.is_finite() && self.e_prime.is_finite()) {
            return Err(Error::invalid("energies must be finite"));
        }
        if self.ell() < 3 {
            return Err(Error::invalid(format!(
                "small box half-side {} is below 3",
                self.ell()
            )));
        }
        Ok(())
    }

    pub fn ell(&self) -> usize {
        (self.big_half_side as f64).powf(self.alpha).round() as usize
    }

    pub fn half_width(&self) -> f64 {
        (self.big_half_side as f64).powi(-(self.dim as i32))
    }

    /// `(ℓ/L)^d`.
    pub fn scale(&self) -> f64 {
        (self.ell() as f64 / self.big_half_side as f64).powi(self.dim as i32)
    }

    pub fn window_e(&self) -> Interval {
        Interval::centered(self.e, self.half_width())
    }

    pub fn window_e_prime(&self) -> Interval {
        Interval::centered(self.e_prime, self.half_width())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowHits {
    pub at_e: bool,
    pub at_e_prime: bool,
}

fn binomial_se(p: f64, r: f64) -> f64 {
    (p * (1.0 - p) / r).sqrt()
}

pub fn decorrelation_from_hits(
    hits: &[WindowHits],
    setup: &DecorrelationSetup,
) -> Result<EstimatorReport> {
    setup.validate()?;
    let r = hits.len() as u64;
    if r == 0 {
        return Err(Error::invalid("no realizations"));
    }
    let n_e = hits.iter().filter(|h| h.at_e).count() as u64;
    let n_f = hits.iter().filter(|h| h.at_e_prime).count() as u64;
    let n_b = hits.iter().filter(|h| h.at_e && h.at_e_prime).count() as u64;
    let rf = r as f64;
    let (pe, pf, pb) = (n_e as f64 / rf, n_f as f64 / rf, n_b as f64 / rf);

    let mut rep = EstimatorReport::new("decorrelation", r);
    rep.param("d", setup.dim)
        .param("L", setup.big_half_side)
        .param("alpha", setup.alpha)
        .param("ell", setup.ell())
        .param("E", setup.e)
        .param("E_prime", setup.e_prime)
        .param("window_half_width", setup.half_width());
    rep.estimate("p_e", pe, Some(binomial_se(pe, rf)))
        .estimate("p_e_prime", pf, Some(binomial_se(pf, rf)))
        .estimate("p_both", pb, Some(binomial_se(pb, rf)));
    rep.count("hits_e", n_e)
        .count("hits_e_prime", n_f)
        .count("hits_both", n_b);

    if n_e == 0 || n_f == 0 {
        rep.flag("zero-marginal-hits");
        rep.ratio("p_both_over_product", None, None);
    } else {
        // Delta method with the multinomial covariance of (p_both, p_e, p_e').
        let f = pb / (pe * pf);
        let g = [1.0 / (pe * pf), -f / pe, -f / pf];
        let cov = [
            [pb * (1.0 - pb), pb * (1.0 - pe), pb * (1.0 - pf)],
            [pb * (1.0 - pe), pe * (1.0 - pe), pb - pe * pf],
            [pb * (1.0 - pf), pb - pe * pf, pf * (1.0 - pf)],
        ];
        let mut var = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                var += g[i] * cov[i][j] * g[j];
            }
        }
        rep.ratio(
            "p_both_over_product",
            Some(f),
            Some((var.max(0.0) / rf).sqrt()),
        );
    }
    let s = setup.scale();
    let se_b = binomial_se(pb, rf);
    rep.ratio(
        "p_both_over_scale_2d",
        Some(pb / (s * s)),
        Some(se_b / (s * s)),
    );
    rep.ratio("p_both_over_scale_d", Some(pb / s), Some(se_b / s));
    if (setup.e - setup.e_prime).abs() > 2.0 * setup.dim as f64 {
        rep.flag("energy-separation-exceeds-2d");
    }
    if r < LOW_POWER_WEGNER {
        rep.flag("low-power");
    }
    Ok(rep)
}

pub fn decorrelation_estimator(
    setup: &DecorrelationSetup,
    spec: &DisorderSpec,
    realizations: u64,
    par: Parallelism,
) -> Result<EstimatorReport> {
    setup.validate()?;
    if setup.e == setup.e_prime {
        return Err(Error::invalid("E and E' must differ"));
    }
    let rows = window_counts(
        setup.dim,
        setup.ell(),
        spec,
        &[setup.window_e(), setup.window_e_prime()],
        realizations,
        par,
    )?;
    let hits: Vec<WindowHits> = rows
        .iter()
        .map(|r| WindowHits {
            at_e: r[0] > 0,
            at_e_prime: r[1] > 0,
        })
        .collect();
    let mut rep = decorrelation_from_hits(&hits, setup)?;
    rep.param("seed", spec.base_seed);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wegner_whole_spectrum_counts_every_level() {
        let spec = DisorderSpec::default_uniform(8);
        let (lo, hi) = spec.spectrum_hull(1);
        let rep = wegner_estimator(
            1,
            12,
            &spec,
            Interval::new(lo, hi),
            20,
            Parallelism::default(),
        )
        .unwrap();
        let m = rep.get_estimate("mean_count").unwrap();
        assert_eq!(m.value, Some(25.0));
        assert_eq!(m.std_error, Some(0.0));
        assert!(rep.has_flag("low-power"));
    }

    #[test]
    fn empty_window_gives_zero() {
        let spec = DisorderSpec::default_uniform(8);
        let rep =
            wegner_estimator(1, 12, &spec, Interval::empty(), 10, Parallelism::default()).unwrap();
        assert_eq!(rep.get_estimate("mean_count").unwrap().value, Some(0.0));
        assert_eq!(
            rep.get_ratio("count_per_length_volume").unwrap().value,
            None
        );
        let rep = minami_estimator(
            1,
            12,
            &spec,
            Interval::empty(),
            Interval::new(0.0, 1.0),
            10,
            Parallelism::default(),
        )
        .unwrap();
        assert_eq!(
            rep.get_estimate("second_factorial_moment").unwrap().value,
            Some(0.0)
        );
    }

    #[test]
    fn minami_rejects_j_outside_k() {
        let spec = DisorderSpec::default_uniform(8);
        let r = minami_estimator(
            1,
            5,
            &spec,
            Interval::new(0.0, 2.0),
            Interval::new(1.0, 3.0),
            10,
            Parallelism::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn minami_with_full_k_is_scaled_wegner() {
        let j = Interval::new(1.9, 2.1);
        let k = Interval::new(-10.0, 10.0);
        let cj = [0u32, 1, 3, 2, 0];
        let ck = [9u32; 5];
        let m = minami_from_counts(&cj, &ck, j, k, 9).unwrap();
        let w = wegner_from_counts(&cj, j, 9);
        assert_eq!(
            m.get_count("sum_second_factorial").unwrap(),
            8 * w.get_count("total_count").unwrap()
        );
    }

    #[test]
    fn identical_energies_give_equal_marginal_and_joint() {
        let setup = DecorrelationSetup {
            dim: 1,
            big_half_side: 100,
            alpha: 0.7,
            e: 2.0,
            e_prime: 2.0,
        };
        let spec = DisorderSpec::default_uniform(1);
        let rows = window_counts(
            1,
            setup.ell(),
            &spec,
            &[setup.window_e(), setup.window_e_prime()],
            300,
            Parallelism::default(),
        )
        .unwrap();
        let hits: Vec<_> = rows
            .iter()
            .map(|r| WindowHits {
                at_e: r[0] > 0,
                at_e_prime: r[1] > 0,
            })
            .collect();
        let rep = decorrelation_from_hits(&hits, &setup).unwrap();
        assert_eq!(rep.get_count("hits_both"), rep.get_count("hits_e"));
        assert!(rep.get_count("hits_e").unwrap() > 0);
    }

    #[test]
    fn windows_outside_spectrum_never_hit() {
        let setup = DecorrelationSetup {
            dim: 1,
            big_half_side: 100,
            alpha: 0.5,
            e: -5.0,
            e_prime: 9.0,
        };
        let rep = decorrelation_estimator(
            &setup,
            &DisorderSpec::default_uniform(2),
            50,
            Parallelism::default(),
        )
        .unwrap();
        for name in ["p_e", "p_e_prime", "p_both"] {
            assert_eq!(rep.get_estimate(name).unwrap().value, Some(0.0));
        }
        assert!(rep.has_flag("zero-marginal-hits"));
        assert_eq!(rep.get_ratio("p_both_over_product").unwrap().value, None);
    }

    #[test]
    fn setup_validation() {
        let mut s = DecorrelationSetup {
            dim: 1,
            big_half_side: 300,
            alpha: 0.7,
            e: 0.5,
            e_prime: 3.5,
        };
        assert_eq!(s.ell(), 54);
        s.validate().unwrap();
        s.alpha = 1.5;
        assert!(s.validate().is_err());
        s.alpha = 0.1;
        assert!(s.validate().is_err());
    }
}
