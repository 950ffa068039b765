//! Goodness-of-fit and independence tests for rescaled level processes.

use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson};

use crate::error::{Error, Result};

use super::levels::PointProcessSample;
use super::report::{mean_and_se, EstimatorReport};
use super::Interval;

/// Below this many realizations a Poisson report is flagged low-power.
pub const LOW_POWER_REALIZATIONS: u64 = 100;
const LOW_POWER_INDEPENDENCE: u64 = 300;
const MIN_EXPECTED: f64 = 5.0;

/// `(t, t')` probe grid `{0.5, 1, 2}^2` for joint Laplace functionals.
pub const DEFAULT_PROBES: [(f64, f64); 9] = [
    (0.5, 0.5),
    (0.5, 1.0),
    (0.5, 2.0),
    (1.0, 0.5),
    (1.0, 1.0),
    (1.0, 2.0),
    (2.0, 0.5),
    (2.0, 1.0),
    (2.0, 2.0),
];

pub fn poisson_pmf(mean: f64, k: u64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    Poisson::new(mean).map_or(f64::NAN, |p| p.pmf(k))
}

fn poisson_cdf(mean: f64, k: u64) -> f64 {
    if mean == 0.0 {
        return 1.0;
    }
    Poisson::new(mean).map_or(f64::NAN, |p| p.cdf(k))
}

/// Total-variation distance between the empirical law of `counts` and
/// Poisson(`mean`), including the Poisson mass above the largest count.
pub fn tv_to_poisson(counts: &[u64], mean: f64) -> f64 {
    if counts.is_empty() {
        return f64::NAN;
    }
    let max = *counts.iter().max().unwrap();
    let mut freq = vec![0u64; max as usize + 1];
    for &c in counts {
        freq[c as usize] += 1;
    }
    let r = counts.len() as f64;
    let mut acc = 0.0;
    let mut covered = 0.0;
    for (k, &f) in freq.iter().enumerate() {
        let p = poisson_pmf(mean, k as u64);
        covered += p;
        acc += (f as f64 / r - p).abs();
    }
    0.5 * (acc + (1.0 - covered).max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
}

fn chi_square_pvalue(stat: f64, dof: u64) -> f64 {
    ChiSquared::new(dof as f64).map_or(f64::NAN, |c| c.sf(stat))
}

/// Merges the bin with the smallest expected count into its smaller
/// neighbour until every expected count reaches `MIN_EXPECTED`.
fn merge_small_bins(bins: &mut Vec<(f64, f64)>) {
    while bins.len() > 1 {
        let (i, &(_, e)) = bins
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .unwrap();
        if e >= MIN_EXPECTED {
            break;
        }
        let j = if i == 0 {
            1
        } else if i == bins.len() - 1 || bins[i - 1].1 <= bins[i + 1].1 {
            i - 1
        } else {
            i + 1
        };
        let (lo, hi) = (i.min(j), i.max(j));
        let merged = bins.remove(hi);
        bins[lo].0 += merged.0;
        bins[lo].1 += merged.1;
    }
}

/// Pearson chi-square of `counts` against Poisson(`mean`), with adjacent
/// bins merged so every expected count is at least 5. `None` when fewer
/// than two bins survive.
pub fn chi_square_poisson(counts: &[u64], mean: f64) -> Option<ChiSquare> {
    if counts.is_empty() {
        return None;
    }
    let r = counts.len() as f64;
    let max = *counts.iter().max().unwrap();
    let mut bins: Vec<(f64, f64)> = (0..=max)
        .map(|k| {
            let obs = counts.iter().filter(|&&c| c == k).count() as f64;
            (obs, r * poisson_pmf(mean, k))
        })
        .collect();
    bins.push((0.0, r * (1.0 - poisson_cdf(mean, max)).max(0.0)));
    merge_small_bins(&mut bins);
    if bins.len() < 2 {
        return None;
    }
    let statistic = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = bins.len() as u64 - 1;
    Some(ChiSquare {
        statistic,
        dof,
        p_value: chi_square_pvalue(statistic, dof),
    })
}

/// Asymptotic Kolmogorov p-value with Stephens' small-sample correction.
pub fn kolmogorov_pvalue(n: usize, d: f64) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Kolmogorov-Smirnov distance of the sample to Exp(1) and its p-value.
pub fn ks_exponential(samples: &[f64]) -> (f64, f64) {
    if samples.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d = 0.0f64;
    for (i, &v) in x.iter().enumerate() {
        let f = if v <= 0.0 { 0.0 } else { -(-v).exp_m1() };
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    (d, kolmogorov_pvalue(x.len(), d))
}

/// Pearson correlation; `None` when either sample is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    if n < 2 || b.len() != n {
        return None;
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Merges categories of one margin; `groups[i]` lists the raw values
/// pooled into category `i`.
fn merge_category(groups: &mut Vec<Vec<u64>>, totals: &mut Vec<f64>) {
    let (i, _) = totals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let j = if i == 0 {
        1
    } else if i == totals.len() - 1 || totals[i - 1] <= totals[i + 1] {
        i - 1
    } else {
        i + 1
    };
    let (lo, hi) = (i.min(j), i.max(j));
    let g = groups.remove(hi);
    groups[lo].extend(g);
    let t = totals.remove(hi);
    totals[lo] += t;
}

/// Chi-square test of independence on the joint table of two count
/// vectors. Categories are merged until every expected cell is at least 5;
/// `None` when a margin collapses to a single category.
pub fn chi_square_independence(a: &[u64], b: &[u64]) -> Option<ChiSquare> {
    let r = a.len();
    if r == 0 || b.len() != r {
        return None;
    }
    let categories = |v: &[u64]| -> (Vec<Vec<u64>>, Vec<f64>) {
        let mut vals: Vec<u64> = v.to_vec();
        vals.sort_unstable();
        vals.dedup();
        let totals = vals
            .iter()
            .map(|&x| v.iter().filter(|&&y| y == x).count() as f64)
            .collect();
        (vals.into_iter().map(|x| vec![x]).collect(), totals)
    };
    let (mut ga, mut ta) = categories(a);
    let (mut gb, mut tb) = categories(b);
    let rf = r as f64;
    loop {
        if ga.len() < 2 || gb.len() < 2 {
            return None;
        }
        let min_a = ta.iter().cloned().fold(f64::INFINITY, f64::min);
        let min_b = tb.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_a * min_b / rf >= MIN_EXPECTED {
            break;
        }
        if min_a <= min_b {
            merge_category(&mut ga, &mut ta);
        } else {
            merge_category(&mut gb, &mut tb);
        }
    }
    let index = |groups: &[Vec<u64>], x: u64| groups.iter().position(|g| g.contains(&x)).unwrap();
    let mut table = vec![vec![0.0; gb.len()]; ga.len()];
    for (&x, &y) in a.iter().zip(b) {
        table[index(&ga, x)][index(&gb, y)] += 1.0;
    }
    let mut statistic = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &obs) in row.iter().enumerate() {
            let e = ta[i] * tb[j] / rf;
            statistic += (obs - e).powi(2) / e;
        }
    }
    let dof = ((ga.len() - 1) * (gb.len() - 1)) as u64;
    Some(ChiSquare {
        statistic,
        dof,
        p_value: chi_square_pvalue(statistic, dof),
    })
}

fn window_label(i: usize) -> String {
    format!("window_{i}")
}

/// Compares an ensemble of unfolded level sets with the Poisson process of
/// unit intensity: per-window count laws (TV distance and chi-square) and
/// the law of nearest-neighbour spacings of points in `spacing_window`
/// (Kolmogorov-Smirnov against Exp(1)).
pub fn poisson_gof(
    samples: &[PointProcessSample],
    windows: &[Interval],
    spacing_window: Interval,
) -> Result<EstimatorReport> {
    let first = samples
        .first()
        .ok_or_else(|| Error::invalid("no samples"))?;
    if samples.iter().any(|s| {
        s.reference_energy != first.reference_energy
            || s.nu_at_e != first.nu_at_e
            || s.volume != first.volume
    }) {
        return Err(Error::invalid(
            "samples must share the reference energy and density",
        ));
    }
    if windows.is_empty() {
        return Err(Error::invalid("at least one counting window is required"));
    }
    for (i, w) in windows.iter().enumerate() {
        w.check_finite("counting window")?;
        if w.is_empty() {
            return Err(Error::invalid(format!("window {i} is empty")));
        }
        if let Some(j) = windows[..i].iter().position(|v| v.overlaps(w)) {
            return Err(Error::invalid(format!("windows {j} and {i} overlap")));
        }
    }
    spacing_window.check_finite("spacing window")?;

    let r = samples.len() as u64;
    let mut rep = EstimatorReport::new("poisson", r);
    rep.param("E", first.reference_energy)
        .param("nu_at_E", first.nu_at_e)
        .param("volume", first.volume)
        .param("windows", windows)
        .param("spacing_window", spacing_window);

    for (i, w) in windows.iter().enumerate() {
        let label = window_label(i);
        let counts: Vec<u64> = samples.iter().map(|s| s.count_in(*w) as u64).collect();
        let as_f: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let (m, se) = mean_and_se(&as_f);
        let mean = w.length();
        rep.estimate(&format!("{label}_mean_count"), m, se);
        rep.statistic(
            &format!("{label}_tv_distance"),
            Some(tv_to_poisson(&counts, mean)),
            r,
            None,
            None,
        );
        match chi_square_poisson(&counts, mean) {
            Some(c) => rep.statistic(
                &format!("{label}_chi_square"),
                Some(c.statistic),
                r,
                Some(c.p_value),
                Some(c.dof),
            ),
            None => rep
                .statistic(&format!("{label}_chi_square"), None, r, None, None)
                .flag("chi-square-undefined"),
        };
        rep.count(&format!("{label}_total_count"), counts.iter().sum());
    }

    let mut spacings = Vec::new();
    for s in samples {
        let p = &s.points;
        let start = p.partition_point(|&x| x < spacing_window.lo);
        for n in start..p.len().saturating_sub(1) {
            if p[n] > spacing_window.hi {
                break;
            }
            spacings.push(p[n + 1] - p[n]);
        }
    }
    let (d, pv) = ks_exponential(&spacings);
    rep.statistic(
        "spacing_ks_distance",
        Some(d),
        spacings.len() as u64,
        Some(pv),
        None,
    );
    let (ms, ses) = mean_and_se(&spacings);
    rep.estimate("mean_spacing", ms, ses);
    rep.count("spacings", spacings.len() as u64);
    if r < LOW_POWER_REALIZATIONS {
        rep.flag("low-power");
    }
    Ok(rep)
}

fn probe_label(t: f64, tp: f64) -> String {
    format!("laplace_gap_{t:?}_{tp:?}")
}

/// Dependence diagnostics for paired counts `a[r]`, `b[r]` from the same
/// realization `r`.
pub fn independence_from_counts(
    a: &[u64],
    b: &[u64],
    probes: &[(f64, f64)],
) -> Result<EstimatorReport> {
    if a.len() != b.len() {
        return Err(Error::invalid("paired count vectors differ in length"));
    }
    if a.is_empty() {
        return Err(Error::invalid("no realizations"));
    }
    let r = a.len() as u64;
    let fa: Vec<f64> = a.iter().map(|&x| x as f64).collect();
    let fb: Vec<f64> = b.iter().map(|&x| x as f64).collect();
    let mut rep = EstimatorReport::new("independence", r);

    let corr = pearson(&fa, &fb);
    if corr.is_none() {
        rep.flag("degenerate-counts");
    }
    rep.statistic("pearson_correlation", corr, r, None, None);
    match chi_square_independence(a, b) {
        Some(c) => rep.statistic(
            "chi_square_independence",
            Some(c.statistic),
            r,
            Some(c.p_value),
            Some(c.dof),
        ),
        None => rep
            .statistic("chi_square_independence", None, r, None, None)
            .flag("chi-square-undefined"),
    };

    let mut worst = 0.0f64;
    for &(t, tp) in probes {
        let x: Vec<f64> = fa.iter().map(|&n| (-t * n).exp()).collect();
        let y: Vec<f64> = fb.iter().map(|&n| (-tp * n).exp()).collect();
        let mx = x.iter().sum::<f64>() / r as f64;
        let my = y.iter().sum::<f64>() / r as f64;
        let joint = x.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>() / r as f64;
        let gap = joint - mx * my;
        let influence: Vec<f64> = x.iter().zip(&y).map(|(p, q)| (p - mx) * (q - my)).collect();
        let (_, se) = mean_and_se(&influence);
        rep.estimate(&probe_label(t, tp), gap, se);
        worst = worst.max(gap.abs());
    }
    rep.statistic("max_abs_laplace_gap", Some(worst), r, None, None);
    if r < LOW_POWER_INDEPENDENCE {
        rep.flag("low-power");
    }
    Ok(rep)
}

/// Independence of window counts at two reference energies, with both
/// sample sets drawn from the same realizations.
pub fn independence_test(
    at_e: &[PointProcessSample],
    at_e_prime: &[PointProcessSample],
    u: Interval,
    u_prime: Interval,
    probes: &[(f64, f64)],
) -> Result<EstimatorReport> {
    if at_e.len() != at_e_prime.len() {
        return Err(Error::invalid("sample sets differ in size"));
    }
    for (s, t) in at_e.iter().zip(at_e_prime) {
        if s.meta != t.meta {
            return Err(Error::invalid(format!(
                "realization {} paired with realization {}",
                s.meta.realization_index, t.meta.realization_index
            )));
        }
    }
    u.check_finite("window U")?;
    u_prime.check_finite("window U'")?;
    let a: Vec<u64> = at_e.iter().map(|s| s.count_in(u) as u64).collect();
    let b: Vec<u64> = at_e_prime
        .iter()
        .map(|s| s.count_in(u_prime) as u64)
        .collect();
    let mut rep = independence_from_counts(&a, &b, probes)?;
    rep.param("U", u).param("U_prime", u_prime);
    if let (Some(s), Some(t)) = (at_e.first(), at_e_prime.first()) {
        rep.param("E", s.reference_energy)
            .param("E_prime", t.reference_energy)
            .param("nu_at_E", s.nu_at_e)
            .param("nu_at_E_prime", t.nu_at_e);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xoshiro256StarStar;

    fn poisson_counts(mean: f64, r: usize, seed: u64) -> Vec<u64> {
        let mut rng = Xoshiro256StarStar::from_seed(seed);
        (0..r).map(|_| rng.next_poisson(mean)).collect()
    }

    #[test]
    fn pmf_matches_closed_form() {
        for k in 0..10u64 {
            let exact =
                (-2.0f64).exp() * 2f64.powi(k as i32) / (1..=k).map(|x| x as f64).product::<f64>();
            assert!((poisson_pmf(2.0, k) - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn tv_of_exact_law_is_small() {
        let c = poisson_counts(1.0, 10_000, 1);
        assert!(tv_to_poisson(&c, 1.0) < 0.02);
        assert!(tv_to_poisson(&c, 3.0) > 0.3);
    }

    #[test]
    fn tv_of_point_mass() {
        // All counts zero: TV = 1 - e^{-1}.
        let tv = tv_to_poisson(&[0; 50], 1.0);
        assert!((tv - (1.0 - (-1.0f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn chi_square_accepts_poisson_and_rejects_shift() {
        let c = poisson_counts(2.0, 5000, 2);
        let good = chi_square_poisson(&c, 2.0).unwrap();
        assert!(good.p_value > 1e-3, "{good:?}");
        let bad = chi_square_poisson(&c, 2.5).unwrap();
        assert!(bad.p_value < 1e-6);
    }

    #[test]
    fn merged_bins_meet_expected_floor() {
        let mut bins = vec![
            (1.0, 1.0),
            (2.0, 2.0),
            (3.0, 3.0),
            (4.0, 4.0),
            (6.0, 6.0),
            (0.0, 0.5),
        ];
        merge_small_bins(&mut bins);
        assert!(bins.iter().all(|b| b.1 >= 5.0));
        let total: f64 = bins.iter().map(|b| b.1).sum();
        assert_eq!(total, 16.5);
    }

    #[test]
    fn ks_exponential_detects_scale() {
        let mut rng = Xoshiro256StarStar::from_seed(3);
        let x: Vec<f64> = (0..5000).map(|_| rng.next_exp()).collect();
        let (d, p) = ks_exponential(&x);
        assert!(d < 1.36 / (5000f64).sqrt() * 1.5 && p > 1e-3);
        let y: Vec<f64> = x.iter().map(|v| v * 1.2).collect();
        assert!(ks_exponential(&y).1 < 1e-6);
    }

    #[test]
    fn kolmogorov_pvalue_reference_points() {
        // Q(1.36) ≈ 0.049, Q(1.63) ≈ 0.010 (asymptotic, large n).
        assert!((kolmogorov_pvalue(1_000_000, 1.36 / 1000.0) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_pvalue(1_000_000, 1.63 / 1000.0) - 0.0098).abs() < 1e-3);
    }

    #[test]
    fn pearson_edge_cases() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]), Some(1.0));
        assert_eq!(pearson(&[1.0, 1.0], &[2.0, 3.0]), None);
    }

    #[test]
    fn independent_streams_pass() {
        let r = 2000;
        let a = poisson_counts(2.0, r, 10);
        let b = poisson_counts(2.0, r, 11);
        let rep = independence_from_counts(&a, &b, &DEFAULT_PROBES).unwrap();
        let corr = rep
            .get_statistic("pearson_correlation")
            .unwrap()
            .value
            .unwrap();
        assert!(corr.abs() < 3.0 / (r as f64).sqrt());
        let chi = rep.get_statistic("chi_square_independence").unwrap();
        assert!(chi.p_value.unwrap() > 1e-3);
    }

    #[test]
    fn dependent_streams_fail() {
        let a = poisson_counts(2.0, 1000, 10);
        let rep = independence_from_counts(&a, &a, &DEFAULT_PROBES).unwrap();
        assert!(
            rep.get_statistic("pearson_correlation")
                .unwrap()
                .value
                .unwrap()
                > 0.99
        );
        assert!(
            rep.get_statistic("chi_square_independence")
                .unwrap()
                .p_value
                .unwrap()
                < 1e-6
        );
    }

    #[test]
    fn zero_probe_gap_vanishes_and_constant_counts_flagged() {
        let a = poisson_counts(1.0, 400, 4);
        let b = poisson_counts(1.0, 400, 5);
        let rep = independence_from_counts(&a, &b, &[(0.0, 0.0)]).unwrap();
        assert_eq!(
            rep.get_estimate(&probe_label(0.0, 0.0)).unwrap().value,
            Some(0.0)
        );
        let rep = independence_from_counts(&[3; 10], &b[..10], &[]).unwrap();
        assert!(rep.has_flag("degenerate-counts"));
        assert!(rep.has_flag("low-power"));
    }
}
