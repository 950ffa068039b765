//! One runner per experiment. Each returns a JSON result block, named
//! pass/fail checks and a table of per-realization rows.

use anderson_core::eigen::{
    self, dirichlet_matrix, dirichlet_min_gap, dirichlet_spectrum, eigh, SpectrumMeta,
};
use anderson_core::ensemble::{map_spectra, realization_spectrum, Parallelism};
use anderson_core::localization::{
    box_matching, localization_centers, median, quantile_indices, BoxMatchingSetup,
};
use anderson_core::model::{sample_potential, DisorderSpec, Hamiltonian, LatticeCube};
use anderson_core::perturbation::{
    eigen_gradient, eigen_hessian, gradient_separation_check, hessian_pairing_bound,
    minor_lower_bound,
};
use anderson_core::rng::Xoshiro256StarStar;
use anderson_core::stats::{
    decorrelation_from_hits, estimate_dos, independence_test, independent_seed, minami_from_counts,
    poisson_gof, rescale_levels, wegner_from_counts, window_counts, DecorrelationSetup,
    EstimatorReport, Interval, PointProcessSample, WindowHits,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::*;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] anderson_core::Error),
    #[error("hypothesis not met: {0}")]
    Hypothesis(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type RunResult<T> = std::result::Result<T, RunError>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub results: Value,
    pub checks: Vec<Check>,
    pub table: Table,
}

/// Shortest decimal that round-trips to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_coords(c: &[i64]) -> String {
    c.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn value_of(e: Option<&anderson_core::stats::Estimate>) -> (f64, f64) {
    e.map_or((f64::NAN, f64::NAN), |e| {
        (e.value.unwrap_or(f64::NAN), e.std_error.unwrap_or(f64::NAN))
    })
}

pub fn execute(config: &ExperimentConfig, workers: usize) -> RunResult<Outcome> {
    let par = Parallelism::new(workers);
    match config {
        ExperimentConfig::Dos(c) => run_dos(c, par),
        ExperimentConfig::Wegner(c) => run_wegner(c, par),
        ExperimentConfig::Minami(c) => run_minami(c, par),
        ExperimentConfig::Decorrelation(c) => run_decorrelation(c, par),
        ExperimentConfig::Poisson(c) => run_poisson(c, par),
        ExperimentConfig::Independence(c) => run_independence(c, par),
        ExperimentConfig::Localization(c) => run_localization(c, par),
        ExperimentConfig::PerturbationChecks(c) => run_perturbation(c, par),
        ExperimentConfig::DirichletOracle(c) => run_dirichlet(c),
        ExperimentConfig::BoxMatching(c) => run_box_matching(c, par),
    }
}

/// Uniform grid over `[a - 2d, b + 2d]` with spacing close to `step`.
pub fn hull_grid(spec: &DisorderSpec, dim: usize, step: f64) -> Vec<f64> {
    let (lo, hi) = spec.spectrum_hull(dim);
    let n = ((hi - lo) / step).round().max(1.0) as usize;
    (0..=n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .collect()
}

fn run_dos(c: &DosConfig, par: Parallelism) -> RunResult<Outcome> {
    let spec = c.disorder.spec(c.seed);
    let grid = c
        .grid
        .clone()
        .unwrap_or_else(|| hull_grid(&spec, c.d, c.grid_step));
    let dos = estimate_dos(c.d, c.l, &spec, c.realizations, &grid, c.bandwidth, par)?;
    let mass = dos.total_mass();
    let mut checks = vec![
        Check::new(
            "ids_nondecreasing",
            dos.n_hat.windows(2).all(|w| w[0] <= w[1]),
            "N_hat is nondecreasing along the grid",
        ),
        Check::new(
            "density_nonnegative",
            dos.nu_hat.iter().all(|&x| x >= 0.0),
            "nu_hat >= 0",
        ),
    ];
    if c.grid.is_none() {
        checks.push(Check::new(
            "total_mass",
            (mass - 1.0).abs() <= c.mass_tolerance,
            format!("trapezoid mass {mass:?} vs 1 +- {}", c.mass_tolerance),
        ));
        checks.push(Check::new(
            "ids_reaches_one",
            dos.n_hat.last() == Some(&1.0),
            "N_hat = 1 at the top of the spectrum hull",
        ));
    }
    let mut table = Table::new(&["energy", "nu_hat", "nu_std_error", "n_hat"]);
    for i in 0..dos.grid.len() {
        table.rows.push(vec![
            fmt_f64(dos.grid[i]),
            fmt_f64(dos.nu_hat[i]),
            fmt_f64(dos.nu_std_error[i]),
            fmt_f64(dos.n_hat[i]),
        ]);
    }
    let results = json!({
        "total_mass": mass,
        "realizations": dos.realizations_used,
        "n_sites": dos.n_sites,
        "bandwidth": dos.bandwidth,
        "flags": dos.flags,
        "nu_max": dos.nu_hat.iter().cloned().fold(0.0, f64::max),
    });
    Ok(Outcome {
        results,
        checks,
        table,
    })
}

fn column(rows: &[Vec<u32>], i: usize) -> Vec<u32> {
    rows.iter().map(|r| r[i]).collect()
}

/// Relative spread `(max - min) / min` of a set of positive values.
pub fn relative_spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    (max - min) / min
}

fn run_wegner(c: &WegnerConfig, par: Parallelism) -> RunResult<Outcome> {
    let spec = c.disorder.spec(c.seed);
    let ls = c.l.to_vec();
    let js = c.j.to_vec();
    let bound = spec.density_sup();
    let mut header = vec!["L".to_string(), "realization_index".to_string()];
    header.extend((0..js.len()).map(|i| format!("count_J{i}")));
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    let mut reports = Vec::new();
    let mut ratios = vec![Vec::new(); js.len()];
    for &l in &ls {
        let n_sites = LatticeCube::new(c.d, l)?.n_sites();
        let rows = window_counts(c.d, l, &spec, &js, c.realizations, par)?;
        for (r, row) in rows.iter().enumerate() {
            let mut cells = vec![l.to_string(), r.to_string()];
            cells.extend(row.iter().map(|x| x.to_string()));
            table.rows.push(cells);
        }
        for (i, j) in js.iter().enumerate() {
            let mut rep = wegner_from_counts(&column(&rows, i), *j, n_sites);
            rep.param("L", l).param("d", c.d).param("seed", c.seed);
            ratios[i].push(value_of(rep.get_ratio("count_per_length_volume")).0);
            reports.push(rep);
        }
    }
    let worst = ratios.iter().flatten().cloned().fold(0.0, f64::max);
    let mut checks = vec![Check::new(
        "ratio_bounded",
        worst <= bound,
        format!("max ratio {worst:?} vs sup g = {bound}"),
    )];
    if ls.len() > 1 {
        let spread = ratios
            .iter()
            .map(|r| relative_spread(r))
            .fold(0.0, f64::max);
        checks.push(Check::new(
            "ratio_stable_across_L",
            spread <= c.stability_tolerance,
            format!(
                "largest relative spread {spread:?} vs {}",
                c.stability_tolerance
            ),
        ));
    }
    Ok(Outcome {
        results: json!({ "density_sup": bound, "reports": reports }),
        checks,
        table,
    })
}

fn run_minami(c: &MinamiConfig, par: Parallelism) -> RunResult<Outcome> {
    let spec = c.disorder.spec(c.seed);
    let ls = c.l.to_vec();
    let js = c.j.to_vec();
    let ks = c.k.as_ref().map_or_else(|| js.clone(), |k| k.to_vec());
    let bound = spec.density_sup().powi(2);
    let (lo, hi) = spec.spectrum_hull(c.d);
    let hull = Interval::new(lo, hi);
    let nj = js.len();
    let mut header = vec!["L".to_string(), "realization_index".to_string()];
    header.extend((0..nj).map(|i| format!("count_J{i}")));
    header.extend((0..nj).map(|i| format!("count_K{i}")));
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    let mut windows = js.clone();
    windows.extend(ks.iter().cloned());
    let mut reports = Vec::new();
    let mut ratios = vec![Vec::new(); nj];
    let mut identity_holds = true;
    for &l in &ls {
        let n_sites = LatticeCube::new(c.d, l)?.n_sites();
        let rows = window_counts(c.d, l, &spec, &windows, c.realizations, par)?;
        for (r, row) in rows.iter().enumerate() {
            let mut cells = vec![l.to_string(), r.to_string()];
            cells.extend(row.iter().map(|x| x.to_string()));
            table.rows.push(cells);
        }
        for i in 0..nj {
            let cj = column(&rows, i);
            let ck = column(&rows, nj + i);
            let mut rep = minami_from_counts(&cj, &ck, js[i], ks[i], n_sites)?;
            rep.param("L", l).param("d", c.d).param("seed", c.seed);
            ratios[i].push(value_of(rep.get_ratio("moment_per_length_length_volume_sq")).0);
            reports.push(rep);
            let full = vec![n_sites as u32; cj.len()];
            let m = minami_from_counts(&cj, &full, js[i], hull, n_sites)?;
            let w = wegner_from_counts(&cj, js[i], n_sites);
            identity_holds &= m.get_count("sum_second_factorial")
                == w.get_count("total_count").map(|t| t * (n_sites as u64 - 1));
        }
    }
    let worst = ratios.iter().flatten().cloned().fold(0.0, f64::max);
    let mut checks = vec![
        Check::new(
            "ratio_bounded",
            worst <= bound,
            format!("max ratio {worst:?} vs (sup g)^2 = {bound}"),
        ),
        Check::new(
            "full_window_identity",
            identity_holds,
            "sum of tr1_J (N - 1) equals (N - 1) sum of tr1_J in every cell",
        ),
    ];
    if ls.len() > 1 {
        let factor = ratios
            .iter()
            .map(|r| {
                let max = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let min = r.iter().cloned().fold(f64::INFINITY, f64::min);
                max / min
            })
            .fold(1.0, f64::max);
        checks.push(Check::new(
            "ratio_stable_across_L",
            factor <= c.stability_factor,
            format!(
                "largest max/min factor {factor:?} vs {}",
                c.stability_factor
            ),
        ));
    }
    Ok(Outcome {
        results: json!({ "density_sup_squared": bound, "reports": reports }),
        checks,
        table,
    })
}

/// Monotone decrease of `values` within `k` combined standard errors.
pub fn decreasing_within(values: &[(f64, f64)], k: f64) -> bool {
    values
        .windows(2)
        .all(|w| w[1].0 <= w[0].0 + k * (w[0].1.powi(2) + w[1].1.powi(2)).sqrt())
}

pub fn decorrelation_at(
    setup: &DecorrelationSetup,
    spec: &DisorderSpec,
    realizations: u64,
    par: Parallelism,
) -> RunResult<(EstimatorReport, Vec<Vec<u32>>)> {
    setup.validate()?;
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
    Ok((rep, rows))
}

fn run_decorrelation(c: &DecorrelationConfig, par: Parallelism) -> RunResult<Outcome> {
    let spec = c.disorder.spec(c.seed);
    let mut ls = c.l.to_vec();
    ls.sort_unstable();
    let mut table = Table::new(&["L", "ell", "realization_index", "count_e", "count_e_prime"]);
    let mut reports = Vec::new();
    let mut trend = Vec::new();
    for &l in &ls {
        let setup = DecorrelationSetup {
            dim: c.d,
            big_half_side: l,
            alpha: c.alpha,
            e: c.e.unwrap_or_default(),
            e_prime: c.e_prime.unwrap_or_default(),
        };
        let (rep, rows) = decorrelation_at(&setup, &spec, c.realizations, par)?;
        for (r, row) in rows.iter().enumerate() {
            table.rows.push(vec![
                l.to_string(),
                setup.ell().to_string(),
                r.to_string(),
                row[0].to_string(),
                row[1].to_string(),
            ]);
        }
        trend.push(value_of(rep.get_ratio("p_both_over_scale_d")));
        reports.push(rep);
    }
    let mut checks = Vec::new();
    if ls.len() > 1 {
        checks.push(Check::new(
            "decreasing_in_L",
            decreasing_within(&trend, 2.0),
            format!("P_both/(ell/L)^d by L: {trend:?}"),
        ));
    }
    Ok(Outcome {
        results: json!({ "reports": reports }),
        checks,
        table,
    })
}

/// Density of states at each reference energy, estimated on an ensemble
/// independent of the one under test; refuses energies where it is below
/// `min_density`.
#[allow(clippy::too_many_arguments)]
pub fn reference_densities(
    dim: usize,
    half_side: usize,
    spec: &DisorderSpec,
    energies: &[f64],
    dos_realizations: u64,
    bandwidth: f64,
    min_density: f64,
    par: Parallelism,
) -> RunResult<Vec<(f64, f64)>> {
    let dos_spec = spec.with_seed(independent_seed(spec.base_seed));
    let mut grid = energies.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let dos = estimate_dos(
        dim,
        half_side,
        &dos_spec,
        dos_realizations,
        &grid,
        bandwidth,
        par,
    )?;
    energies
        .iter()
        .map(|&e| {
            let (nu, se) = dos.at(e)?;
            if !(nu >= min_density) {
                return Err(RunError::Hypothesis(format!(
                    "estimated density of states at E = {e} is {nu}, below {min_density}; \
                     Poisson statistics require nu(E) > 0"
                )));
            }
            Ok((nu, se))
        })
        .collect()
}

/// Unfolded level sets of realizations `0..R` at each reference energy.
pub fn unfolded_ensemble(
    dim: usize,
    half_side: usize,
    spec: &DisorderSpec,
    energies: &[(f64, f64)],
    realizations: u64,
    par: Parallelism,
) -> RunResult<Vec<Vec<PointProcessSample>>> {
    let cube = LatticeCube::new(dim, half_side)?;
    let per_realization = map_spectra(&cube, spec, realizations, par, |s| {
        energies
            .iter()
            .map(|&(e, nu)| rescale_levels(s, e, nu))
            .collect::<anderson_core::Result<Vec<_>>>()
    })?;
    let mut out = vec![Vec::with_capacity(per_realization.len()); energies.len()];
    for row in per_realization {
        for (slot, p) in out.iter_mut().zip(row?) {
            slot.push(p);
        }
    }
    Ok(out)
}

fn run_poisson(c: &PoissonConfig, par: Parallelism) -> RunResult<Outcome> {
    let spec = c.disorder.spec(c.seed);
    let e = c.e.unwrap_or_default();
    let (nu, nu_se) = reference_densities(
        c.d,
        c.l,
        &spec,
        &[e],
        c.dos_realizations,
        c.bandwidth,
        c.min_density,
        par,
    )?[0];
    let samples = unfolded_ensemble(c.d, c.l, &spec, &[(e, nu)], c.realizations, par)?.remove(0);
    let rep = poisson_gof(&samples, &c.windows, c.spacing_window)?;

    let mut header = vec!["realization_index".to_string()];
    header.extend((0..c.windows.len()).map(|i| format!("count_window_{i}")));
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    for s in &samples {
        let mut cells = vec![s.meta.realization_index.to_string()];
        cells.extend(c.windows.iter().map(|w| s.count_in(*w).to_string()));
        table.rows.push(cells);
    }
    let mut checks = Vec::new();
    for i in 0..c.windows.len() {
        let tv = rep
            .get_statistic(&format!("window_{i}_tv_distance"))
            .and_then(|s| s.value)
            .unwrap_or(f64::NAN);
        checks.push(Check::new(
            &format!("window_{i}_tv_distance"),
            tv < c.tv_threshold,
            format!("TV {tv:?} vs {}", c.tv_threshold),
        ));
    }
    let ks = rep
        .get_statistic("spacing_ks_distance")
        .and_then(|s| s.value)
        .unwrap_or(f64::NAN);
    checks.push(Check::new(
        "spacing_ks_distance",
        ks < c.ks_threshold,
        format!("KS {ks:?} vs {}", c.ks_threshold),
    ));
    Ok(Outcome {
        results: json!({ "nu_at_E": nu, "nu_std_error": nu_se, "report": rep }),
        checks,
        table,
    })
}

fn run_independence(c: &IndependenceConfig, par: Parallelism) -> RunResult<Outcome> {
    let spec = c.disorder.spec(c.seed);
    let (e, ep) = (c.e.unwrap_or_default(), c.e_prime.unwrap_or_default());
    let nus = reference_densities(
        c.d,
        c.l,
        &spec,
        &[e, ep],
        c.dos_realizations,
        c.bandwidth,
        c.min_density,
        par,
    )?;
    let mut sets = unfolded_ensemble(
        c.d,
        c.l,
        &spec,
        &[(e, nus[0].0), (ep, nus[1].0)],
        c.realizations,
        par,
    )?;
    let at_ep = sets.pop().unwrap_or_default();
    let at_e = sets.pop().unwrap_or_default();
    let rep = independence_test(&at_e, &at_ep, c.u, c.u_prime, &c.probes)?;

    let mut table = Table::new(&["realization_index", "count_u", "count_u_prime"]);
    for (a, b) in at_e.iter().zip(&at_ep) {
        table.rows.push(vec![
            a.meta.realization_index.to_string(),
            a.count_in(c.u).to_string(),
            b.count_in(c.u_prime).to_string(),
        ]);
    }
    let corr = rep
        .get_statistic("pearson_correlation")
        .and_then(|s| s.value);
    let gap = rep
        .get_statistic("max_abs_laplace_gap")
        .and_then(|s| s.value)
        .unwrap_or(f64::NAN);
    let checks = vec![
        Check::new(
            "pearson_correlation",
            corr.is_some_and(|r| r.abs() < c.correlation_threshold),
            format!(
                "|r| = {:?} vs {}",
                corr.map(f64::abs),
                c.correlation_threshold
            ),
        ),
        Check::new(
            "laplace_gap",
            gap < c.laplace_threshold,
            format!("max |gap| {gap:?} vs {}", c.laplace_threshold),
        ),
    ];
    Ok(Outcome {
        results: json!({
            "nu_at_E": nus[0].0,
            "nu_at_E_prime": nus[1].0,
            "report": rep,
        }),
        checks,
        table,
    })
}

fn run_localization(c: &LocalizationConfig, par: Parallelism) -> RunResult<Outcome> {
    let spec = c.disorder.spec(c.seed);
    let cube = LatticeCube::new(c.d, c.l)?;
    let per = par.map(0..c.realizations, |r| {
        let s = realization_spectrum(&cube, &spec, r, true)?;
        let recs = localization_centers(&s)?;
        let window = match c.energy_window {
            Some(w) => {
                let lo = s.eigenvalues.partition_point(|&x| x < w.lo);
                let hi = s.eigenvalues.partition_point(|&x| x <= w.hi);
                lo..hi.max(lo)
            }
            None => quantile_indices(s.len(), c.quantile_window.lo, c.quantile_window.hi),
        };
        Ok((recs, window))
    })?;
    let mut table = Table::new(&[
        "realization_index",
        "index",
        "energy",
        "center",
        "decay_rate",
        "prefactor_exponent",
        "max_violation",
        "sites_fitted",
        "cutoff_limited",
        "in_window",
    ]);
    let mut medians = Vec::new();
    let mut per_json = Vec::new();
    for (r, (recs, window)) in per.iter().enumerate() {
        let rates: Vec<f64> = recs[window.clone()].iter().map(|x| x.decay_rate).collect();
        let m = median(&rates).unwrap_or(f64::NAN);
        medians.push(m);
        per_json.push(json!({
            "realization_index": r,
            "levels_in_window": rates.len(),
            "median_decay_rate": m,
            "cutoff_limited": recs[window.clone()].iter().filter(|x| x.cutoff_limited).count(),
        }));
        for x in recs {
            table.rows.push(vec![
                r.to_string(),
                x.index.to_string(),
                fmt_f64(x.energy),
                fmt_coords(&x.center),
                fmt_f64(x.decay_rate),
                x.prefactor_exponent.map(fmt_f64).unwrap_or_default(),
                fmt_f64(x.max_violation),
                x.sites_fitted.to_string(),
                x.cutoff_limited.to_string(),
                window.contains(&x.index).to_string(),
            ]);
        }
    }
    let mut checks = vec![Check::new(
        "median_decay_rate_positive",
        medians.iter().all(|&m| m > c.min_decay_rate),
        format!("medians {medians:?} vs {}", c.min_decay_rate),
    )];
    if medians.len() > 1 {
        let spread = relative_spread(&medians);
        checks.push(Check::new(
            "median_stable_across_realizations",
            spread <= c.stability_tolerance,
            format!("relative spread {spread:?} vs {}", c.stability_tolerance),
        ));
    }
    Ok(Outcome {
        results: json!({ "realizations": per_json }),
        checks,
        table,
    })
}

/// `E_n` after shifting the potential at `site` by `delta`.
fn shifted_eigenvalue(
    h: &Hamiltonian,
    meta: SpectrumMeta,
    site: usize,
    delta: f64,
    n: usize,
) -> RunResult<f64> {
    let mut h = h.clone();
    let v = h.diagonal()[site];
    h.set_site(site, v + delta);
    Ok(eigen::eigenvalues(&h, meta)?.eigenvalues[n])
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GradientSurvey {
    pub realizations: u64,
    pub simple_levels: u64,
    pub skipped_levels: u64,
    pub max_l1_defect: f64,
    pub min_component: f64,
}

/// Gradient sign and normalization over every simple level of realizations
/// `0..R`.
pub fn gradient_survey(
    cube: &LatticeCube,
    spec: &DisorderSpec,
    realizations: u64,
    par: Parallelism,
) -> RunResult<(GradientSurvey, Vec<GradientSurvey>)> {
    let per = par.map(0..realizations, |r| {
        let s = realization_spectrum(cube, spec, r, true)?;
        let mut g = GradientSurvey {
            realizations: 1,
            min_component: f64::INFINITY,
            ..Default::default()
        };
        for n in 0..s.len() {
            match eigen_gradient(&s, n) {
                Ok(rec) => {
                    g.simple_levels += 1;
                    g.max_l1_defect = g
                        .max_l1_defect
                        .max((rec.gradient.iter().sum::<f64>() - 1.0).abs());
                    g.min_component = rec.gradient.iter().cloned().fold(g.min_component, f64::min);
                }
                Err(anderson_core::Error::Degenerate { .. }) => g.skipped_levels += 1,
                Err(e) => return Err(e.in_realization(spec.base_seed, r)),
            }
        }
        Ok(g)
    })?;
    let mut total = GradientSurvey {
        min_component: f64::INFINITY,
        ..Default::default()
    };
    for g in &per {
        total.realizations += 1;
        total.simple_levels += g.simple_levels;
        total.skipped_levels += g.skipped_levels;
        total.max_l1_defect = total.max_l1_defect.max(g.max_l1_defect);
        total.min_component = total.min_component.min(g.min_component);
    }
    Ok((total, per))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteDifferenceSample {
    pub realization_index: u64,
    pub level: usize,
    pub site: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

/// Draws `count` random `(realization, level, site)` triples with a gap of
/// at least `min_gap` and `φ_n(γ)^2 >= min_weight`, and compares the
/// analytic first (`order = 1`) or diagonal second (`order = 2`) derivative
/// with central differences of step `step`.
#[allow(clippy::too_many_arguments)]
pub fn finite_difference_samples(
    cube: &LatticeCube,
    spec: &DisorderSpec,
    realizations: u64,
    count: usize,
    order: u8,
    step: f64,
    min_gap: f64,
    min_weight: f64,
) -> RunResult<Vec<FiniteDifferenceSample>> {
    let mut rng = Xoshiro256StarStar::for_stream(spec.base_seed, &[0x4644, order as u64]);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 1000 * count.max(1) {
            return Err(RunError::Hypothesis(format!(
                "found only {} of {count} well-separated (level, site) pairs",
                out.len()
            )));
        }
        let r = rng.next_below(realizations);
        let pot = sample_potential(cube, spec, r)?;
        let h = Hamiltonian::assemble(cube, &pot)?;
        let meta = SpectrumMeta::of(&pot);
        let s = eigen::eig_all(&h, meta)?;
        let n = rng.next_below(s.len() as u64) as usize;
        let site = rng.next_below(s.len() as u64) as usize;
        if s.gap_to_rest(n) < min_gap {
            continue;
        }
        let phi = s.vector(n)?;
        if phi[site] * phi[site] < min_weight {
            continue;
        }
        let plus = shifted_eigenvalue(&h, meta, site, step, n)?;
        let minus = shifted_eigenvalue(&h, meta, site, -step, n)?;
        let (analytic, numeric) = if order == 1 {
            (phi[site] * phi[site], (plus - minus) / (2.0 * step))
        } else {
            let centre = eigen::eigenvalues(&h, meta)?.eigenvalues[n];
            let hess = eigen_hessian(&s, n)?;
            (
                hess.get(site, site),
                (plus - 2.0 * centre + minus) / (step * step),
            )
        };
        if order == 2 && analytic.abs() < min_weight {
            continue;
        }
        out.push(FiniteDifferenceSample {
            realization_index: r,
            level: n,
            site,
            analytic,
            numeric,
            relative_error: ((analytic - numeric) / analytic).abs(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PairingSurvey {
    pub instances: u64,
    pub patterns: u64,
    pub max_ratio: f64,
    pub violations: u64,
    pub max_asymmetry: f64,
}

/// Hessian symmetry and the sampled pairing bound on one random simple
/// level of each of realizations `0..instances`.
pub fn pairing_survey(
    cube: &LatticeCube,
    spec: &DisorderSpec,
    instances: u64,
    patterns: usize,
    par: Parallelism,
) -> RunResult<PairingSurvey> {
    let per = par.map(0..instances, |r| {
        let s = realization_spectrum(cube, spec, r, true)?;
        let mut rng = Xoshiro256StarStar::for_stream(spec.base_seed, &[0x5041, r]);
        let mut n = rng.next_below(s.len() as u64) as usize;
        while s.gap_to_rest(n) <= anderson_core::perturbation::SIMPLICITY_THRESHOLD {
            n = rng.next_below(s.len() as u64) as usize;
        }
        let asym = eigen_hessian(&s, n)?.asymmetry();
        let mut sign = || if rng.next_u64() >> 63 == 1 { 1.0 } else { -1.0 };
        let pats: Vec<(Vec<f64>, Vec<f64>)> = (0..patterns)
            .map(|_| {
                let a: Vec<f64> = (0..s.len()).map(|_| sign()).collect();
                let b: Vec<f64> = (0..s.len()).map(|_| sign()).collect();
                (a, b)
            })
            .collect();
        let rep = hessian_pairing_bound(&s, n, &pats)?;
        Ok((asym, rep))
    })?;
    let mut out = PairingSurvey::default();
    for (asym, rep) in per {
        out.instances += 1;
        out.patterns += rep.patterns_checked as u64;
        out.max_ratio = out.max_ratio.max(rep.max_ratio);
        out.violations += rep.violations as u64;
        out.max_asymmetry = out.max_asymmetry.max(asym);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MinorSurvey {
    pub trials: u64,
    pub holds: u64,
    pub min_slack: f64,
}

/// Random nonnegative unit-l1 pairs of length `2..=n_max`; a third of the
/// draws have random zero components.
pub fn minor_survey(seed: u64, trials: u64, n_max: usize) -> RunResult<MinorSurvey> {
    let mut rng = Xoshiro256StarStar::for_stream(seed, &[0x4d49]);
    let mut out = MinorSurvey {
        min_slack: f64::INFINITY,
        ..Default::default()
    };
    let draw = |rng: &mut Xoshiro256StarStar, n: usize| -> Vec<f64> {
        let sparse = rng.next_below(3) == 0;
        let mut x: Vec<f64> = (0..n)
            .map(|_| {
                if sparse && rng.next_below(2) == 0 {
                    0.0
                } else {
                    rng.next_f64()
                }
            })
            .collect();
        if x.iter().all(|&v| v == 0.0) {
            let i = rng.next_below(n as u64) as usize;
            x[i] = 1.0;
        }
        let s: f64 = x.iter().sum();
        x.iter_mut().for_each(|v| *v /= s);
        x
    };
    for _ in 0..trials {
        let n = 2 + rng.next_below(n_max as u64 - 1) as usize;
        let u = draw(&mut rng, n);
        let v = draw(&mut rng, n);
        let b = minor_lower_bound(&u, &v)?;
        out.trials += 1;
        if b.holds {
            out.holds += 1;
        }
        out.min_slack = out.min_slack.min(b.max_minor_sq - b.rhs);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SeparationSurvey {
    pub realizations: u64,
    pub pairs_checked: u64,
    pub pairs_skipped: u64,
    pub projection_violations: u64,
    pub l2_violations: u64,
    pub full_span_violations: u64,
    /// `min (|ω·∇ΔE| - (|ΔE| - 2d))` over checked pairs.
    pub min_projection_margin: f64,
    pub min_l2_margin: f64,
    pub max_l1_norm: f64,
    pub mean_l1_norm: f64,
}

/// The gradient-separation inequalities over every pair of simple levels
/// of realizations `0..R`.
pub fn separation_survey(
    cube: &LatticeCube,
    spec: &DisorderSpec,
    realizations: u64,
    par: Parallelism,
) -> RunResult<(SeparationSurvey, Vec<SeparationSurvey>)> {
    let k = spec.magnitude_bound();
    let per = par.map(0..realizations, |r| {
        let pot = sample_potential(cube, spec, r)?;
        let h = Hamiltonian::assemble(cube, &pot)?;
        let s = eigen::eig_all(&h, SpectrumMeta::of(&pot))?;
        let mut out = SeparationSurvey {
            realizations: 1,
            min_projection_margin: f64::INFINITY,
            min_l2_margin: f64::INFINITY,
            ..Default::default()
        };
        let mut l1_sum = 0.0;
        let simple: Vec<usize> = (0..s.len())
            .filter(|&n| s.gap_to_rest(n) > anderson_core::perturbation::SIMPLICITY_THRESHOLD)
            .collect();
        for (a, &j) in simple.iter().enumerate() {
            for &kk in &simple[a + 1..] {
                let c = gradient_separation_check(&s, j, kk, &pot.values, k)?;
                if !c.hypothesis_holds {
                    out.pairs_skipped += 1;
                    continue;
                }
                out.pairs_checked += 1;
                l1_sum += c.l1_norm;
                out.max_l1_norm = out.max_l1_norm.max(c.l1_norm);
                out.min_projection_margin = out
                    .min_projection_margin
                    .min(c.projection - c.projection_rhs);
                out.min_l2_margin = out.min_l2_margin.min(c.l2_norm - c.l2_rhs);
                if c.projection_holds == Some(false) {
                    out.projection_violations += 1;
                }
                if c.l2_holds == Some(false) {
                    out.l2_violations += 1;
                }
                if c.projection_holds_full_span == Some(false) {
                    out.full_span_violations += 1;
                }
            }
        }
        out.mean_l1_norm = l1_sum;
        Ok(out)
    })?;
    let mut total = SeparationSurvey {
        min_projection_margin: f64::INFINITY,
        min_l2_margin: f64::INFINITY,
        ..Default::default()
    };
    let mut l1_sum = 0.0;
    let mut per_out = per;
    for p in per_out.iter_mut() {
        total.realizations += 1;
        total.pairs_checked += p.pairs_checked;
        total.pairs_skipped += p.pairs_skipped;
        total.projection_violations += p.projection_violations;
        total.l2_violations += p.l2_violations;
        total.full_span_violations += p.full_span_violations;
        total.min_projection_margin = total.min_projection_margin.min(p.min_projection_margin);
        total.min_l2_margin = total.min_l2_margin.min(p.min_l2_margin);
        total.max_l1_norm = total.max_l1_norm.max(p.max_l1_norm);
        l1_sum += p.mean_l1_norm;
        if p.pairs_checked > 0 {
            p.mean_l1_norm /= p.pairs_checked as f64;
        }
    }
    if total.pairs_checked > 0 {
        total.mean_l1_norm = l1_sum / total.pairs_checked as f64;
    }
    Ok((total, per_out))
}

pub const GRADIENT_STEP: f64 = 1e-5;
pub const HESSIAN_STEP: f64 = 1e-3;
pub const GRADIENT_FD_TOLERANCE: f64 = 1e-4;
pub const HESSIAN_FD_TOLERANCE: f64 = 1e-3;
pub const L1_TOLERANCE: f64 = 1e-10;

fn max_relative_error(samples: &[FiniteDifferenceSample]) -> f64 {
    samples.iter().map(|s| s.relative_error).fold(0.0, f64::max)
}

fn run_perturbation(c: &PerturbationConfig, par: Parallelism) -> RunResult<Outcome> {
    let spec = c.disorder.spec(c.seed);
    let cube = LatticeCube::new(c.d, c.l)?;
    let (grad, grad_per) = gradient_survey(&cube, &spec, c.realizations, par)?;
    let fd1 = finite_difference_samples(
        &cube,
        &spec,
        c.realizations,
        c.gradient_fd_samples,
        1,
        GRADIENT_STEP,
        1e-3,
        1e-3,
    )?;
    let fd2 = finite_difference_samples(
        &cube,
        &spec,
        c.realizations,
        c.hessian_fd_samples,
        2,
        HESSIAN_STEP,
        5e-2,
        1e-2,
    )?;
    let pairing = pairing_survey(&cube, &spec, c.hessian_instances, c.sign_patterns, par)?;
    let minor = minor_survey(c.seed, c.minor_trials, c.minor_n_max)?;
    let (sep, sep_per) = separation_survey(&cube, &spec, c.realizations, par)?;

    let checks = vec![
        Check::new(
            "gradient_identity",
            grad.min_component >= 0.0 && grad.max_l1_defect <= L1_TOLERANCE,
            format!(
                "{} simple levels, min component {:?}, max |l1 - 1| {:?}",
                grad.simple_levels, grad.min_component, grad.max_l1_defect
            ),
        ),
        Check::new(
            "gradient_finite_difference",
            max_relative_error(&fd1) < GRADIENT_FD_TOLERANCE,
            format!(
                "max relative error {:?} over {} samples",
                max_relative_error(&fd1),
                fd1.len()
            ),
        ),
        Check::new(
            "hessian_symmetry",
            pairing.max_asymmetry == 0.0,
            format!("max asymmetry {}", pairing.max_asymmetry),
        ),
        Check::new(
            "hessian_finite_difference",
            max_relative_error(&fd2) < HESSIAN_FD_TOLERANCE,
            format!(
                "max relative error {:?} over {} samples",
                max_relative_error(&fd2),
                fd2.len()
            ),
        ),
        Check::new(
            "hessian_pairing_bound",
            pairing.violations == 0,
            format!(
                "max ratio {} over {} patterns on {} instances",
                pairing.max_ratio, pairing.patterns, pairing.instances
            ),
        ),
        Check::new(
            "minor_inequality",
            minor.holds == minor.trials,
            format!("{} of {} trials hold", minor.holds, minor.trials),
        ),
        Check::new(
            "separation_projection",
            sep.projection_violations == 0,
            format!(
                "{} violations over {} pairs, min margin {:?}",
                sep.projection_violations, sep.pairs_checked, sep.min_projection_margin
            ),
        ),
        Check::new(
            "separation_l2",
            sep.l2_violations == 0,
            format!(
                "{} violations over {} pairs, min margin {:?}",
                sep.l2_violations, sep.pairs_checked, sep.min_l2_margin
            ),
        ),
    ];
    let mut table = Table::new(&[
        "realization_index",
        "simple_levels",
        "max_l1_defect",
        "min_component",
        "separation_pairs",
        "projection_violations",
        "l2_violations",
        "full_span_violations",
        "min_projection_margin",
        "min_l2_margin",
        "mean_gradient_difference_l1",
    ]);
    for (r, (g, s)) in grad_per.iter().zip(&sep_per).enumerate() {
        table.rows.push(vec![
            r.to_string(),
            g.simple_levels.to_string(),
            fmt_f64(g.max_l1_defect),
            fmt_f64(g.min_component),
            s.pairs_checked.to_string(),
            s.projection_violations.to_string(),
            s.l2_violations.to_string(),
            s.full_span_violations.to_string(),
            fmt_f64(s.min_projection_margin),
            fmt_f64(s.min_l2_margin),
            fmt_f64(s.mean_l1_norm),
        ]);
    }
    Ok(Outcome {
        results: json!({
            "gradient": grad,
            "gradient_finite_differences": fd1,
            "hessian_finite_differences": fd2,
            "pairing": pairing,
            "minor": minor,
            "separation": sep,
        }),
        checks,
        table,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirichletRow {
    pub n: usize,
    pub eigenvalue_deviation: Option<f64>,
    pub eigenvector_deviation: Option<f64>,
    pub min_gap: f64,
    pub scaled_gap: f64,
}

/// Dense solver against the closed-form open-chain spectrum for
/// `n in 2..=n_max`, and `n^2 min_gap(n)` for `n in 2..=gap_n_max`.
pub fn dirichlet_rows(n_max: usize, gap_n_max: usize) -> RunResult<Vec<DirichletRow>> {
    let top = n_max.max(gap_n_max);
    let mut rows = Vec::with_capacity(top - 1);
    for n in 2..=top {
        let (ev_dev, vec_dev) = if n <= n_max {
            let mut exact = dirichlet_spectrum(n)?;
            exact.eigenvalues.reverse();
            exact.eigenvectors.reverse();
            let (vals, basis) = eigh(&dirichlet_matrix(n))?;
            let ev = vals
                .iter()
                .zip(&exact.eigenvalues)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let mut vd = 0.0f64;
            for k in 0..n {
                let v = basis.vector(k);
                let w = &exact.eigenvectors[k];
                let dot: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
                let s = if dot < 0.0 { -1.0 } else { 1.0 };
                for (a, b) in v.iter().zip(w) {
                    vd = vd.max((a - s * b).abs());
                }
            }
            (Some(ev), Some(vd))
        } else {
            (None, None)
        };
        let gap = dirichlet_min_gap(n)?;
        rows.push(DirichletRow {
            n,
            eigenvalue_deviation: ev_dev,
            eigenvector_deviation: vec_dev,
            min_gap: gap,
            scaled_gap: (n * n) as f64 * gap,
        });
    }
    Ok(rows)
}

pub const DIRICHLET_EIGENVALUE_TOLERANCE: f64 = 1e-10;
pub const DIRICHLET_EIGENVECTOR_TOLERANCE: f64 = 1e-8;

fn run_dirichlet(c: &DirichletConfig) -> RunResult<Outcome> {
    let rows = dirichlet_rows(c.n_max, c.gap_n_max)?;
    let ev = rows
        .iter()
        .filter_map(|r| r.eigenvalue_deviation)
        .fold(0.0, f64::max);
    let vd = rows
        .iter()
        .filter_map(|r| r.eigenvector_deviation)
        .fold(0.0, f64::max);
    let gap_rows: Vec<&DirichletRow> = rows.iter().filter(|r| r.n <= c.gap_n_max).collect();
    let min_scaled = gap_rows
        .iter()
        .map(|r| r.scaled_gap)
        .fold(f64::INFINITY, f64::min);
    let checks = vec![
        Check::new(
            "eigenvalues",
            ev < DIRICHLET_EIGENVALUE_TOLERANCE,
            format!("max eigenvalue deviation {ev:?}"),
        ),
        Check::new(
            "eigenvectors",
            vd < DIRICHLET_EIGENVECTOR_TOLERANCE,
            format!("max eigenvector deviation {vd:?}"),
        ),
        Check::new(
            "scaled_min_gap",
            min_scaled >= c.gap_floor,
            format!("min n^2 gap {min_scaled:?} vs {}", c.gap_floor),
        ),
    ];
    let mut table = Table::new(&[
        "n",
        "eigenvalue_deviation",
        "eigenvector_deviation",
        "min_gap",
        "scaled_gap",
    ]);
    for r in &rows {
        table.rows.push(vec![
            r.n.to_string(),
            r.eigenvalue_deviation.map(fmt_f64).unwrap_or_default(),
            r.eigenvector_deviation.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.min_gap),
            fmt_f64(r.scaled_gap),
        ]);
    }
    Ok(Outcome {
        results: json!({
            "max_eigenvalue_deviation": ev,
            "max_eigenvector_deviation": vd,
            "min_scaled_gap": min_scaled,
        }),
        checks,
        table,
    })
}

fn run_box_matching(c: &BoxMatchingConfig, par: Parallelism) -> RunResult<Outcome> {
    let spec = c.disorder.spec(c.seed);
    let ells = c.ell.to_vec();
    let center = c.center.clone().unwrap_or_else(|| vec![0; c.d]);
    let mut table = Table::new(&[
        "ell",
        "realization_index",
        "index",
        "energy",
        "center",
        "nearest",
        "distance",
        "decay_rate",
    ]);
    let mut per_ell = Vec::new();
    let mut maxima = Vec::new();
    for &ell in &ells {
        let setup = BoxMatchingSetup {
            dim: c.d,
            big_half_side: c.l,
            ell,
            epsilon: c.epsilon,
            window: c.window,
            center: center.clone(),
        };
        let reps = par.map(0..c.realizations, |r| box_matching(&setup, &spec, r))?;
        let mut worst: Option<f64> = None;
        let mut matched = 0usize;
        let mut refs = Vec::new();
        for rep in &reps {
            matched += rep.matches.len();
            if let Some(m) = rep.max_distance {
                worst = Some(worst.map_or(m, |w| w.max(m)));
            }
            if let Some(s) = rep.reference_scale {
                refs.push(s);
            }
            for m in &rep.matches {
                table.rows.push(vec![
                    ell.to_string(),
                    rep.meta.realization_index.to_string(),
                    m.index.to_string(),
                    fmt_f64(m.energy),
                    fmt_coords(&m.center),
                    fmt_f64(m.nearest),
                    fmt_f64(m.distance),
                    fmt_f64(m.decay_rate),
                ]);
            }
        }
        maxima.push(worst);
        per_ell.push(json!({
            "ell": ell,
            "outer_half_side": setup.outer_half_side(),
            "matched_levels": matched,
            "max_distance": worst,
            "median_reference_scale": median(&refs),
        }));
    }
    let mut checks = vec![Check::new(
        "max_distance_below_threshold",
        maxima
            .iter()
            .all(|m| m.is_some_and(|x| x < c.max_distance_threshold)),
        format!("max distances {maxima:?} vs {}", c.max_distance_threshold),
    )];
    if ells.len() > 1 {
        let shrinks = maxima.windows(2).all(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => b < c.shrink_factor * a,
            _ => false,
        });
        checks.push(Check::new(
            "distance_shrinks_with_ell",
            shrinks,
            format!("successive ratio below {}", c.shrink_factor),
        ));
    }
    Ok(Outcome {
        results: json!({ "by_ell": per_ell }),
        checks,
        table,
    })
}
