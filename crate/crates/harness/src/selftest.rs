//! Fast closed-form checks and the worker-count determinism check.

use std::fs;
use std::path::Path;

use anderson_core::eigen::{self, SpectrumMeta, SymMatrix};
use anderson_core::model::{sample_potential, DisorderSpec, Hamiltonian, LatticeCube, Potential};
use anderson_core::perturbation::{eigen_gradient, minor_lower_bound};
use anderson_core::stats::Interval;

use crate::config::parse_config;
use crate::experiments::{execute, Check, RunResult};
use crate::output::{write_outputs, SAMPLES_FILE, SUMMARY_FILE};

/// Potential-free chain: eigenvalues `2 cos(2πk/n)`.
fn free_chain() -> RunResult<Check> {
    let cube = LatticeCube::new(1, 5)?;
    let h = Hamiltonian::assemble(&cube, &Potential::zero(cube))?;
    let s = eigen::eig_all(&h, SpectrumMeta::of(&Potential::zero(cube)))?;
    let n = s.len();
    let mut exact: Vec<f64> = (0..n)
        .map(|k| 2.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
        .collect();
    exact.sort_by(f64::total_cmp);
    let dev = s
        .eigenvalues
        .iter()
        .zip(&exact)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(Check::new(
        "free_chain_spectrum",
        dev < 1e-12,
        format!("max deviation {dev}"),
    ))
}

/// With hopping switched off the spectrum is the sorted potential, and each
/// gradient is a unit vector.
fn diagonal_operator() -> RunResult<Check> {
    let values = vec![3.0, -1.0, 2.5, 0.5, 7.0];
    let n = values.len();
    let dense = SymMatrix::from_diagonal(&values);
    let (vals, basis) = eigen::eigh(&dense)?;
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let mut ok = vals == sorted;
    for k in 0..n {
        let v = basis.vector(k);
        ok &= v.iter().filter(|x| x.abs() == 1.0).count() == 1;
    }
    Ok(Check::new("diagonal_operator", ok, "eigenpairs of diag(V)"))
}

fn gradient_identity() -> RunResult<Check> {
    let cube = LatticeCube::new(1, 10)?;
    let pot = sample_potential(&cube, &DisorderSpec::default_uniform(7), 0)?;
    let h = Hamiltonian::assemble(&cube, &pot)?;
    let s = eigen::eig_all(&h, SpectrumMeta::of(&pot))?;
    let mut worst = 0.0f64;
    for n in 0..s.len() {
        let g = eigen_gradient(&s, n)?;
        worst = worst.max((g.gradient.iter().sum::<f64>() - 1.0).abs());
    }
    Ok(Check::new(
        "gradient_sums_to_one",
        worst < 1e-12,
        format!("max defect {worst}"),
    ))
}

fn minor_examples() -> RunResult<Check> {
    let b = minor_lower_bound(&[1.0, 0.0], &[0.0, 1.0])?;
    let c = minor_lower_bound(&[0.5, 0.5], &[0.5, 0.5])?;
    let ok =
        (b.max_minor_sq - 1.0).abs() < 1e-15 && b.holds && c.max_minor_sq == 0.0 && c.rhs == 0.0;
    Ok(Check::new("minor_examples", ok, "e1,e2 and equal vectors"))
}

fn interval_counting() -> Check {
    let pts = [0.1, 0.5, 0.5, 0.9];
    let i = Interval::new(0.5, 0.9);
    let n = pts.iter().filter(|&&x| i.contains(x)).count();
    Check::new("closed_interval_counting", n == 3, "endpoints are included")
}

pub fn trivial_checks() -> RunResult<Vec<Check>> {
    Ok(vec![
        free_chain()?,
        diagonal_operator()?,
        gradient_identity()?,
        minor_examples()?,
        interval_counting(),
    ])
}

pub const DETERMINISM_CONFIG: &str = r#"{
  "experiment": "wegner",
  "L": [20, 40],
  "J": [[1.5, 2.5], [0.0, 0.2]],
  "realizations": 64,
  "seed": 11
}"#;

/// Runs [`DETERMINISM_CONFIG`] with 1 and 8 workers under `scratch` and
/// compares `summary.json` and `samples.csv` byte for byte.
pub fn determinism_check(scratch: &Path) -> RunResult<Check> {
    let mut bytes = Vec::new();
    for workers in [1usize, 8] {
        let mut config = parse_config(DETERMINISM_CONFIG)?;
        config.set_workers(workers);
        let outcome = execute(&config, workers)?;
        let dir = scratch.join(format!("workers-{workers}"));
        write_outputs(&dir, &config, &outcome, 0.0)?;
        let read = |f: &str| {
            let p = dir.join(f);
            fs::read(&p).map_err(|source| crate::experiments::RunError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        bytes.push((read(SUMMARY_FILE)?, read(SAMPLES_FILE)?));
    }
    Ok(Check::new(
        "worker_count_determinism",
        bytes[0] == bytes[1],
        "summary.json and samples.csv identical at 1 and 8 workers",
    ))
}
