//! First- and second-order dependence of simple eigenvalues on the on-site
//! potential, and the inequalities built from them.
//!
//! For a simple eigenvalue `E_n` with unit eigenvector `φ_n`:
//!
//! * `∂E_n/∂ω_γ = φ_n(γ)^2`,
//! * `∂²E_n/∂ω_γ∂ω_β = -2 Σ_{m≠n} φ_m(γ)φ_n(γ)φ_m(β)φ_n(β) / (E_m - E_n)`.

use serde::{Deserialize, Serialize};

use crate::eigen::{SpectralSample, SpectrumMeta, SymMatrix};
use crate::error::{Error, Result};

/// Eigenvalues closer than this to the rest of the spectrum are treated as
/// degenerate.
pub const SIMPLICITY_THRESHOLD: f64 = 1e-10;

/// Slack allowed when checking exact inequalities in floating point.
pub const INEQUALITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientRecord {
    pub index: usize,
    pub energy: f64,
    pub gradient: Vec<f64>,
    pub gap_to_rest: f64,
    pub meta: SpectrumMeta,
}

impl GradientRecord {
    pub fn l1_norm(&self) -> f64 {
        self.gradient.iter().map(|x| x.abs()).sum()
    }
}

fn simple_level(sample: &SpectralSample, n: usize) -> Result<f64> {
    if n >= sample.len() {
        return Err(Error::invalid(format!("eigenvalue index {n} out of range")));
    }
    let gap = sample.gap_to_rest(n);
    if gap <= SIMPLICITY_THRESHOLD {
        return Err(Error::Degenerate { index: n, gap });
    }
    Ok(gap)
}

pub fn eigen_gradient(sample: &SpectralSample, n: usize) -> Result<GradientRecord> {
    let gap = simple_level(sample, n)?;
    let phi = sample.vector(n)?;
    Ok(GradientRecord {
        index: n,
        energy: sample.eigenvalues[n],
        gradient: phi.iter().map(|x| x * x).collect(),
        gap_to_rest: gap,
        meta: sample.meta,
    })
}

/// Full Hessian of `E_n` with respect to the potential values.
pub fn eigen_hessian(sample: &SpectralSample, n: usize) -> Result<SymMatrix> {
    simple_level(sample, n)?;
    let basis = sample.basis()?;
    let size = basis.order();
    let phi_n = basis.vector(n);
    let e_n = sample.eigenvalues[n];
    let mut acc = vec![0.0; size * size];
    let mut w = vec![0.0; size];
    for m in (0..sample.len()).filter(|&m| m != n) {
        let c = -2.0 / (sample.eigenvalues[m] - e_n);
        for ((wi, a), b) in w.iter_mut().zip(basis.vector(m)).zip(phi_n) {
            *wi = a * b;
        }
        for g in 0..size {
            let cg = c * w[g];
            if cg == 0.0 {
                continue;
            }
            let row = &mut acc[g * size..(g + 1) * size];
            for b in g..size {
                row[b] += cg * w[b];
            }
        }
    }
    for g in 0..size {
        for b in 0..g {
            acc[g * size + b] = acc[b * size + g];
        }
    }
    SymMatrix::from_row_major(size, acc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    pub index: usize,
    pub gap_to_rest: f64,
    /// `2 / gap`.
    pub bound: f64,
    pub patterns_checked: usize,
    pub max_abs_pairing: f64,
    /// `max |<Hess a, b>| * gap / 2`; at most 1 when the bound holds.
    pub max_ratio: f64,
    pub violations: usize,
}

/// `<Hess a, b>` evaluated through the spectral sum, without forming the
/// Hessian.
pub fn hessian_pairing(sample: &SpectralSample, n: usize, a: &[f64], b: &[f64]) -> Result<f64> {
    simple_level(sample, n)?;
    let basis = sample.basis()?;
    if a.len() != basis.order() || b.len() != basis.order() {
        return Err(Error::invalid(
            "pattern length differs from the number of sites",
        ));
    }
    let phi_n = basis.vector(n);
    let e_n = sample.eigenvalues[n];
    let mut total = 0.0;
    for m in (0..sample.len()).filter(|&m| m != n) {
        let phi_m = basis.vector(m);
        let (mut pa, mut pb) = (0.0, 0.0);
        for i in 0..phi_m.len() {
            let w = phi_m[i] * phi_n[i];
            pa += a[i] * w;
            pb += b[i] * w;
        }
        total += pa * pb / (sample.eigenvalues[m] - e_n);
    }
    Ok(-2.0 * total)
}

/// Checks `|<Hess a, b>| <= 2 / gap` for each pattern pair; entries must
/// satisfy `|a_i|, |b_i| <= 1`.
pub fn hessian_pairing_bound(
    sample: &SpectralSample,
    n: usize,
    patterns: &[(Vec<f64>, Vec<f64>)],
) -> Result<PairingReport> {
    let gap = simple_level(sample, n)?;
    let bound = 2.0 / gap;
    let mut report = PairingReport {
        index: n,
        gap_to_rest: gap,
        bound,
        patterns_checked: 0,
        max_abs_pairing: 0.0,
        max_ratio: 0.0,
        violations: 0,
    };
    for (a, b) in patterns {
        if a.iter().chain(b).any(|x| !(x.abs() <= 1.0)) {
            return Err(Error::invalid("pattern entries must lie in [-1, 1]"));
        }
        let p = hessian_pairing(sample, n, a, b)?.abs();
        report.patterns_checked += 1;
        report.max_abs_pairing = report.max_abs_pairing.max(p);
        report.max_ratio = report.max_ratio.max(p / bound);
        if p > bound {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// `det [[∂E/∂ω_γ, ∂E/∂ω_γ'], [∂E'/∂ω_γ, ∂E'/∂ω_γ']]`.
pub fn jacobian_2x2(
    grad_e: &GradientRecord,
    grad_e_prime: &GradientRecord,
    gamma: usize,
    gamma_prime: usize,
) -> Result<f64> {
    if gamma == gamma_prime {
        return Err(Error::invalid("the two sites must differ"));
    }
    if grad_e.meta != grad_e_prime.meta || grad_e.gradient.len() != grad_e_prime.gradient.len() {
        return Err(Error::invalid("gradients come from different realizations"));
    }
    let n = grad_e.gradient.len();
    if gamma >= n || gamma_prime >= n {
        return Err(Error::invalid("site index out of range"));
    }
    let (u, v) = (&grad_e.gradient, &grad_e_prime.gradient);
    Ok(u[gamma] * v[gamma_prime] - u[gamma_prime] * v[gamma])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinorBound {
    pub max_minor_sq: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn check_probability_vector(x: &[f64], name: &str) -> Result<()> {
    if x.iter().any(|&c| !(c >= 0.0)) {
        return Err(Error::invalid(format!(
            "{name} has a negative or NaN component"
        )));
    }
    let s: f64 = x.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "{name} has l1 norm {s}, expected 1"
        )));
    }
    Ok(())
}

/// `max_{j≠k} (u_j v_k - u_k v_j)^2` against `‖u - v‖_1^2 / (4 n^5)` for
/// nonnegative unit-l1 vectors.
pub fn minor_lower_bound(u: &[f64], v: &[f64]) -> Result<MinorBound> {
    let n = u.len();
    if n < 2 || v.len() != n {
        return Err(Error::invalid("vectors must share a length of at least 2"));
    }
    check_probability_vector(u, "u")?;
    check_probability_vector(v, "v")?;
    let mut best = 0.0f64;
    for j in 0..n {
        for k in j + 1..n {
            let m = u[j] * v[k] - u[k] * v[j];
            best = best.max(m * m);
        }
    }
    let l1: f64 = u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum();
    let rhs = l1 * l1 / (4.0 * (n as f64).powi(5));
    Ok(MinorBound {
        max_minor_sq: best,
        rhs,
        holds: best >= rhs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationCheck {
    pub j: usize,
    pub k: usize,
    pub energy_gap: f64,
    /// `|E_j - E_k| > 2d`.
    pub hypothesis_holds: bool,
    /// `|ω · ∇(E_j - E_k)|`.
    pub projection: f64,
    /// `|E_j - E_k| - 2d`.
    pub projection_rhs: f64,
    /// `None` when the hypothesis fails and the check is skipped.
    pub projection_holds: Option<bool>,
    /// `‖∇(E_j - E_k)‖_2`.
    pub l2_norm: f64,
    /// `(|E_j - E_k| - 2d) / (K √N)`.
    pub l2_rhs: f64,
    pub l2_holds: Option<bool>,
    /// `‖∇(E_j - E_k)‖_1`, reported without a bound.
    pub l1_norm: f64,
    /// `|E_j - E_k| - 4d`: the right side that accounts for the full range
    /// `[-2d, 2d]` of the kinetic energy `<φ, -Δ φ>`.
    pub projection_rhs_full_span: f64,
    pub projection_holds_full_span: Option<bool>,
}

/// Compares the gradients of two levels of the same realization with the
/// potential `omega`; `magnitude_bound` is `K = max(|a|, |b|)`.
pub fn gradient_separation_check(
    sample: &SpectralSample,
    j: usize,
    k: usize,
    omega: &[f64],
    magnitude_bound: f64,
) -> Result<SeparationCheck> {
    if j == k {
        return Err(Error::invalid("the two levels must differ"));
    }
    let gj = eigen_gradient(sample, j)?;
    let gk = eigen_gradient(sample, k)?;
    if omega.len() != gj.gradient.len() {
        return Err(Error::CubeMismatch {
            expected: gj.gradient.len(),
            found: omega.len(),
        });
    }
    if !(magnitude_bound > 0.0) {
        return Err(Error::invalid("magnitude bound must be positive"));
    }
    let two_d = 2.0 * sample.meta.dim as f64;
    let gap = (gj.energy - gk.energy).abs();
    let diff: Vec<f64> = gj
        .gradient
        .iter()
        .zip(&gk.gradient)
        .map(|(a, b)| a - b)
        .collect();
    let projection = omega
        .iter()
        .zip(&diff)
        .map(|(w, g)| w * g)
        .sum::<f64>()
        .abs();
    let l2_norm = diff.iter().map(|x| x * x).sum::<f64>().sqrt();
    let l1_norm = diff.iter().map(|x| x.abs()).sum();
    let n = omega.len() as f64;
    let projection_rhs = gap - two_d;
    let l2_rhs = projection_rhs / (magnitude_bound * n.sqrt());
    let projection_rhs_full_span = gap - 2.0 * two_d;
    let hypothesis_holds = projection_rhs > 0.0;
    let gate = |ok: bool| hypothesis_holds.then_some(ok);
    Ok(SeparationCheck {
        j,
        k,
        energy_gap: gap,
        hypothesis_holds,
        projection,
        projection_rhs,
        projection_holds: gate(projection >= projection_rhs - INEQUALITY_SLACK),
        l2_norm,
        l2_rhs,
        l2_holds: gate(l2_norm >= l2_rhs - INEQUALITY_SLACK),
        l1_norm,
        projection_rhs_full_span,
        projection_holds_full_span: (projection_rhs_full_span > 0.0)
            .then_some(projection >= projection_rhs_full_span - INEQUALITY_SLACK),
    })
}
