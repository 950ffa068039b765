//! Density of states, rescaled level processes and Monte Carlo estimators.

mod dos;
mod estimators;
mod gof;
mod levels;
mod report;

pub use dos::{estimate_dos, independent_seed, DosEstimate, DEFAULT_BANDWIDTH};
pub use estimators::{
    decorrelation_estimator, decorrelation_from_hits, minami_estimator, minami_from_counts,
    wegner_estimator, wegner_from_counts, window_counts, DecorrelationSetup, WindowHits,
};
pub use gof::{
    chi_square_independence, chi_square_poisson, independence_from_counts, independence_test,
    kolmogorov_pvalue, ks_exponential, pearson, poisson_gof, poisson_pmf, tv_to_poisson, ChiSquare,
    DEFAULT_PROBES, LOW_POWER_REALIZATIONS,
};
pub use levels::{rescale_levels, PointProcessSample};
pub use report::{mean_and_se, Estimate, EstimatorReport, NamedCount, TestStatistic};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]`; empty when `hi < lo`. Serialized as `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl From<[f64; 2]> for Interval {
    fn from([lo, hi]: [f64; 2]) -> Self {
        Self { lo, hi }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    /// The empty interval.
    pub fn empty() -> Self {
        Self { lo: 1.0, hi: 0.0 }
    }

    pub fn centered(center: f64, half_width: f64) -> Self {
        Self::new(center - half_width, center + half_width)
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo <= self.hi)
    }

    pub fn length(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// `self ⊆ other`. The empty interval is contained in everything.
    pub fn is_subset_of(&self, other: &Interval) -> bool {
        self.is_empty() || (!other.is_empty() && other.lo <= self.lo && self.hi <= other.hi)
    }

    /// True when the interiors intersect.
    pub fn overlaps(&self, other: &Interval) -> bool {
        !self.is_empty() && !other.is_empty() && self.lo < other.hi && other.lo < self.hi
    }

    pub(crate) fn check_finite(&self, what: &str) -> Result<()> {
        if self.lo.is_finite() && self.hi.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!("{what} must have finite endpoints")))
        }
    }
}
