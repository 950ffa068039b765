use serde::{Deserialize, Serialize};

use crate::eigen::{count_in_sorted, SpectralSample, SpectrumMeta};
use crate::error::{Error, Result};

use super::Interval;

/// Levels of one realization unfolded around `E`:
/// `ξ_n = |Λ| ν(E) (E_n - E)`, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointProcessSample {
    pub reference_energy: f64,
    pub nu_at_e: f64,
    pub volume: usize,
    pub points: Vec<f64>,
    pub meta: SpectrumMeta,
}

impl PointProcessSample {
    /// Number of points in the closed interval `a`.
    pub fn count_in(&self, a: Interval) -> usize {
        count_in_sorted(&self.points, a.lo, a.hi)
    }

    /// The energy interval that `a` corresponds to before rescaling.
    pub fn energy_window(&self, a: Interval) -> Interval {
        let s = self.volume as f64 * self.nu_at_e;
        Interval::new(
            self.reference_energy + a.lo / s,
            self.reference_energy + a.hi / s,
        )
    }
}

pub fn rescale_levels(sample: &SpectralSample, e: f64, nu_at_e: f64) -> Result<PointProcessSample> {
    if !(nu_at_e > 0.0 && nu_at_e.is_finite()) {
        return Err(Error::invalid(format!(
            "level rescaling needs a positive density of states, got {nu_at_e}"
        )));
    }
    if !e.is_finite() {
        return Err(Error::invalid("reference energy must be finite"));
    }
    let volume = sample.len();
    let s = volume as f64 * nu_at_e;
    Ok(PointProcessSample {
        reference_energy: e,
        nu_at_e,
        volume,
        points: sample.eigenvalues.iter().map(|&x| s * (x - e)).collect(),
        meta: sample.meta,
    })
}
