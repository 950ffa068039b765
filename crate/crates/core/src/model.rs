//! Lattice geometry, disorder sampling and assembly of the finite-volume
//! Anderson Hamiltonian `H = -Δ + V` on a periodic cube.
//!
//! The hopping term is the pure nearest-neighbour sum
//! `(-Δu)_n = Σ_{|m-n|=1} u_m` (unit hops, wrapped periodically), and the
//! potential is diagonal with i.i.d. entries.

use serde::{Deserialize, Serialize};

use crate::eigen::SymMatrix;
use crate::error::{Error, Result};
use crate::rng::Xoshiro256StarStar;

/// The periodic cube `Λ_L = [-L, L]^d`.
///
/// Sites are enumerated row-major with `x_1` the most significant coordinate,
/// so flat order coincides with lexicographic order of multi-indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeCube {
    dim: usize,
    half_side: usize,
    side: usize,
    n_sites: usize,
}

impl LatticeCube {
    pub const DEFAULT_MAX_SITES: usize = 1_000_000;

    pub fn new(dim: usize, half_side: usize) -> Result<Self> {
        Self::with_max_sites(dim, half_side, Self::DEFAULT_MAX_SITES)
    }

    pub fn with_max_sites(dim: usize, half_side: usize, max_sites: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidLattice("dimension must be at least 1".into()));
        }
        if half_side == 0 {
            return Err(Error::InvalidLattice(
                "half-side L = 0 gives a one-site periodic box with self-neighbours".into(),
            ));
        }
        let side = 2 * half_side + 1;
        let mut n_sites = 1usize;
        for _ in 0..dim {
            n_sites = n_sites
                .checked_mul(side)
                .filter(|&n| n <= max_sites)
                .ok_or_else(|| {
                    Error::InvalidLattice(format!(
                        "(2L+1)^d with d={dim}, L={half_side} exceeds the site limit {max_sites}"
                    ))
                })?;
        }
        Ok(Self {
            dim,
            half_side,
            side,
            n_sites,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_side(&self) -> usize {
        self.half_side
    }

    /// Number of sites per axis, `2L + 1`.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Flat index of a multi-index; coordinates outside `[-L, L]` are wrapped.
    pub fn flat_index(&self, coords: &[i64]) -> usize {
        assert_eq!(coords.len(), self.dim, "coordinate arity mismatch");
        let side = self.side as i64;
        let l = self.half_side as i64;
        coords.iter().fold(0usize, |acc, &x| {
            acc * self.side + (x + l).rem_euclid(side) as usize
        })
    }

    /// Multi-index in `[-L, L]^d` of a flat index.
    pub fn coords(&self, flat: usize) -> Vec<i64> {
        assert!(flat < self.n_sites, "site {flat} out of range");
        let mut out = vec![0i64; self.dim];
        let mut rest = flat;
        for slot in out.iter_mut().rev() {
            *slot = (rest % self.side) as i64 - self.half_side as i64;
            rest /= self.side;
        }
        out
    }

    /// The `2d` periodic neighbours of a site, ordered axis by axis (`+e_i`, then `-e_i`).
    pub fn neighbors(&self, flat: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(2 * self.dim);
        let mut stride = 1usize;
        for axis in (0..self.dim).rev() {
            let digit = (flat / stride) % self.side;
            let base = flat - digit * stride;
            let up = (digit + 1) % self.side;
            let down = (digit + self.side - 1) % self.side;
            out.push((axis, base + up * stride));
            out.push((axis, base + down * stride));
            stride *= self.side;
        }
        out.sort_by_key(|&(axis, _)| axis);
        out.into_iter().map(|(_, s)| s).collect()
    }

    /// Per-axis periodic distance `min(|x-y|, 2L+1-|x-y|)`.
    pub fn axis_distances(&self, a: usize, b: usize) -> Vec<usize> {
        let (ca, cb) = (self.coords(a), self.coords(b));
        ca.iter()
            .zip(&cb)
            .map(|(&x, &y)| {
                let d = (x - y).unsigned_abs() as usize;
                d.min(self.side - d)
            })
            .collect()
    }

    /// Periodic sup-norm distance between two sites.
    pub fn distance(&self, a: usize, b: usize) -> usize {
        self.axis_distances(a, b).into_iter().max().unwrap_or(0)
    }
}

/// Single-site law of the random potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisorderLaw {
    /// Uniform density on `[a, b]`.
    Uniform,
    /// Symmetric triangular density on `[a, b]`, peak at the midpoint.
    Triangular,
}

/// Law of the i.i.d. potential plus the base seed of its random streams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub law: DisorderLaw,
    pub a: f64,
    pub b: f64,
    pub base_seed: u64,
}

impl DisorderSpec {
    pub fn new(law: DisorderLaw, a: f64, b: f64, base_seed: u64) -> Result<Self> {
        let spec = Self {
            law,
            a,
            b,
            base_seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Uniform on `[0, 4]`.
    pub fn default_uniform(base_seed: u64) -> Self {
        Self {
            law: DisorderLaw::Uniform,
            a: 0.0,
            b: 4.0,
            base_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite()) {
            return Err(Error::InvalidDisorder("bounds must be finite".into()));
        }
        if self.a >= self.b {
            return Err(Error::InvalidDisorder(format!(
                "need a < b, got a={}, b={}",
                self.a, self.b
            )));
        }
        Ok(())
    }

    pub fn with_seed(&self, base_seed: u64) -> Self {
        Self { base_seed, ..*self }
    }

    /// `sup g`.
    pub fn density_sup(&self) -> f64 {
        match self.law {
            DisorderLaw::Uniform => 1.0 / (self.b - self.a),
            DisorderLaw::Triangular => 2.0 / (self.b - self.a),
        }
    }

    /// Bound `K = max(|a|, |b|)` on the potential values.
    pub fn magnitude_bound(&self) -> f64 {
        self.a.abs().max(self.b.abs())
    }

    /// Almost-sure spectrum `[a - 2d, b + 2d]`.
    pub fn spectrum_hull(&self, dim: usize) -> (f64, f64) {
        let w = 2.0 * dim as f64;
        (self.a - w, self.b + w)
    }

    /// Draws the value of one site from its own stream.
    pub fn sample_site(&self, realization_index: u64, site: u64) -> f64 {
        let mut rng = Xoshiro256StarStar::for_stream(self.base_seed, &[realization_index, site]);
        let width = self.b - self.a;
        let x = match self.law {
            DisorderLaw::Uniform => self.a + width * rng.next_f64(),
            DisorderLaw::Triangular => {
                let u = rng.next_f64();
                let v = rng.next_f64();
                self.a + 0.5 * width * (u + v)
            }
        };
        // Rounding in a + width*u can land one ulp above b.
        x.clamp(self.a, self.b)
    }
}

/// One realization of the potential on a cube.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub cube: LatticeCube,
    pub values: Vec<f64>,
    pub seed_used: u64,
    pub realization_index: u64,
}

impl Potential {
    /// Explicit potential values (tests, oracles, coupled sub-boxes).
    pub fn from_values(cube: LatticeCube, values: Vec<f64>) -> Result<Self> {
        if values.len() != cube.n_sites() {
            return Err(Error::CubeMismatch {
                expected: cube.n_sites(),
                found: values.len(),
            });
        }
        Ok(Self {
            cube,
            values,
            seed_used: 0,
            realization_index: 0,
        })
    }

    pub fn zero(cube: LatticeCube) -> Self {
        Self {
            cube,
            values: vec![0.0; cube.n_sites()],
            seed_used: 0,
            realization_index: 0,
        }
    }

    /// Restriction to the periodic sub-cube `center + Λ_{half_side}`.
    ///
    /// Sub-cube sites are mapped to the parent by wrapping coordinates, so the
    /// sub-box sees literally the same random values as the shared sites.
    pub fn restrict(&self, center: &[i64], half_side: usize) -> Result<Potential> {
        let sub = LatticeCube::new(self.cube.dim(), half_side)?;
        if sub.side() > self.cube.side() {
            return Err(Error::invalid(format!(
                "sub-box half-side {half_side} exceeds parent half-side {}",
                self.cube.half_side()
            )));
        }
        let values = (0..sub.n_sites())
            .map(|s| {
                let local = sub.coords(s);
                let global: Vec<i64> = local.iter().zip(center).map(|(x, c)| x + c).collect();
                self.values[self.cube.flat_index(&global)]
            })
            .collect();
        Ok(Potential {
            cube: sub,
            values,
            seed_used: self.seed_used,
            realization_index: self.realization_index,
        })
    }
}

/// Draws the potential for one realization. Site `s` uses the stream keyed
/// by `(base_seed, realization_index, s)`.
pub fn sample_potential(
    cube: &LatticeCube,
    spec: &DisorderSpec,
    realization_index: u64,
) -> Result<Potential> {
    spec.validate()?;
    let values = (0..cube.n_sites() as u64)
        .map(|s| spec.sample_site(realization_index, s))
        .collect();
    Ok(Potential {
        cube: *cube,
        values,
        seed_used: spec.base_seed,
        realization_index,
    })
}

/// `H = -Δ + V` with periodic unit hops. Only the diagonal is stored; the
/// hop pattern is implied by the cube.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    cube: LatticeCube,
    diagonal: Vec<f64>,
}

impl Hamiltonian {
    pub fn assemble(cube: &LatticeCube, pot: &Potential) -> Result<Self> {
        if pot.cube != *cube || pot.values.len() != cube.n_sites() {
            return Err(Error::CubeMismatch {
                expected: cube.n_sites(),
                found: pot.values.len(),
            });
        }
        Ok(Self {
            cube: *cube,
            diagonal: pot.values.clone(),
        })
    }

    pub fn cube(&self) -> &LatticeCube {
        &self.cube
    }

    pub fn order(&self) -> usize {
        self.cube.n_sites()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// Replaces one on-site value, e.g. for finite-difference probes.
    pub fn set_site(&mut self, site: usize, value: f64) {
        self.diagonal[site] = value;
    }

    /// `(Hu)_n = Σ_{m~n} u_m + ω_n u_n`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.order());
        (0..self.order())
            .map(|i| {
                let hop: f64 = self.cube.neighbors(i).into_iter().map(|j| u[j]).sum();
                hop + self.diagonal[i] * u[i]
            })
            .collect()
    }

    /// Sum of hop entries in each row.
    pub fn hop_row_sums(&self) -> Vec<f64> {
        (0..self.order())
            .map(|i| self.cube.neighbors(i).len() as f64)
            .collect()
    }

    /// Full symmetric matrix.
    pub fn to_dense(&self) -> SymMatrix {
        let n = self.order();
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            m.set(i, i, self.diagonal[i]);
            for j in self.cube.neighbors(i).into_iter().filter(|&j| j > i) {
                m.add(i, j, 1.0);
            }
        }
        m
    }

    /// Frobenius norm, computed from the implicit structure.
    pub fn frobenius_norm(&self) -> f64 {
        let hops = (self.order() * 2 * self.cube.dim()) as f64;
        (hops + self.diagonal.iter().map(|x| x * x).sum::<f64>()).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_sizes() {
        assert_eq!(LatticeCube::new(1, 1).unwrap().n_sites(), 3);
        assert_eq!(LatticeCube::new(2, 2).unwrap().n_sites(), 25);
        assert_eq!(LatticeCube::new(3, 4).unwrap().n_sites(), 729);
    }

    #[test]
    fn degenerate_cubes_rejected() {
        assert!(LatticeCube::new(1, 0).is_err());
        assert!(LatticeCube::new(0, 3).is_err());
        assert!(LatticeCube::new(3, 100).is_err()); // 201^3 > 10^6
        assert!(LatticeCube::with_max_sites(2, 2, 24).is_err());
    }

    #[test]
    fn enumeration_round_trip() {
        let cube = LatticeCube::new(3, 2).unwrap();
        for s in 0..cube.n_sites() {
            assert_eq!(cube.flat_index(&cube.coords(s)), s);
        }
        assert_eq!(cube.coords(0), vec![-2, -2, -2]);
        assert_eq!(cube.coords(1), vec![-2, -2, -1]);
        assert_eq!(cube.coords(cube.n_sites() - 1), vec![2, 2, 2]);
    }

    #[test]
    fn neighbors_wrap() {
        let cube = LatticeCube::new(2, 1).unwrap();
        for s in 0..cube.n_sites() {
            let nb = cube.neighbors(s);
            assert_eq!(nb.len(), 4);
            for &t in &nb {
                assert!(cube.neighbors(t).contains(&s));
                assert_eq!(cube.distance(s, t), 1);
            }
        }
        let one = LatticeCube::new(1, 1).unwrap();
        let mut nb = one.neighbors(0);
        nb.sort();
        assert_eq!(nb, vec![1, 2]);
    }

    #[test]
    fn triangular_law_in_support() {
        let spec = DisorderSpec::new(DisorderLaw::Triangular, -1.0, 3.0, 5).unwrap();
        let cube = LatticeCube::new(1, 500).unwrap();
        let pot = sample_potential(&cube, &spec, 2).unwrap();
        assert!(pot.values.iter().all(|&v| (-1.0..=3.0).contains(&v)));
        let mean = pot.values.iter().sum::<f64>() / pot.values.len() as f64;
        assert!((mean - 1.0).abs() < 0.1);
        assert_eq!(spec.density_sup(), 0.5);
    }

    #[test]
    fn bad_disorder_rejected() {
        assert!(DisorderSpec::new(DisorderLaw::Uniform, 1.0, 1.0, 0).is_err());
        assert!(DisorderSpec::new(DisorderLaw::Uniform, 0.0, f64::INFINITY, 0).is_err());
    }

    #[test]
    fn restriction_copies_shared_sites() {
        let cube = LatticeCube::new(1, 10).unwrap();
        let spec = DisorderSpec::default_uniform(3);
        let pot = sample_potential(&cube, &spec, 0).unwrap();
        let sub = pot.restrict(&[9], 3).unwrap();
        // local -3..=3 around 9 covers 6..=12, wrapping 11, 12 to -10, -9.
        for (local, &v) in sub.values.iter().enumerate() {
            let x = local as i64 - 3 + 9;
            assert_eq!(v, pot.values[cube.flat_index(&[x])]);
        }
    }

    #[test]
    fn mismatched_potential_rejected() {
        let a = LatticeCube::new(1, 2).unwrap();
        let b = LatticeCube::new(1, 3).unwrap();
        assert!(Hamiltonian::assemble(&a, &Potential::zero(b)).is_err());
    }
}
