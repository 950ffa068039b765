//! Eigenvalues of symmetric banded matrices via Givens band reduction.
//!
//! A 1D periodic chain is tridiagonal plus two corner entries. Interleaving
//! the sites as `0, 1, n-1, 2, n-2, ...` turns it into a pentadiagonal matrix,
//! which is reduced to tridiagonal form by bulge-chasing Givens rotations in
//! `O(n^2)` work and then handed to the implicit QL iteration. This replaces
//! the `O(n^3)` Householder step whenever only eigenvalues are needed.

use super::dense::{tridiagonal_ql, SymMatrix};
use crate::error::Result;

/// Symmetric band matrix with half-bandwidth `kd`, lower part stored by
/// columns with one extra diagonal of room for the bulge.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kd: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kd: usize) -> Self {
        let width = kd + 2;
        Self {
            n,
            kd,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.kd
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let off = hi - lo;
        (off < self.width).then(|| lo * self.width + off)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Sets `(i, j)` and `(j, i)`. Panics outside the stored band.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        let s = self.slot(i, j).expect("entry outside band storage");
        self.data[s] = x;
    }

    /// Copies the band of a dense matrix; entries outside the band are ignored.
    pub fn from_dense(a: &SymMatrix, kd: usize) -> Self {
        let mut b = Self::zeros(a.order(), kd);
        for j in 0..a.order() {
            for i in j..(j + kd + 1).min(a.order()) {
                b.set(i, j, a.get(i, j));
            }
        }
        b
    }

    /// Periodic 1D chain with the given on-site values, in interleaved order.
    pub fn periodic_chain(diag: &[f64]) -> Self {
        let n = diag.len();
        let order = interleaved_ring_order(n);
        let mut pos = vec![0usize; n];
        for (p, &site) in order.iter().enumerate() {
            pos[site] = p;
        }
        let mut b = Self::zeros(n, 2.min(n.saturating_sub(1)));
        for site in 0..n {
            b.set(pos[site], pos[site], diag[site]);
        }
        if n >= 3 {
            for site in 0..n {
                let next = (site + 1) % n;
                b.set(pos[site], pos[next], 1.0);
            }
        } else if n == 2 {
            // Both neighbours of each site coincide.
            b.set(0, 1, 2.0);
        }
        b
    }

    /// Applies `A <- G A G^T` for the rotation `[c s; -s c]` acting on rows
    /// and columns `p` and `p + 1`.
    fn rotate(&mut self, p: usize, c: f64, s: f64) {
        let q = p + 1;
        let lo = p.saturating_sub(self.kd);
        let hi = (q + self.kd).min(self.n - 1);
        for x in lo..p {
            let (a, b) = (self.get(p, x), self.get(q, x));
            self.set(p, x, c * a + s * b);
            if let Some(slot) = self.slot(q, x) {
                self.data[slot] = -s * a + c * b;
            }
        }
        for x in q + 1..=hi {
            let (a, b) = (self.get(p, x), self.get(q, x));
            if let Some(slot) = self.slot(p, x) {
                self.data[slot] = c * a + s * b;
            }
            self.set(q, x, -s * a + c * b);
        }
        let (app, apq, aqq) = (self.get(p, p), self.get(p, q), self.get(q, q));
        let cc = c * c;
        let ss = s * s;
        let cs = c * s;
        self.set(p, p, cc * app + 2.0 * cs * apq + ss * aqq);
        self.set(q, q, ss * app - 2.0 * cs * apq + cc * aqq);
        self.set(p, q, (cc - ss) * apq + cs * (aqq - app));
    }

    /// Rotation in plane `(row - 1, row)` that annihilates `A[row][col]`.
    fn annihilate(&mut self, row: usize, col: usize) {
        let a = self.get(row - 1, col);
        let b = self.get(row, col);
        if b == 0.0 {
            return;
        }
        let r = a.hypot(b);
        self.rotate(row - 1, a / r, b / r);
        self.set(row, col, 0.0);
        self.set(row - 1, col, r);
    }

    /// Reduces to tridiagonal form in place and returns `(diag, off)`.
    pub fn into_tridiagonal(mut self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let kd = self.kd;
        if kd > 1 {
            for j in 0..n.saturating_sub(2) {
                for r in (2..=kd).rev() {
                    let row = j + r;
                    if row >= n {
                        continue;
                    }
                    self.annihilate(row, j);
                    // The rotation leaves a bulge at (row - 1 + kd + 1, row - 1).
                    let mut col = row - 1;
                    let mut bulge = row + kd;
                    while bulge < n {
                        self.annihilate(bulge, col);
                        col = bulge - 1;
                        bulge += kd;
                    }
                }
            }
        }
        let diag = (0..n).map(|i| self.get(i, i)).collect();
        let off = (0..n.saturating_sub(1))
            .map(|i| self.get(i + 1, i))
            .collect();
        (diag, off)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(self) -> Result<Vec<f64>> {
        let n = self.n;
        let (mut d, off) = self.into_tridiagonal();
        let mut e = vec![0.0; n];
        if n > 1 {
            e[1..].copy_from_slice(&off);
        }
        tridiagonal_ql(&mut d, &mut e, None)?;
        d.sort_by(f64::total_cmp);
        Ok(d)
    }
}

/// Site order `0, 1, n-1, 2, n-2, ...`, in which ring neighbours are at most
/// two positions apart.
pub fn interleaved_ring_order(n: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(n);
    if n == 0 {
        return order;
    }
    order.push(0);
    let (mut lo, mut hi) = (1usize, n - 1);
    while lo <= hi {
        order.push(lo);
        if hi != lo {
            order.push(hi);
        }
        lo += 1;
        hi -= 1;
    }
    order
}

#[cfg(test)]
mod tests {
    use super::super::dense::eigvalsh;
    use super::*;
    use crate::rng::Xoshiro256StarStar;

    fn random_band(n: usize, kd: usize, seed: u64) -> SymMatrix {
        let mut rng = Xoshiro256StarStar::from_seed(seed);
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i.saturating_sub(kd)..=i {
                m.set(i, j, rng.next_f64() * 2.0 - 1.0);
            }
        }
        m
    }

    #[test]
    fn ring_order_is_a_permutation_with_short_hops() {
        for n in 1..40 {
            let order = interleaved_ring_order(n);
            let mut sorted = order.clone();
            sorted.sort();
            assert_eq!(sorted, (0..n).collect::<Vec<_>>());
            let mut pos = vec![0usize; n];
            for (p, &s) in order.iter().enumerate() {
                pos[s] = p;
            }
            for s in 0..n {
                let t = (s + 1) % n;
                assert!(pos[s].abs_diff(pos[t]) <= 2, "n={n} s={s}");
            }
        }
    }

    #[test]
    fn band_reduction_matches_dense() {
        for (n, kd, seed) in [
            (5, 2, 1u64),
            (30, 2, 2),
            (31, 3, 3),
            (64, 5, 4),
            (7, 1, 5),
            (2, 1, 6),
        ] {
            let a = random_band(n, kd, seed);
            let band = BandMatrix::from_dense(&a, kd).eigenvalues().unwrap();
            let dense = eigvalsh(&a).unwrap();
            for (x, y) in band.iter().zip(&dense) {
                assert!((x - y).abs() < 1e-12, "n={n} kd={kd}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn free_periodic_chain() {
        for n in [3usize, 4, 5, 11, 40] {
            let vals = BandMatrix::periodic_chain(&vec![0.0; n])
                .eigenvalues()
                .unwrap();
            let mut exact: Vec<f64> = (0..n)
                .map(|k| 2.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
                .collect();
            exact.sort_by(f64::total_cmp);
            for (x, y) in vals.iter().zip(&exact) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
