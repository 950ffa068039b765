//! Dense symmetric eigensolver: Householder reduction to tridiagonal form
//! followed by the implicit-shift QL iteration.
//!
//! The algorithm is the classical tred2/tql2 pair (Bowdler, Martin, Reinsch
//! and Wilkinson). Working storage is kept transposed relative to the Algol
//! formulation, so every inner loop walks a contiguous row and the final
//! eigenvectors come out as rows.

use crate::error::{Error, Result};

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &x) in diag.iter().enumerate() {
            m.set(i, i, x);
        }
        m
    }

    /// Symmetric tridiagonal matrix; `off[i]` couples `i` and `i + 1`.
    pub fn tridiagonal(diag: &[f64], off: &[f64]) -> Self {
        assert_eq!(off.len() + 1, diag.len().max(1));
        let mut m = Self::from_diagonal(diag);
        for (i, &x) in off.iter().enumerate() {
            m.set(i, i + 1, x);
        }
        m
    }

    /// Builds from a row-major buffer, which must be exactly symmetric.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::invalid(format!(
                "expected {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        let m = Self { n, data };
        if m.asymmetry() != 0.0 {
            return Err(Error::invalid("matrix is not symmetric"));
        }
        Ok(m)
    }

    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        self.data[i * self.n + j] = x;
        self.data[j * self.n + i] = x;
    }

    /// Adds to both `(i, j)` and `(j, i)` (once when `i == j`).
    pub fn add(&mut self, i: usize, j: usize, x: f64) {
        self.data[i * self.n + j] += x;
        if i != j {
            self.data[j * self.n + i] += x;
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `max |A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn matvec(&self, u: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(u).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Eigenvectors stored as rows: row `k` belongs to eigenvalue `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    n: usize,
    data: Vec<f64>,
}

impl EigenBasis {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn vector(&self, k: usize) -> &[f64] {
        &self.data[k * self.n..(k + 1) * self.n]
    }

    /// `max |<φ_j, φ_k> - δ_jk|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.n {
            let a = self.vector(j);
            for k in j..self.n {
                let dot: f64 = a.iter().zip(self.vector(k)).map(|(x, y)| x * y).sum();
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Householder reduction of the symmetric matrix held in `w` (row-major,
/// order `n`). On return `diag` and `sub` hold the tridiagonal form, with
/// `sub[i]` coupling `i - 1` and `i` (`sub[0] = 0`). When `accumulate` is set
/// the rows of `w` hold the transposed orthogonal transformation.
fn householder_tridiagonalize(
    n: usize,
    w: &mut [f64],
    diag: &mut [f64],
    sub: &mut [f64],
    accumulate: bool,
) {
    let d = diag;
    let e = sub;
    for j in 0..n {
        d[j] = w[j * n + n - 1];
    }

    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = w[j * n + i - 1];
                w[j * n + i] = 0.0;
                w[i * n + j] = 0.0;
            }
        } else {
            for x in d[..i].iter_mut() {
                *x /= scale;
                h += *x * *x;
            }
            let mut f = d[i - 1];
            let mut g = if f > 0.0 { -h.sqrt() } else { h.sqrt() };
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].fill(0.0);

            // e <- A u, with A the leading i x i block (lower part in rows of w).
            for j in 0..i {
                f = d[j];
                w[i * n + j] = f;
                let row = &w[j * n..j * n + i];
                g = e[j] + row[j] * f;
                for k in j + 1..i {
                    g += row[k] * d[k];
                    e[k] += row[k] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let (fj, gj) = (d[j], e[j]);
                let row = &mut w[j * n..j * n + i];
                for k in j..i {
                    row[k] -= fj * e[k] + gj * d[k];
                }
                d[j] = row[i - 1];
                w[j * n + i] = 0.0;
            }
        }
        d[i] = h;
    }

    if !accumulate {
        for i in 0..n {
            d[i] = w[i * n + i];
        }
        if n > 0 {
            e[0] = 0.0;
        }
        return;
    }

    for i in 0..n.saturating_sub(1) {
        w[i * n + n - 1] = w[i * n + i];
        w[i * n + i] = 1.0;
        let h = d[i + 1];
        let (head, tail) = w.split_at_mut((i + 1) * n);
        let hv = &mut tail[..n];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = hv[k] / h;
            }
            for j in 0..=i {
                let row = &mut head[j * n..j * n + i + 1];
                let g: f64 = hv[..=i].iter().zip(row.iter()).map(|(a, b)| a * b).sum();
                for k in 0..=i {
                    row[k] -= g * d[k];
                }
            }
        }
        hv[..=i].fill(0.0);
    }
    for j in 0..n {
        d[j] = w[j * n + n - 1];
        w[j * n + n - 1] = 0.0;
    }
    if n > 0 {
        w[(n - 1) * n + n - 1] = 1.0;
        e[0] = 0.0;
    }
}

/// Implicit-shift QL on a symmetric tridiagonal matrix.
///
/// `d` is the diagonal, `e[i]` couples `i - 1` and `i` (`e[0]` ignored).
/// When `vectors` is given (row-major, rows = current basis vectors) the
/// rotations are accumulated into it. Eigenvalues are returned unsorted in `d`.
pub(crate) fn tridiagonal_ql(
    d: &mut [f64],
    e: &mut [f64],
    mut vectors: Option<&mut [f64]>,
) -> Result<()> {
    let n = d.len();
    if n <= 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let max_iterations = 30 * n;
    let mut iterations = 0usize;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;

    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }

        if m > l {
            loop {
                iterations += 1;
                if iterations > max_iterations {
                    return Err(Error::NoConvergence {
                        order: n,
                        iterations: max_iterations,
                    });
                }

                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for x in d[l + 2..n].iter_mut() {
                    *x -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    if let Some(v) = vectors.as_deref_mut() {
                        let (lo, hi) = v.split_at_mut((i + 1) * n);
                        let vi = &mut lo[i * n..];
                        let vi1 = &mut hi[..n];
                        for (a, b) in vi.iter_mut().zip(vi1.iter_mut()) {
                            let t = *b;
                            *b = s * *a + c * t;
                            *a = c * *a - s * t;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Full eigendecomposition. Eigenvalues ascending; row `k` of the basis is a
/// unit eigenvector for eigenvalue `k`.
pub fn eigh(a: &SymMatrix) -> Result<(Vec<f64>, EigenBasis)> {
    let n = a.order();
    let mut w = a.data.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    householder_tridiagonalize(n, &mut w, &mut d, &mut e, true);
    tridiagonal_ql(&mut d, &mut e, Some(&mut w))?;

    // Selection sort keeps QL order among exact ties.
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        for j in i + 1..n {
            if d[j] < d[k] {
                k = j;
            }
        }
        if k != i {
            d.swap(i, k);
            let (lo, hi) = w.split_at_mut(k * n);
            lo[i * n..(i + 1) * n].swap_with_slice(&mut hi[..n]);
        }
    }
    Ok((d, EigenBasis { n, data: w }))
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(a: &SymMatrix) -> Result<Vec<f64>> {
    let n = a.order();
    let mut w = a.data.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    householder_tridiagonalize(n, &mut w, &mut d, &mut e, false);
    tridiagonal_ql(&mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Eigenvalues of a symmetric tridiagonal matrix (`off[i]` couples `i`, `i+1`).
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    assert_eq!(off.len(), n - 1);
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[1..].copy_from_slice(off);
    tridiagonal_ql(&mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xoshiro256StarStar;

    fn random_symmetric(n: usize, seed: u64) -> SymMatrix {
        let mut rng = Xoshiro256StarStar::from_seed(seed);
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                m.set(i, j, rng.next_f64() * 2.0 - 1.0);
            }
        }
        m
    }

    fn max_residual(a: &SymMatrix, vals: &[f64], basis: &EigenBasis) -> f64 {
        (0..a.order())
            .map(|k| {
                let v = basis.vector(k);
                let av = a.matvec(v);
                av.iter()
                    .zip(v)
                    .map(|(x, y)| (x - vals[k] * y).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn diagonal_matrix_sorted_with_permutation_vectors() {
        let a = SymMatrix::from_diagonal(&[3.0, 1.0, 2.0]);
        let (vals, basis) = eigh(&a).unwrap();
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
        let expect = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        for (k, row) in expect.iter().enumerate() {
            for (x, y) in basis.vector(k).iter().zip(row) {
                assert_eq!(x.abs(), *y);
            }
        }
    }

    #[test]
    fn random_matrices_decompose() {
        for (n, seed) in [(1usize, 1u64), (2, 2), (3, 3), (10, 4), (57, 5), (120, 6)] {
            let a = random_symmetric(n, seed);
            let (vals, basis) = eigh(&a).unwrap();
            assert!(vals.windows(2).all(|w| w[0] <= w[1]));
            let scale = a.frobenius_norm();
            assert!(max_residual(&a, &vals, &basis) <= 1e-10 * scale.max(1.0));
            assert!(basis.orthonormality_defect() < 1e-10);
            let only = eigvalsh(&a).unwrap();
            for (x, y) in only.iter().zip(&vals) {
                assert!((x - y).abs() < 1e-11 * scale.max(1.0));
            }
            let trace: f64 = a.diagonal().iter().sum();
            let sum: f64 = vals.iter().sum();
            assert!((trace - sum).abs() < 1e-9 * n as f64 * scale.max(1.0));
        }
    }

    #[test]
    fn zero_and_identity_blocks() {
        let (vals, basis) = eigh(&SymMatrix::zeros(4)).unwrap();
        assert_eq!(vals, vec![0.0; 4]);
        assert!(basis.orthonormality_defect() < 1e-15);
        let (vals, _) = eigh(&SymMatrix::from_diagonal(&[2.0; 5])).unwrap();
        assert!(vals.iter().all(|&x| x == 2.0));
    }

    #[test]
    fn tridiagonal_path_matches_dense() {
        let mut rng = Xoshiro256StarStar::from_seed(11);
        let diag: Vec<f64> = (0..40).map(|_| rng.next_f64() * 4.0).collect();
        let off: Vec<f64> = (0..39).map(|_| rng.next_f64() - 0.5).collect();
        let a = tridiagonal_eigenvalues(&diag, &off).unwrap();
        let b = eigvalsh(&SymMatrix::tridiagonal(&diag, &off)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
