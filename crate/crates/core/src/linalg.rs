//! Small dense and banded symmetric linear algebra.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm, rescaled so that large components do not overflow.
pub fn norm(a: &[f64]) -> f64 {
    let m = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    m * a.iter().map(|v| (v / m) * (v / m)).sum::<f64>().sqrt()
}

/// Row-major dense square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn mul(&self, other: &DenseMatrix) -> DenseMatrix {
        let n = self.n;
        let mut out = DenseMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| dot(&self.data[i * self.n..(i + 1) * self.n], x))
            .collect()
    }
}

/// Eigen-decomposition of a dense symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in ascending order and the matching eigenvectors as columns
/// (`vecs[k]` is the k-th eigenvector).
pub fn symmetric_eigen(a: &DenseMatrix) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.n;
    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        let mut diag = 0.0;
        for i in 0..n {
            diag += m.get(i, i) * m.get(i, i);
            for j in (i + 1)..n {
                off += m.get(i, j) * m.get(i, j);
            }
        }
        if off <= 1e-30 * diag.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m.get(i, i)
            .partial_cmp(&m.get(j, j))
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let vals = order.iter().map(|&i| m.get(i, i)).collect();
    let vecs = order
        .iter()
        .map(|&j| (0..n).map(|k| v.get(k, j)).collect())
        .collect();
    (vals, vecs)
}

/// Full eigen-decomposition of a symmetric tridiagonal matrix (implicit QL).
/// `diag` has length n, `off[i]` couples i and i+1 (length n−1).
/// Eigenvalues ascending; `vecs[k]` is the k-th unit eigenvector.
pub fn tridiagonal_eigen(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = diag.len();
    if off.len() + 1 != n.max(1) {
        return Err(Error::input("tridiagonal: off-diagonal length must be n-1"));
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(off);
    // z[i][k]: component i of eigenvector k
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 200 {
                    return Err(Error::NonConvergence {
                        iterations: iter,
                        residuals: vec![e[l].abs()],
                    });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
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
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let zk1 = z[k * n + i + 1];
                        let zk = z[k * n + i];
                        z[k * n + i + 1] = s * zk + c * zk1;
                        z[k * n + i] = c * zk - s * zk1;
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
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        d[i].partial_cmp(&d[j])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let vals = order.iter().map(|&i| d[i]).collect();
    let vecs = order
        .iter()
        .map(|&k| (0..n).map(|i| z[i * n + k]).collect())
        .collect();
    Ok((vals, vecs))
}

/// Symmetric banded matrix, lower band stored row by row:
/// entry (i, j) with i − bw ≤ j ≤ i lives at `data[i*(bw+1) + (j + bw − i)]`.
#[derive(Clone, Debug)]
pub struct SymBand {
    pub n: usize,
    pub bw: usize,
    pub data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Adds `v` to entry (i, j) and its mirror.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(i - j <= self.bw);
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            return 0.0;
        }
        self.data[self.idx(i, j)]
    }

    /// In-place Cholesky factorization A = L Lᵀ (L kept in the same band).
    /// Fails on a non-positive pivot, which certifies that A is not positive definite.
    pub fn cholesky(mut self) -> Result<BandCholesky> {
        let n = self.n;
        let bw = self.bw;
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = self.data[self.idx(i, j)];
                let ri = i * (bw + 1) + bw - i;
                let rj = j * (bw + 1) + bw - j;
                for k in k0..j {
                    s -= self.data[ri + k] * self.data[rj + k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::Conditioning {
                            smallest_eigenvalue: s,
                        });
                    }
                    let v = s.sqrt();
                    let id = self.idx(i, i);
                    self.data[id] = v;
                } else {
                    let djj = self.data[self.idx(j, j)];
                    let id = self.idx(i, j);
                    self.data[id] = s / djj;
                }
            }
        }
        Ok(BandCholesky { l: self })
    }
}

#[derive(Clone, Debug)]
pub struct BandCholesky {
    l: SymBand,
}

impl BandCholesky {
    /// Solves A x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.l.n;
        let bw = self.l.bw;
        let data = &self.l.data;
        for i in 0..n {
            let ri = i * (bw + 1) + bw - i;
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= data[ri + k] * b[k];
            }
            b[i] = s / data[ri + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n.min(i + bw + 1) {
                s -= data[k * (bw + 1) + bw - k + i] * b[k];
            }
            b[i] = s / data[i * (bw + 1) + bw];
        }
    }
}

/// Orthonormalizes the columns in place (two passes of modified Gram–Schmidt).
/// Columns that collapse numerically are replaced by a deterministic unit vector.
pub fn orthonormalize(cols: &mut [Vec<f64>]) {
    let p = cols.len();
    for j in 0..p {
        for _ in 0..2 {
            for i in 0..j {
                let (head, tail) = cols.split_at_mut(j);
                let c = dot(&head[i], &tail[0]);
                for (x, y) in tail[0].iter_mut().zip(&head[i]) {
                    *x -= c * y;
                }
            }
        }
        let nrm = norm(&cols[j]);
        if nrm < 1e-300 {
            let n = cols[j].len();
            for (k, x) in cols[j].iter_mut().enumerate() {
                *x = if k == (j * 7919) % n { 1.0 } else { 0.0 };
            }
        } else {
            for x in cols[j].iter_mut() {
                *x /= nrm;
            }
        }
    }
}

/// Low-rank pivoted Cholesky of a positive semidefinite matrix given by `entry`,
/// stopping when the largest remaining diagonal drops below `tol`.
/// Returns the factor columns (each of length n) in pivot order and the deficit,
/// the most negative remaining diagonal (sign flipped). A deficit above
/// `max_deficit` means the matrix is not numerically semidefinite.
pub fn pivoted_cholesky<F: Fn(usize, usize) -> f64>(
    n: usize,
    entry: F,
    tol: f64,
    max_deficit: f64,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let mut diag: Vec<f64> = (0..n).map(|i| entry(i, i)).collect();
    let mut used = vec![false; n];
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for _ in 0..n {
        let mut piv = usize::MAX;
        let mut best = f64::NEG_INFINITY;
        for i in 0..n {
            if !used[i] && diag[i] > best {
                best = diag[i];
                piv = i;
            }
        }
        if piv == usize::MAX || best <= tol {
            break;
        }
        used[piv] = true;
        let sq = best.sqrt();
        let mut col = vec![0.0; n];
        for i in 0..n {
            if used[i] && i != piv {
                continue;
            }
            let mut s = entry(i, piv);
            for c in &cols {
                s -= c[i] * c[piv];
            }
            col[i] = s / sq;
        }
        for i in 0..n {
            if !used[i] {
                diag[i] -= col[i] * col[i];
            }
        }
        cols.push(col);
    }
    let worst = diag
        .iter()
        .zip(&used)
        .filter(|(_, u)| !**u)
        .map(|(d, _)| *d)
        .fold(0.0, f64::min);
    if worst < -max_deficit {
        return Err(Error::Conditioning {
            smallest_eigenvalue: worst,
        });
    }
    Ok((cols, -worst))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_diagonalizes_known_matrix() {
        let mut a = DenseMatrix::zeros(3);
        let vals = [[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                a.set(i, j, vals[i][j]);
            }
        }
        let (ev, vecs) = symmetric_eigen(&a);
        let s2 = 2f64.sqrt();
        let want = [2.0 - s2, 2.0, 2.0 + s2];
        for k in 0..3 {
            assert!((ev[k] - want[k]).abs() < 1e-12);
            let av = a.apply(&vecs[k]);
            for i in 0..3 {
                assert!((av[i] - ev[k] * vecs[k][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tridiagonal_matches_second_difference_spectrum() {
        let n = 50;
        let (ev, vecs) = tridiagonal_eigen(&vec![2.0; n], &vec![-1.0; n - 1]).unwrap();
        for (k, v) in ev.iter().enumerate() {
            let x = (k + 1) as f64 * core::f64::consts::PI / (2.0 * (n + 1) as f64);
            let exact = 4.0 * x.sin() * x.sin();
            assert!((v - exact).abs() < 1e-12, "{k}: {v} vs {exact}");
        }
        assert!((norm(&vecs[3]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn band_cholesky_solves() {
        let n = 30;
        let mut a = SymBand::zeros(n, 2);
        for i in 0..n {
            a.add(i, i, 5.0);
            if i >= 1 {
                a.add(i, i - 1, -1.0);
            }
            if i >= 2 {
                a.add(i, i - 2, 0.5);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            for j in i.saturating_sub(2)..(i + 3).min(n) {
                b[i] += a.get(i, j) * x[j];
            }
        }
        let f = a.cholesky().unwrap();
        f.solve_in_place(&mut b);
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn band_cholesky_rejects_indefinite() {
        let mut a = SymBand::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(1, 0, 2.0);
        assert!(a.cholesky().is_err());
    }

    #[test]
    fn pivoted_cholesky_rank_one() {
        let (cols, deficit) = pivoted_cholesky(5, |_, _| 2.0, 1e-12, 0.0).unwrap();
        assert_eq!(deficit, 0.0);
        assert_eq!(cols.len(), 1);
        for v in &cols[0] {
            assert!((v - 2f64.sqrt()).abs() < 1e-14);
        }
    }
}
