//! Sparse symmetric storage, Jacobi-preconditioned CG and a banded Cholesky oracle.

use crate::error::{Error, Result};

/// Compressed sparse rows with sorted column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col[a..b], &self.val[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|k| vals[k]).unwrap_or(0.0)
    }

    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, v)| v * x[j]).sum();
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest |i − j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n).map(|i| self.row(i).0.iter().map(|&j| i.abs_diff(j)).max().unwrap_or(0)).max().unwrap_or(0)
    }

    /// True if every stored a_ij has a bitwise-equal a_ji.
    pub fn is_exactly_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).all(|(&j, v)| self.get(j, i).to_bits() == v.to_bits())
        })
    }
}

/// A solution with its achieved relative residual ‖Au − b‖/‖b‖.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

pub trait LinearSolver: Sync {
    fn solve(&self, rhs: &[f64]) -> Result<Solution>;
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Conjugate gradients with diagonal (Jacobi) scaling. Sequential, so the
/// iterate sequence is reproducible bit for bit.
pub struct Cg<'a> {
    pub a: &'a Csr,
    pub tol: f64,
    pub max_iter: usize,
}

impl<'a> Cg<'a> {
    pub fn new(a: &'a Csr, tol: f64, max_iter: usize) -> Self {
        Cg { a, tol, max_iter }
    }
}

impl LinearSolver for Cg<'_> {
    fn solve(&self, b: &[f64]) -> Result<Solution> {
        let n = self.a.n;
        let bnorm = dot(b, b).sqrt();
        if bnorm == 0.0 {
            return Ok(Solution { x: vec![0.0; n], residual: 0.0, iterations: 0 });
        }
        let dinv: Vec<f64> = self.a.diagonal().iter().map(|v| 1.0 / v).collect();
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(a, b)| a * b).collect();
        let mut p = z.clone();
        let mut q = vec![0.0; n];
        let mut rz = dot(&r, &z);
        let mut res = 1.0;
        for it in 0..self.max_iter {
            self.a.mul_into(&p, &mut q);
            let alpha = rz / dot(&p, &q);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            res = dot(&r, &r).sqrt() / bnorm;
            if res <= self.tol {
                // Report the true residual, not the recursively updated one.
                let ax = self.a.mul(&x);
                let true_res = ax.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / bnorm;
                if true_res <= self.tol {
                    return Ok(Solution { x, residual: true_res, iterations: it + 1 });
                }
                r = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            }
            for i in 0..n {
                z[i] = r[i] * dinv[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::NoConvergence { op: "solve", iters: self.max_iter, residual: res })
    }
}

/// Cholesky factor of a banded SPD matrix, L stored row-wise over the band.
///
/// Row i holds L[i][i−b..=i] at offsets 0..=b. Cost O(n·b²); the dense-inverse
/// oracle on grids of a few thousand unknowns.
pub struct BandedCholesky {
    n: usize,
    b: usize,
    l: Vec<f64>,
    a: Csr,
}

impl BandedCholesky {
    pub fn factor(a: &Csr) -> Result<Self> {
        let n = a.n;
        let b = a.bandwidth();
        let w = b + 1;
        let mut l = vec![0.0; n * w];
        // Band slot for (i, j), j ≤ i, i − j ≤ b.
        let at = |i: usize, j: usize| i * w + (j + b - i);
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    l[at(i, j)] = v;
                }
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(b);
            for j in lo..=i {
                let jlo = j.saturating_sub(b).max(lo);
                let mut s = l[at(i, j)];
                let (ri, rj) = (at(i, jlo), at(j, jlo));
                for k in 0..(j - jlo) {
                    s -= l[ri + k] * l[rj + k];
                }
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::NotPsd { op: "banded_cholesky", lambda_min: s });
                    }
                    l[at(i, i)] = s.sqrt();
                } else {
                    l[at(i, j)] = s / l[at(j, j)];
                }
            }
        }
        Ok(BandedCholesky { n, b, l, a: a.clone() })
    }
}

impl LinearSolver for BandedCholesky {
    fn solve(&self, rhs: &[f64]) -> Result<Solution> {
        let (n, b, w) = (self.n, self.b, self.b + 1);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let row = &self.l[i * w..(i + 1) * w];
            let mut s = y[i];
            for j in lo..i {
                s -= row[j + b - i] * y[j];
            }
            y[i] = s / row[b];
        }
        for i in (0..n).rev() {
            y[i] /= self.l[i * w + b];
            let yi = y[i];
            for j in i.saturating_sub(b)..i {
                y[j] -= self.l[i * w + j + b - i] * yi;
            }
        }
        let bnorm = dot(rhs, rhs).sqrt();
        let ax = self.a.mul(&y);
        let residual = if bnorm == 0.0 {
            0.0
        } else {
            ax.iter().zip(rhs).map(|(a, r)| (a - r) * (a - r)).sum::<f64>().sqrt() / bnorm
        };
        Ok(Solution { x: y, residual, iterations: 0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1-D Dirichlet Laplacian tridiag(−1, 2, −1) plus a shift.
    fn tridiag(n: usize, shift: f64) -> Csr {
        let (mut row_ptr, mut col, mut val) = (vec![0], vec![], vec![]);
        for i in 0..n {
            if i > 0 {
                col.push(i - 1);
                val.push(-1.0);
            }
            col.push(i);
            val.push(2.0 + shift);
            if i + 1 < n {
                col.push(i + 1);
                val.push(-1.0);
            }
            row_ptr.push(col.len());
        }
        Csr { n, row_ptr, col, val }
    }

    #[test]
    fn cg_and_cholesky_agree_with_forward_product() {
        let a = tridiag(50, 0.1);
        let want: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.mul(&want);
        let cg = Cg::new(&a, 1e-12, 1000).solve(&b).unwrap();
        let ch = BandedCholesky::factor(&a).unwrap().solve(&b).unwrap();
        for i in 0..50 {
            assert!((cg.x[i] - want[i]).abs() < 1e-9);
            assert!((ch.x[i] - want[i]).abs() < 1e-12);
        }
        assert!(a.is_exactly_symmetric());
        assert_eq!(a.bandwidth(), 1);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = tridiag(10, 0.0);
        let s = Cg::new(&a, 1e-10, 100).solve(&[0.0; 10]).unwrap();
        assert!(s.x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn cg_reports_no_convergence() {
        let a = tridiag(200, 0.0);
        let b = vec![1.0; 200];
        assert!(matches!(Cg::new(&a, 1e-14, 3).solve(&b), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = tridiag(10, -3.0);
        assert!(BandedCholesky::factor(&a).is_err());
    }
}
