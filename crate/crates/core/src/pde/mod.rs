//! Discrete weakly coupled Schrödinger operators −div(a∇u) + V u on the 3-D box.
//!
//! Unknowns are ordered node-major with the d components innermost, so the
//! assembled matrix has bandwidth N²·d.

mod green;
mod solve;

pub use green::{
    block_norm, free_green_check, green_field, green_field_with, green_symmetry, harnack_probe, landscape, landscape_stability, local_boundedness_probe, local_boundedness_stability,
    resolvent_identity_check, resolvent_identity_with, sandwich_constants, truncation_check, BoundednessRow, BoundednessStability,
    FreeGreenCheck, GreenField, HarnackRow, Landscape, LandscapeStability, ResolventCheck, SolverKind, TruncationCheck,
};
pub use solve::{BandedCholesky, Cg, Csr, LinearSolver, Solution};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::weights::MatrixWeight;

/// Scalar leading coefficient a(x), required to stay in [lambda, upper].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub field: CoefficientField,
    pub lambda: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientField {
    Constant { value: f64 },
    /// base + amplitude·sin(k x₁) sin(k x₂) sin(k x₃).
    Oscillating { base: f64, amplitude: f64, frequency: f64 },
}

impl Default for Coefficient {
    fn default() -> Self {
        Coefficient { field: CoefficientField::Constant { value: 1.0 }, lambda: 0.1, upper: 10.0 }
    }
}

impl Coefficient {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.field {
            CoefficientField::Constant { value } => value,
            CoefficientField::Oscillating { base, amplitude, frequency } => {
                base + amplitude * x.iter().map(|v| (frequency * v).sin()).product::<f64>()
            }
        }
    }

    fn checked(&self, x: &[f64]) -> Result<f64> {
        let v = self.eval(x);
        if !(v >= self.lambda && v <= self.upper) {
            return Err(Error::EllipticityViolation { op: "assemble", value: v, lo: self.lambda, hi: self.upper });
        }
        Ok(v)
    }
}

/// Treatment of the edges leaving the box.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Boundary {
    /// u = 0 on the ghost layer.
    #[default]
    Dirichlet,
    /// Ghost value u_b·r_b/r_g with r the distance to `center`: exact for 1/r far
    /// fields, which removes most of the truncation error of the free Green function.
    Radiation { center: Vec<f64> },
}

/// Assembled operator; immutable once built.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub grid: Grid,
    pub d: usize,
    pub coefficient: Coefficient,
    pub boundary: Boundary,
    /// d×d potential block per node, row-major.
    pub potential: Vec<f64>,
    pub matrix: Csr,
}

impl DiscreteOperator {
    pub fn len(&self) -> usize {
        self.matrix.n
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.n == 0
    }

    pub fn potential_block(&self, node: usize) -> &[f64] {
        let dd = self.d * self.d;
        &self.potential[node * dd..(node + 1) * dd]
    }

    /// Default CG: relative residual 1e−10, at most 20·N·d iterations.
    pub fn cg(&self) -> Cg<'_> {
        Cg::new(&self.matrix, 1e-10, 20 * self.grid.npa * self.d)
    }

    pub fn solve(&self, rhs: &[f64], tol: f64) -> Result<Solution> {
        Cg::new(&self.matrix, tol, 20 * self.grid.npa * self.d).solve(rhs)
    }
}

/// Flux-form 7-point stencil with a at edge midpoints, plus the nodal potential.
pub fn assemble(w: &MatrixWeight, coefficient: &Coefficient, grid: &Grid, boundary: &Boundary) -> Result<DiscreteOperator> {
    if grid.dim != 3 || w.n() != 3 {
        return Err(Error::Config(format!("operators live in 3-D; grid dim {}, weight n {}", grid.dim, w.n())));
    }
    let d = w.d();
    let npa = grid.npa;
    let h = grid.h();
    let h2 = h * h;
    let strides = [npa * npa, npa, 1];
    let rows: Vec<Result<Vec<(Vec<usize>, Vec<f64>)>>> = (0..grid.len())
        .into_par_iter()
        .map(|u| {
            let idx = grid.multi(u);
            let x = grid.point(u);
            let v = w.eval(&x)?;
            let mut diag = 0.0;
            let mut lower = Vec::new();
            let mut upper = Vec::new();
            for a in 0..3 {
                for dir in [-1i64, 1] {
                    let j = idx[a] as i64 + dir;
                    // Both endpoints of an edge derive its midpoint from the lower
                    // index, so the two off-diagonal entries are bitwise equal.
                    let lo = idx[a] as i64 + dir.min(0);
                    let mut mid = x.clone();
                    mid[a] = -grid.l + (lo as f64 + 1.5) * h;
                    let c = coefficient.checked(&mid)? / h2;
                    let mut y = x.clone();
                    y[a] = -grid.l + (j as f64 + 1.0) * h;
                    if j < 0 || j >= npa as i64 {
                        diag += match boundary {
                            Boundary::Dirichlet => c,
                            Boundary::Radiation { center } => {
                                let rb = crate::weights::norm2(&sub(&x, center));
                                let rg = crate::weights::norm2(&sub(&y, center));
                                c * (1.0 - (rb / rg).min(1.0))
                            }
                        };
                    } else {
                        diag += c;
                        let nb = if dir < 0 { u - strides[a] } else { u + strides[a] };
                        if dir < 0 {
                            lower.push((nb, -c));
                        } else {
                            upper.push((nb, -c));
                        }
                    }
                }
            }
            lower.sort_by_key(|e| e.0);
            upper.sort_by_key(|e| e.0);
            let mut out = Vec::with_capacity(d);
            for i in 0..d {
                let (mut cols, mut vals) = (Vec::new(), Vec::new());
                for &(nb, c) in &lower {
                    cols.push(nb * d + i);
                    vals.push(c);
                }
                for j in 0..d {
                    let mut e = v.get(i, j);
                    if i == j {
                        e += diag;
                    } else if e == 0.0 {
                        continue;
                    }
                    cols.push(u * d + j);
                    vals.push(e);
                }
                for &(nb, c) in &upper {
                    cols.push(nb * d + i);
                    vals.push(c);
                }
                out.push((cols, vals));
            }
            Ok(out)
        })
        .collect();
    let mut row_ptr = vec![0];
    let (mut col, mut val) = (Vec::new(), Vec::new());
    for r in rows {
        for (c, v) in r? {
            col.extend(c);
            val.extend(v);
            row_ptr.push(col.len());
        }
    }
    let potential = (0..grid.len())
        .flat_map(|u| w.eval_unchecked(&grid.point(u)).as_slice().to_vec())
        .collect();
    let matrix = Csr { n: grid.len() * d, row_ptr, col, val };
    Ok(DiscreteOperator { grid: *grid, d, coefficient: coefficient.clone(), boundary: boundary.clone(), potential, matrix })
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMat;
    use crate::weights::ScalarWeight;

    fn g9() -> Grid {
        Grid::cube3(1.0, 9).unwrap()
    }

    #[test]
    fn free_laplacian_rows_conserve() {
        let g = g9();
        let w = MatrixWeight::constant(3, SymMat::zeros(1)).unwrap();
        let op = assemble(&w, &Coefficient::default(), &g, &Boundary::Dirichlet).unwrap();
        let h2 = g.h() * g.h();
        let u = g.index(&[4, 4, 4]);
        let (cols, vals) = op.matrix.row(u);
        assert_eq!(cols.len(), 7);
        assert!(vals.iter().sum::<f64>().abs() < 1e-12 / h2);
        assert!((op.matrix.get(u, u) - 6.0 / h2).abs() < 1e-9);
        assert!(op.matrix.is_exactly_symmetric());
    }

    #[test]
    fn identity_potential_shifts_diagonal() {
        let g = g9();
        let zero = assemble(&MatrixWeight::constant(3, SymMat::zeros(2)).unwrap(), &Coefficient::default(), &g, &Boundary::Dirichlet).unwrap();
        let one = assemble(&MatrixWeight::identity(3, 2), &Coefficient::default(), &g, &Boundary::Dirichlet).unwrap();
        for i in 0..one.len() {
            let z = zero.matrix.get(i, i);
            assert!((one.matrix.get(i, i) - z - 1.0).abs() <= 1e-15 * z);
        }
    }

    #[test]
    fn diagonal_potential_is_block_diagonal() {
        let g = g9();
        let w = MatrixWeight::diag_x2_x4(3);
        let op = assemble(&w, &Coefficient::default(), &g, &Boundary::Dirichlet).unwrap();
        for i in 0..op.len() {
            let (cols, _) = op.matrix.row(i);
            assert!(cols.iter().all(|c| c % 2 == i % 2));
        }
        assert!(op.matrix.is_exactly_symmetric());
    }

    #[test]
    fn coupled_potential_is_symmetric_and_positive() {
        let g = g9();
        let op = assemble(&MatrixWeight::appendix_a(3), &Coefficient::default(), &g, &Boundary::Dirichlet).unwrap();
        assert!(op.matrix.is_exactly_symmetric());
        // Rayleigh quotients on a few deterministic probes.
        for k in 1..5 {
            let v: Vec<f64> = (0..op.len()).map(|i| ((i * k) as f64 * 0.731).sin()).collect();
            let av = op.matrix.mul(&v);
            assert!(av.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() > 0.0);
        }
    }

    #[test]
    fn ellipticity_is_enforced() {
        let g = g9();
        let c = Coefficient {
            field: CoefficientField::Oscillating { base: 1.0, amplitude: 0.95, frequency: 3.0 },
            lambda: 0.5,
            upper: 2.0,
        };
        let w = MatrixWeight::scalar(3, ScalarWeight::Polynomial { coefs: vec![1.0] }).unwrap();
        assert!(matches!(assemble(&w, &c, &g, &Boundary::Dirichlet), Err(Error::EllipticityViolation { .. })));
    }

    #[test]
    fn cg_matches_dense_factorization() {
        let g = g9();
        let c = Coefficient {
            field: CoefficientField::Oscillating { base: 1.0, amplitude: 0.3, frequency: 2.0 },
            lambda: 0.5,
            upper: 2.0,
        };
        let op = assemble(&MatrixWeight::appendix_a(3), &c, &g, &Boundary::Dirichlet).unwrap();
        let n = op.len();
        let dense = nalgebra::DMatrix::from_fn(n, n, |i, j| op.matrix.get(i, j));
        let rhs: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.11).cos()).collect();
        let want = dense.cholesky().unwrap().solve(&nalgebra::DVector::from_column_slice(&rhs));
        let got = op.solve(&rhs, 1e-10).unwrap();
        let scale = want.amax();
        for i in 0..n {
            assert!((got.x[i] - want[i]).abs() <= 1e-8 * scale);
        }
    }
}
