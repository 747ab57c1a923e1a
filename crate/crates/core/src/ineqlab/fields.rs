//! Compactly supported vector test functions on a 3-D node grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::grid::Grid;
use crate::linalg::random_unit;

/// Node values of u: ℝ³ → ℝᵈ, zero on the two outermost node layers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestFunctionField {
    pub grid: Grid,
    pub d: usize,
    pub label: String,
    /// values[node·d + i].
    pub values: Vec<f64>,
}

impl TestFunctionField {
    /// Samples `f` at the nodes and clears the outer two layers.
    pub fn from_fn(grid: &Grid, d: usize, label: impl Into<String>, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let mut values = vec![0.0; grid.len() * d];
        for k in 0..grid.len() {
            let idx = grid.multi(k);
            if idx.iter().any(|&i| i < 2 || i + 2 >= grid.npa) {
                continue;
            }
            let v = f(&grid.point(k));
            values[k * d..(k + 1) * d].copy_from_slice(&v[..d]);
        }
        TestFunctionField { grid: *grid, d, label: label.into(), values }
    }

    pub fn at(&self, node: usize) -> &[f64] {
        &self.values[node * self.d..(node + 1) * self.d]
    }

    /// Centered-difference gradient, zero ghost values outside the grid:
    /// grad[(node·d + i)·dim + a] = ∂_a u_i.
    pub fn gradient(&self) -> Vec<f64> {
        let (g, d) = (&self.grid, self.d);
        let dim = g.dim;
        let h2 = 2.0 * g.h();
        let mut out = vec![0.0; g.len() * d * dim];
        let stride = |a: usize| g.npa.pow((dim - 1 - a) as u32);
        for k in 0..g.len() {
            let idx = g.multi(k);
            for a in 0..dim {
                let s = stride(a);
                for i in 0..d {
                    let up = if idx[a] + 1 < g.npa { self.values[(k + s) * d + i] } else { 0.0 };
                    let dn = if idx[a] > 0 { self.values[(k - s) * d + i] } else { 0.0 };
                    out[(k * d + i) * dim + a] = (up - dn) / h2;
                }
            }
        }
        out
    }

    /// h³ Σ |Du|².
    pub fn dirichlet_energy(&self) -> f64 {
        self.grid.h().powi(self.grid.dim as i32) * self.gradient().iter().map(|v| v * v).sum::<f64>()
    }

    /// h³ Σ w(x)|u(x)|².
    pub fn weighted_mass(&self, w: &[f64]) -> f64 {
        let hn = self.grid.h().powi(self.grid.dim as i32);
        hn * (0..self.grid.len()).map(|k| w[k] * self.at(k).iter().map(|v| v * v).sum::<f64>()).sum::<f64>()
    }
}

fn bump(t: f64) -> f64 {
    if t >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

/// Twenty deterministic fields: smooth bumps of varying center and width,
/// modulated by plane waves of 0 to 4 half-oscillations per radius with
/// component-dependent phases and amplitudes.
pub fn library(grid: &Grid, d: usize) -> Vec<TestFunctionField> {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let l = grid.l;
    let margin = 3.0 * grid.h();
    (0..20)
        .map(|k| {
            let rho = l * rng.random_range(0.25..0.55);
            let room = (l - margin - rho).max(0.0);
            let center: Vec<f64> = (0..grid.dim).map(|_| if room > 0.0 { rng.random_range(-room..=room) } else { 0.0 }).collect();
            let dir = random_unit(grid.dim, &mut rng);
            let omega = (k % 5) as f64 * std::f64::consts::PI / rho;
            let phases: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
            let amps: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..1.5)).collect();
            TestFunctionField::from_fn(grid, d, format!("bump{k:02}"), |x| {
                let rel: Vec<f64> = x.iter().zip(&center).map(|(a, b)| a - b).collect();
                let b = bump(crate::weights::norm2(&rel) / rho);
                let phase = omega * rel.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>();
                (0..d).map(|i| amps[i] * b * (phase + phases[i]).cos()).collect()
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_is_compactly_supported_and_deterministic() {
        let g = Grid::cube3(1.0, 12).unwrap();
        let a = library(&g, 2);
        let b = library(&g, 2);
        assert_eq!(a.len(), 20);
        assert_eq!(a, b);
        for f in &a {
            assert!(f.values.iter().any(|v| *v != 0.0), "{}", f.label);
            for k in 0..g.len() {
                if g.multi(k).iter().any(|&i| i < 2 || i + 2 >= g.npa) {
                    assert!(f.at(k).iter().all(|v| *v == 0.0));
                }
            }
        }
    }

    #[test]
    fn gradient_of_linear_field() {
        let g = Grid::cube3(1.0, 10).unwrap();
        let f = TestFunctionField::from_fn(&g, 1, "x", |x| vec![2.0 * x[0] - x[2]]);
        let grad = f.gradient();
        // Deep inside, centered differences of a linear function are exact.
        let k = g.index(&[5, 5, 5]);
        assert!((grad[k * 3] - 2.0).abs() < 1e-12 && grad[k * 3 + 1].abs() < 1e-12 && (grad[k * 3 + 2] + 1.0).abs() < 1e-12);
    }
}
