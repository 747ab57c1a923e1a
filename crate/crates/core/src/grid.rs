//! Uniform node grids strictly inside the box [−L, L]ⁿ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `npa` nodes per axis at x_i = −L + (i+1)h with h = 2L/(npa+1).
///
/// For even `npa` the origin falls between nodes. Node index is row-major with
/// the last axis fastest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub l: f64,
    pub npa: usize,
}

impl Grid {
    pub fn new(dim: usize, l: f64, npa: usize) -> Result<Self> {
        if dim == 0 || npa < 2 || !(l > 0.0) {
            return Err(Error::Config(format!("invalid grid: dim={dim}, L={l}, nodes per axis={npa}")));
        }
        Ok(Grid { dim, l, npa })
    }

    /// The 3-D PDE grid; needs at least 9 nodes per axis.
    pub fn cube3(l: f64, npa: usize) -> Result<Self> {
        if npa < 9 {
            return Err(Error::Config(format!("PDE grid needs N >= 9, got {npa}")));
        }
        Self::new(3, l, npa)
    }

    pub fn h(&self) -> f64 {
        2.0 * self.l / (self.npa as f64 + 1.0)
    }

    pub fn len(&self) -> usize {
        self.npa.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.l + (i as f64 + 1.0) * self.h()
    }

    pub fn multi(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        for a in (0..self.dim).rev() {
            idx[a] = k % self.npa;
            k /= self.npa;
        }
        idx
    }

    pub fn index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.npa + i)
    }

    /// Representative of k under the grid's reflections and axis permutations:
    /// each index folded to min(i, npa−1−i), then sorted.
    pub fn canonical(&self, k: usize) -> usize {
        let mut idx: Vec<usize> = self.multi(k).into_iter().map(|i| i.min(self.npa - 1 - i)).collect();
        idx.sort_unstable();
        self.index(&idx)
    }

    pub fn point(&self, k: usize) -> Vec<f64> {
        self.multi(k).into_iter().map(|i| self.coord(i)).collect()
    }

    /// Node closest to `x` (coordinates clamped to the grid).
    pub fn nearest(&self, x: &[f64]) -> usize {
        let h = self.h();
        let idx: Vec<usize> = x
            .iter()
            .map(|&v| (((v + self.l) / h - 1.0).round().max(0.0) as usize).min(self.npa - 1))
            .collect();
        self.index(&idx)
    }

    /// ℓ∞ distance between two nodes in lattice steps.
    pub fn steps_inf(&self, a: usize, b: usize) -> usize {
        self.multi(a).iter().zip(self.multi(b)).map(|(x, y)| x.abs_diff(y)).max().unwrap_or(0)
    }

    /// Distance from node to the box boundary in ℓ∞.
    pub fn boundary_distance(&self, k: usize) -> f64 {
        self.point(k).iter().map(|v| self.l - v.abs()).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_round_trip() {
        let g = Grid::new(3, 2.0, 6).unwrap();
        assert_eq!(g.len(), 216);
        for k in [0, 17, 215] {
            assert_eq!(g.index(&g.multi(k)), k);
        }
        assert_eq!(g.nearest(&g.point(77)), 77);
        assert!((g.coord(0) + 2.0 - g.h()).abs() < 1e-15);
        assert!((g.coord(5) - 2.0 + g.h()).abs() < 1e-15);
    }

    #[test]
    fn even_grid_avoids_origin() {
        let g = Grid::cube3(1.0, 10).unwrap();
        assert!((0..g.len()).all(|k| g.point(k).iter().any(|v| v.abs() > 1e-12)));
        assert!(Grid::cube3(1.0, 8).is_err());
    }
}
