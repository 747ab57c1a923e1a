use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::AuxField;
use crate::grid::Grid;

/// Norm measuring path speed |γ′|.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathNorm {
    #[default]
    Linf,
    L2,
}

impl PathNorm {
    fn length(self, step: &[i64], h: f64) -> f64 {
        match self {
            PathNorm::Linf => h * step.iter().map(|s| s.abs()).max().unwrap_or(0) as f64,
            PathNorm::L2 => h * (step.iter().map(|s| (s * s) as f64).sum::<f64>()).sqrt(),
        }
    }

    /// Worst relative overestimate of the straight-line ℓ₂ length by the full
    /// 3ⁿ−1 stencil in three dimensions. Zero for ℓ∞, where the stencil is exact.
    ///
    /// A displacement sorted as 1 ≥ a ≥ b ≥ 0 (scaled) costs
    /// b√3 + (a−b)√2 + (1−a) against √(1+a²+b²); the maximum is found by a
    /// fine scan plus local refinement.
    pub fn metrication_bound(self) -> f64 {
        match self {
            PathNorm::Linf => 0.0,
            PathNorm::L2 => {
                let ratio = |a: f64, b: f64| {
                    (b * 3f64.sqrt() + (a - b) * 2f64.sqrt() + 1.0 - a) / (1.0 + a * a + b * b).sqrt()
                };
                let (mut best, mut ba, mut bb) = (0.0, 0.0, 0.0);
                let n = 400;
                for i in 0..=n {
                    for j in 0..=i {
                        let (a, b) = (i as f64 / n as f64, j as f64 / n as f64);
                        let v = ratio(a, b);
                        if v > best {
                            (best, ba, bb) = (v, a, b);
                        }
                    }
                }
                let mut step = 1.0 / n as f64;
                while step > 1e-12 {
                    let mut improved = false;
                    for (da, db) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                        let (a, b) = (ba + da, bb + db);
                        if (0.0..=1.0).contains(&b) && b <= a && a <= 1.0 && ratio(a, b) > best {
                            (best, ba, bb) = (ratio(a, b), a, b);
                            improved = true;
                        }
                    }
                    if !improved {
                        step *= 0.5;
                    }
                }
                best - 1.0
            }
        }
    }
}

/// Agmon distance d(·, source) sampled on the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceField {
    pub grid: Grid,
    pub source: usize,
    pub norm: PathNorm,
    /// Label of the aux kind the speed came from.
    pub kind: String,
    pub values: Vec<f64>,
}

#[derive(PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // Min-heap on distance, ties broken by the smaller node index.
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn stencil(dim: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let total = 3usize.pow(dim as u32);
    for mut k in 0..total {
        let mut s = vec![0i64; dim];
        for v in s.iter_mut().rev() {
            *v = (k % 3) as i64 - 1;
            k /= 3;
        }
        if s.iter().any(|&v| v != 0) {
            out.push(s);
        }
    }
    out
}

/// Single-source lattice geodesic distance with edge cost ½(m(a)+m(b))·|a−b|.
pub fn agmon_field(field: &AuxField, source: usize, norm: PathNorm) -> DistanceField {
    let g = &field.grid;
    let h = g.h();
    let npa = g.npa as i64;
    let moves: Vec<(Vec<i64>, f64)> = stencil(g.dim).into_iter().map(|s| {
        let len = norm.length(&s, h);
        (s, len)
    }).collect();
    let mut dist = vec![f64::INFINITY; g.len()];
    let mut done = vec![false; g.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry { dist: 0.0, node: source });
    let mut idx = vec![0i64; g.dim];
    while let Some(Entry { dist: du, node: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for (a, v) in g.multi(u).into_iter().enumerate() {
            idx[a] = v as i64;
        }
        'moves: for (s, len) in &moves {
            let mut v = 0usize;
            for a in 0..g.dim {
                let c = idx[a] + s[a];
                if c < 0 || c >= npa {
                    continue 'moves;
                }
                v = v * g.npa + c as usize;
            }
            if done[v] {
                continue;
            }
            let cand = du + 0.5 * (field.values[u] + field.values[v]) * len;
            if cand < dist[v] {
                dist[v] = cand;
                heap.push(Entry { dist: cand, node: v });
            }
        }
    }
    DistanceField { grid: *g, source, norm, kind: field.kind.label().to_string(), values: dist }
}

/// Result of the close-pair bound d(x, y) ≤ K̂·C₀ for |x−y|∞·m(x) ≤ C₀.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosePair {
    /// max d(x,y) / (|x−y|∞·m(x)) over qualifying pairs; d ≤ K̂·C₀ then holds for every C₀.
    pub k_hat: f64,
    pub c0_max: f64,
    pub pairs: usize,
}

/// Scans all nodes x within ℓ∞ distance c0_max/m(x) of the source y.
pub fn close_pair_check(field: &AuxField, dist: &DistanceField, c0_max: f64) -> ClosePair {
    let g = &field.grid;
    let y = g.point(dist.source);
    let mut k_hat: f64 = 0.0;
    let mut pairs = 0;
    for x in 0..g.len() {
        if x == dist.source {
            continue;
        }
        let sep = g.point(x).iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let t = sep * field.values[x];
        if t <= c0_max {
            pairs += 1;
            k_hat = k_hat.max(dist.values[x] / t);
        }
    }
    ClosePair { k_hat, c0_max, pairs }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_speed_is_exact_in_linf() {
        let g = Grid::new(3, 1.0, 9).unwrap();
        let c = 2.5;
        let f = AuxField::constant(g, 1, c);
        let src = g.index(&[4, 4, 4]);
        let d = agmon_field(&f, src, PathNorm::Linf);
        for x in 0..g.len() {
            let want = c * g.h() * g.steps_inf(x, src) as f64;
            assert!((d.values[x] - want).abs() <= 1e-12 * want.max(1.0));
        }
        let cp = close_pair_check(&f, &d, 4.0);
        assert!((cp.k_hat - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metrication_bound_exceeds_planar_worst_case() {
        let b = PathNorm::L2.metrication_bound();
        // The 2-D stencil alone reaches √(4−2√2) − 1.
        let two_d = (4.0 - 2.0 * 2f64.sqrt()).sqrt() - 1.0;
        assert!(b >= two_d && b < 0.2, "{b}");
    }

    #[test]
    fn euclidean_option_within_bound() {
        let g = Grid::new(3, 1.0, 11).unwrap();
        let f = AuxField::constant(g, 1, 1.0);
        let src = g.index(&[0, 0, 0]);
        let d = agmon_field(&f, src, PathNorm::L2);
        let bound = PathNorm::L2.metrication_bound();
        let y = g.point(src);
        for x in 0..g.len() {
            let e: f64 = g.point(x).iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(d.values[x] >= e * (1.0 - 1e-12) && d.values[x] <= e * (1.0 + bound) + 1e-12);
        }
    }

    #[test]
    fn distance_is_symmetric() {
        let g = Grid::new(3, 1.0, 7).unwrap();
        let values = (0..g.len()).map(|k| 1.0 + g.point(k).iter().map(|v| v * v).sum::<f64>()).collect();
        let f = AuxField { grid: g, d: 1, kind: super::super::AuxKind::Lower, values };
        let (a, b) = (3, 200);
        let da = agmon_field(&f, a, PathNorm::Linf);
        let db = agmon_field(&f, b, PathNorm::Linf);
        assert!((da.values[b] - db.values[a]).abs() <= 1e-12 * da.values[b]);
    }
}
