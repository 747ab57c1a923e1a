use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The cube Q(center, r) with side 2r.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub center: Vec<f64>,
    pub r: f64,
}

impl Cube {
    pub fn new(center: Vec<f64>, r: f64) -> Self {
        Cube { center, r }
    }

    pub fn n(&self) -> usize {
        self.center.len()
    }

    pub fn volume(&self) -> f64 {
        (2.0 * self.r).powi(self.n() as i32)
    }

    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.center.iter().map(|c| c - self.r).collect(), self.center.iter().map(|c| c + self.r).collect())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.center.iter().zip(x).all(|(c, v)| (v - c).abs() <= self.r)
    }

    /// Inside the box [−l, l]ⁿ.
    pub fn inside_box(&self, l: f64) -> bool {
        let eps = 1e-12 * l;
        self.center.iter().all(|c| c - self.r >= -l - eps && c + self.r <= l + eps)
    }

    /// Deterministic per-cube seed, so results do not depend on family order.
    pub fn seed(&self, salt: u64) -> u64 {
        let mut h = salt ^ 0x9e37_79b9_7f4a_7c15;
        for v in self.center.iter().chain(std::iter::once(&self.r)) {
            h = splitmix(h ^ v.to_bits());
        }
        h
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A finite family of cubes inside the experiment box [−half_width, half_width]ⁿ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum CubeFamily {
    /// All dyadic cubes of levels 0..=depth tiling the box.
    Dyadic { half_width: f64, depth: u32 },
    /// `count` cubes per batch with log-uniform radii; batch j lowers r_min by 2^j.
    /// Refinement k is the union of batches 0..=k.
    Random { half_width: f64, count: usize, r_min: f64, r_max: f64, seed: u64, refinement: u32 },
}

impl CubeFamily {
    pub fn half_width(&self) -> f64 {
        match self {
            CubeFamily::Dyadic { half_width, .. } | CubeFamily::Random { half_width, .. } => *half_width,
        }
    }

    pub fn cubes(&self, n: usize) -> Vec<Cube> {
        match *self {
            CubeFamily::Dyadic { half_width, depth } => {
                let mut out = Vec::new();
                for level in 0..=depth {
                    let k = 1usize << level;
                    let r = half_width / k as f64;
                    let mut idx = vec![0usize; n];
                    loop {
                        let center = idx.iter().map(|&i| -half_width + (2 * i + 1) as f64 * r).collect();
                        out.push(Cube::new(center, r));
                        let mut a = 0;
                        while a < n {
                            idx[a] += 1;
                            if idx[a] < k {
                                break;
                            }
                            idx[a] = 0;
                            a += 1;
                        }
                        if a == n {
                            break;
                        }
                    }
                }
                out
            }
            CubeFamily::Random { half_width, count, r_min, r_max, seed, refinement } => {
                let mut out = Vec::new();
                for batch in 0..=refinement {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(batch as u64));
                    let lo = (r_min / 2f64.powi(batch as i32)).ln();
                    let hi = r_max.min(half_width).ln();
                    for _ in 0..count {
                        let r = (lo + (hi - lo) * rng.random::<f64>()).exp();
                        let center = (0..n).map(|_| (half_width - r) * (2.0 * rng.random::<f64>() - 1.0)).collect();
                        out.push(Cube::new(center, r));
                    }
                }
                out
            }
        }
    }

    /// The k-th nested refinement (k = 0 is `self`).
    pub fn refined(&self, k: u32) -> CubeFamily {
        match self.clone() {
            CubeFamily::Dyadic { half_width, depth } => CubeFamily::Dyadic { half_width, depth: depth + k },
            CubeFamily::Random { half_width, count, r_min, r_max, seed, refinement } => {
                CubeFamily::Random { half_width, count, r_min, r_max, seed, refinement: refinement + k }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_counts_and_containment() {
        let f = CubeFamily::Dyadic { half_width: 2.0, depth: 2 };
        let c = f.cubes(3);
        assert_eq!(c.len(), 1 + 8 + 64);
        assert!(c.iter().all(|q| q.inside_box(2.0)));
        let total: f64 = c.iter().filter(|q| q.r == 0.5).map(|q| q.volume()).sum();
        assert!((total - 64.0).abs() < 1e-12);
    }

    #[test]
    fn random_family_is_nested_and_inside() {
        let f = CubeFamily::Random { half_width: 3.0, count: 20, r_min: 0.1, r_max: 1.0, seed: 7, refinement: 0 };
        let a = f.cubes(3);
        let b = f.refined(2).cubes(3);
        assert_eq!(b.len(), 60);
        assert_eq!(&b[..20], &a[..]);
        assert!(b.iter().all(|q| q.inside_box(3.0) && q.r >= 0.1 / 4.0 - 1e-15 && q.r <= 1.0 + 1e-12));
    }

    #[test]
    fn cube_volume_and_seed() {
        let q = Cube::new(vec![1.0, 2.0, 3.0], 0.5);
        assert_eq!(q.volume(), 1.0);
        assert_eq!(q.seed(1), Cube::new(vec![1.0, 2.0, 3.0], 0.5).seed(1));
        assert_ne!(q.seed(1), Cube::new(vec![1.0, 2.0, 3.0], 0.25).seed(1));
    }
}
