//! Multivariate polynomials and their exact averages over axis-aligned cubes.

use serde::{Deserialize, Serialize};

/// One monomial `coef · ∏ x_j^{exps[j]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub exps: Vec<u32>,
}

/// A polynomial on ℝⁿ as a sum of monomials.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly {
    pub terms: Vec<Monomial>,
}

impl Poly {
    pub fn constant(n: usize, c: f64) -> Self {
        Poly { terms: vec![Monomial { coef: c, exps: vec![0; n] }] }
    }

    /// |x|^{2k} expanded into monomials.
    pub fn abs2_pow(n: usize, k: u32) -> Self {
        let mut p = Poly::constant(n, 1.0);
        for _ in 0..k {
            let mut s = Poly::default();
            for j in 0..n {
                let mut e = vec![0; n];
                e[j] = 2;
                s.terms.push(Monomial { coef: 1.0, exps: e });
            }
            p = p.mul(&s);
        }
        p
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|m| m.coef * m.exps.iter().zip(x).map(|(&e, &xi)| xi.powi(e as i32)).product::<f64>())
            .sum()
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut out: Vec<Monomial> = Vec::new();
        for a in &self.terms {
            for b in &o.terms {
                let exps: Vec<u32> = a.exps.iter().zip(&b.exps).map(|(x, y)| x + y).collect();
                let coef = a.coef * b.coef;
                match out.iter_mut().find(|m| m.exps == exps) {
                    Some(m) => m.coef += coef,
                    None => out.push(Monomial { coef, exps }),
                }
            }
        }
        Poly { terms: out }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut out = self.terms.clone();
        for b in &o.terms {
            match out.iter_mut().find(|m| m.exps == b.exps) {
                Some(m) => m.coef += b.coef,
                None => out.push(b.clone()),
            }
        }
        Poly { terms: out }
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.iter().map(|m| m.exps.iter().sum::<u32>()).max().unwrap_or(0)
    }

    /// Exact mean over the cube with the given center and half-side.
    pub fn cube_mean(&self, center: &[f64], r: f64) -> f64 {
        let kmax = self.terms.iter().flat_map(|m| m.exps.iter().copied()).max().unwrap_or(0);
        let tables: Vec<Vec<f64>> = center.iter().map(|&c| mean_powers_1d(c, r, kmax)).collect();
        self.terms
            .iter()
            .map(|m| m.coef * m.exps.iter().enumerate().map(|(j, &e)| tables[j][e as usize]).product::<f64>())
            .sum()
    }
}

/// E[(x + r t)^k] for t uniform on [−1, 1], k = 0..=kmax.
///
/// Only even powers of t survive, so every term of the sum has the sign of x^{k−l}.
pub fn mean_powers_1d(x: f64, r: f64, kmax: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(kmax as usize + 1);
    for k in 0..=kmax {
        let mut s = 0.0;
        let mut binom = 1.0;
        for l in 0..=k {
            if l % 2 == 0 {
                s += binom * x.powi((k - l) as i32) * r.powi(l as i32) / (l as f64 + 1.0);
            }
            binom = binom * (k - l) as f64 / (l + 1) as f64;
        }
        out.push(s);
    }
    out
}

/// E[|y|^{2k}] over Q(center, r), k = 0..=kmax.
pub fn mean_abs2_powers(center: &[f64], r: f64, kmax: u32) -> Vec<f64> {
    // Moments of S_m = y_1² + … + y_m², built one coordinate at a time.
    let mut acc = vec![0.0; kmax as usize + 1];
    acc[0] = 1.0;
    for &c in center {
        let one = mean_powers_1d(c, r, 2 * kmax);
        let s: Vec<f64> = (0..=kmax as usize).map(|a| one[2 * a]).collect();
        let mut next = vec![0.0; kmax as usize + 1];
        for a in 0..=kmax as usize {
            let mut binom = 1.0;
            let mut t = 0.0;
            for b in 0..=a {
                t += binom * acc[b] * s[a - b];
                binom = binom * (a - b) as f64 / (b + 1) as f64;
            }
            next[a] = t;
        }
        acc = next;
    }
    acc
}
