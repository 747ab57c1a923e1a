//! Small dense symmetric matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative eigenvalue tolerance below which a symmetric matrix still counts as PSD.
pub const TOL_EIG: f64 = 1e-10;

/// A dense `d x d` symmetric matrix stored row-major.
///
/// Both triangles are stored and kept bitwise equal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMat {
    d: usize,
    a: Vec<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for SymMat {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SymMat::from_rows(&rows)
    }
}

impl From<SymMat> for Vec<Vec<f64>> {
    fn from(m: SymMat) -> Self {
        (0..m.d).map(|i| m.row(i).to_vec()).collect()
    }
}

/// Eigendecomposition with eigenvalues ascending; `vectors[k]` pairs with `values[k]`.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl SymMat {
    pub fn zeros(d: usize) -> Self {
        SymMat { d, a: vec![0.0; d * d] }
    }

    pub fn identity(d: usize) -> Self {
        Self::scaled_identity(d, 1.0)
    }

    pub fn scaled_identity(d: usize, c: f64) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m.a[i * d + i] = c;
        }
        m
    }

    pub fn diag(v: &[f64]) -> Self {
        let d = v.len();
        let mut m = Self::zeros(d);
        for (i, &x) in v.iter().enumerate() {
            m.a[i * d + i] = x;
        }
        m
    }

    /// Builds from rows; the rows must be exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::Config("symmetric matrix must be square and non-empty".into()));
        }
        let mut a = Vec::with_capacity(d * d);
        for r in rows {
            a.extend_from_slice(r);
        }
        for i in 0..d {
            for j in 0..i {
                if a[i * d + j] != a[j * d + i] {
                    return Err(Error::Config(format!("matrix not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(SymMat { d, a })
    }

    /// Builds from the upper triangle of a row-major buffer, mirroring it down.
    pub fn from_upper(d: usize, buf: &[f64]) -> Self {
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            for j in i..d {
                let v = buf[i * d + j];
                a[i * d + j] = v;
                a[j * d + i] = v;
            }
        }
        SymMat { d, a }
    }

    /// Symmetrizes an arbitrary row-major buffer as (B + Bᵀ)/2.
    pub fn symmetrize(d: usize, buf: &[f64]) -> Self {
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            for j in i..d {
                let v = 0.5 * (buf[i * d + j] + buf[j * d + i]);
                a[i * d + j] = v;
                a[j * d + i] = v;
            }
        }
        SymMat { d, a }
    }

    pub fn from_fn(d: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            for j in i..d {
                let v = f(i, j);
                a[i * d + j] = v;
                a[j * d + i] = v;
            }
        }
        SymMat { d, a }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.d + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.d + j] = v;
        self.a[j * self.d + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.d..(i + 1) * self.d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.a
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.d).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn scale(&self, c: f64) -> Self {
        SymMat { d: self.d, a: self.a.iter().map(|x| x * c).collect() }
    }

    pub fn add(&self, o: &SymMat) -> Self {
        SymMat { d: self.d, a: self.a.iter().zip(&o.a).map(|(x, y)| x + y).collect() }
    }

    pub fn sub(&self, o: &SymMat) -> Self {
        SymMat { d: self.d, a: self.a.iter().zip(&o.a).map(|(x, y)| x - y).collect() }
    }

    pub fn trace(&self) -> f64 {
        (0..self.d).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.a.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.d).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// ⟨M e, e⟩.
    pub fn quad(&self, e: &[f64]) -> f64 {
        let d = self.d;
        let mut s = 0.0;
        for i in 0..d {
            let mut t = 0.0;
            for j in 0..d {
                t += self.a[i * d + j] * e[j];
            }
            s += t * e[i];
        }
        s
    }

    /// Plain row-major product `self * o` (not symmetric in general).
    pub fn matmul(&self, o: &SymMat) -> Vec<f64> {
        let d = self.d;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let x = self.a[i * d + k];
                for j in 0..d {
                    out[i * d + j] += x * o.a[k * d + j];
                }
            }
        }
        out
    }

    /// S·M·S for symmetric S, symmetrized to absorb rounding.
    pub fn sandwich(&self, s: &SymMat) -> SymMat {
        let sm = s.matmul(self);
        let d = self.d;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let x = sm[i * d + k];
                for j in 0..d {
                    out[i * d + j] += x * s.a[k * d + j];
                }
            }
        }
        SymMat::symmetrize(d, &out)
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.d, self.d, &self.a)
    }

    /// Full eigendecomposition, eigenvalues ascending.
    pub fn eigen(&self) -> Eigen {
        let d = self.d;
        if d == 1 {
            return Eigen { values: vec![self.a[0]], vectors: vec![vec![1.0]] };
        }
        if d == 2 {
            return eigen2(self.a[0], self.a[1], self.a[3]);
        }
        let se = self.to_nalgebra().symmetric_eigen();
        let mut idx: Vec<usize> = (0..d).collect();
        idx.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
        Eigen {
            values: idx.iter().map(|&k| se.eigenvalues[k]).collect(),
            vectors: idx.iter().map(|&k| se.eigenvectors.column(k).iter().copied().collect()).collect(),
        }
    }

    /// (λ_min, λ_max) without eigenvectors; closed form for d ≤ 2.
    pub fn eig_min_max(&self) -> (f64, f64) {
        match self.d {
            1 => (self.a[0], self.a[0]),
            2 => {
                let (lo, hi) = eig2_values(self.a[0], self.a[1], self.a[3]);
                (lo, hi)
            }
            _ => {
                let v = self.eigen().values;
                (v[0], v[self.d - 1])
            }
        }
    }

    pub fn lambda_min(&self) -> f64 {
        self.eig_min_max().0
    }

    pub fn lambda_max(&self) -> f64 {
        self.eig_min_max().1
    }

    /// Operator 2-norm.
    pub fn norm(&self) -> f64 {
        let (lo, hi) = self.eig_min_max();
        lo.abs().max(hi.abs())
    }

    pub fn det(&self) -> f64 {
        match self.d {
            1 => self.a[0],
            2 => self.a[0] * self.a[3] - self.a[1] * self.a[2],
            3 => {
                let a = &self.a;
                a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                    + a[2] * (a[3] * a[7] - a[4] * a[6])
            }
            _ => self.to_nalgebra().determinant(),
        }
    }

    fn psd_values(&self, op: &'static str) -> Result<Eigen> {
        let mut e = self.eigen();
        let hi = e.values[self.d - 1].abs().max(f64::MIN_POSITIVE);
        if e.values[0] < -TOL_EIG * hi {
            return Err(Error::NotPsd { op, lambda_min: e.values[0] });
        }
        for v in e.values.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(e)
    }

    pub fn is_psd(&self) -> bool {
        self.psd_values("is_psd").is_ok()
    }

    /// Rebuilds Σ f(λ_k) v_k v_kᵀ.
    fn spectral(d: usize, e: &Eigen, f: impl Fn(f64) -> f64) -> SymMat {
        let mut out = vec![0.0; d * d];
        for (k, &lam) in e.values.iter().enumerate() {
            let fl = f(lam);
            let v = &e.vectors[k];
            for i in 0..d {
                for j in i..d {
                    out[i * d + j] += fl * v[i] * v[j];
                }
            }
        }
        SymMat::from_upper(d, &out)
    }

    /// Matrix function applied to a PSD matrix after clamping tiny negative eigenvalues.
    pub fn psd_fn(&self, op: &'static str, f: impl Fn(f64) -> f64) -> Result<SymMat> {
        let e = self.psd_values(op)?;
        Ok(Self::spectral(self.d, &e, f))
    }

    pub fn sqrt_psd(&self) -> Result<SymMat> {
        if self.d == 2 {
            // Closed form: sqrt(M) = (M + sqrt(det) I) / sqrt(tr + 2 sqrt(det)).
            let (lo, hi) = eig2_values(self.a[0], self.a[1], self.a[3]);
            if lo < -TOL_EIG * hi.abs().max(f64::MIN_POSITIVE) {
                return Err(Error::NotPsd { op: "sqrt_psd", lambda_min: lo });
            }
            let s = (lo.max(0.0) * hi.max(0.0)).sqrt();
            let t = (self.a[0] + self.a[3] + 2.0 * s).max(0.0).sqrt();
            if t == 0.0 {
                return Ok(SymMat::zeros(2));
            }
            return Ok(SymMat::from_upper(2, &[(self.a[0] + s) / t, self.a[1] / t, 0.0, (self.a[3] + s) / t]));
        }
        self.psd_fn("sqrt_psd", f64::sqrt)
    }

    /// M^t for PSD M and t > 0.
    pub fn pow_psd(&self, t: f64) -> Result<SymMat> {
        if t == 1.0 {
            return Ok(self.clone());
        }
        if t == 0.5 {
            return self.sqrt_psd();
        }
        self.psd_fn("pow_psd", |l| if l > 0.0 { l.powf(t) } else { 0.0 })
    }

    /// Inverse of a positive definite matrix; adjugate formula for d ≤ 2.
    pub fn inv(&self) -> Result<SymMat> {
        let d = self.d;
        if d == 1 {
            if self.a[0] <= 0.0 {
                return Err(Error::degenerate("inv", "singular 1x1 matrix"));
            }
            return Ok(SymMat { d, a: vec![1.0 / self.a[0]] });
        }
        if d == 2 {
            let det = self.det();
            let (lo, hi) = eig2_values(self.a[0], self.a[1], self.a[3]);
            if lo < -TOL_EIG * hi.abs() {
                return Err(Error::NotPsd { op: "inv", lambda_min: lo });
            }
            if det <= 0.0 || lo <= 0.0 {
                return Err(Error::degenerate("inv", "singular matrix"));
            }
            return Ok(SymMat::from_upper(2, &[self.a[3] / det, -self.a[1] / det, 0.0, self.a[0] / det]));
        }
        let e = self.psd_values("inv")?;
        if e.values[0] <= 0.0 {
            return Err(Error::degenerate("inv", "singular matrix"));
        }
        Ok(Self::spectral(d, &e, |l| 1.0 / l))
    }

    /// M^{-1/2} for positive definite M.
    pub fn inv_sqrt(&self) -> Result<SymMat> {
        let e = self.psd_values("inv_sqrt")?;
        if e.values[0] <= 0.0 {
            return Err(Error::degenerate("inv_sqrt", "singular matrix"));
        }
        Ok(Self::spectral(self.d, &e, |l| 1.0 / l.sqrt()))
    }

    /// ln det M; -inf for singular PSD input.
    pub fn logdet(&self) -> Result<f64> {
        let e = self.psd_values("logdet")?;
        Ok(e.values.iter().map(|l| l.ln()).sum())
    }
}

fn eig2_values(a: f64, b: f64, c: f64) -> (f64, f64) {
    if b == 0.0 {
        return (a.min(c), a.max(c));
    }
    let m = 0.5 * (a + c);
    let q = (0.5 * (a - c)).hypot(b);
    let hi = m + q;
    let lo = if hi > 0.0 && m > 0.0 { (a * c - b * b) / hi } else { m - q };
    (lo, hi)
}

fn eigen2(a: f64, b: f64, c: f64) -> Eigen {
    let (lo, hi) = eig2_values(a, b, c);
    // Eigenvector of hi from the better-conditioned row of (M - hi I).
    let (v1, v2) = if b == 0.0 {
        if a >= c {
            ((1.0, 0.0), (0.0, 1.0))
        } else {
            ((0.0, 1.0), (1.0, 0.0))
        }
    } else {
        let r1 = (b, hi - a);
        let r2 = (hi - c, b);
        let v = if r1.0.hypot(r1.1) >= r2.0.hypot(r2.1) { r1 } else { r2 };
        let n = v.0.hypot(v.1);
        let v = (v.0 / n, v.1 / n);
        (v, (-v.1, v.0))
    };
    Eigen { values: vec![lo, hi], vectors: vec![vec![v2.0, v2.1], vec![v1.0, v1.1]] }
}

/// Orthonormality defect max |⟨e_i, e_j⟩ − δ_ij| of a frame.
pub fn frame_defect(basis: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, u) in basis.iter().enumerate() {
        for (j, v) in basis.iter().enumerate() {
            let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

/// Random orthonormal frame by Gram–Schmidt on Gaussian vectors.
pub fn random_frame<R: rand::Rng>(d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    use rand_distr::{Distribution, StandardNormal};
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(d);
    while out.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        // Two Gram-Schmidt passes keep the frame defect at rounding level.
        for _ in 0..2 {
            for u in &out {
                let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (x, y) in v.iter_mut().zip(u) {
                    *x -= dot * y;
                }
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            out.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    out
}

/// Uniform random unit vector.
pub fn random_unit<R: rand::Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Random PSD matrix GᵀG with Gaussian G of the given rank.
pub fn random_psd<R: rand::Rng>(d: usize, rank: usize, rng: &mut R) -> SymMat {
    use rand_distr::{Distribution, StandardNormal};
    let g: Vec<f64> = (0..rank * d).map(|_| StandardNormal.sample(rng)).collect();
    SymMat::from_fn(d, |i, j| (0..rank).map(|k| g[k * d + i] * g[k * d + j]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn sqrt_of_rank_one_block() {
        let m = SymMat::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let s = m.sqrt_psd().unwrap();
        let c = 1.0 / 2f64.sqrt();
        for (x, y) in s.as_slice().iter().zip([c, c, c, c]) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn sqrt_diag() {
        let s = SymMat::diag(&[4.0, 9.0]).sqrt_psd().unwrap();
        assert_eq!(s, SymMat::diag(&[2.0, 3.0]));
        assert_eq!(SymMat::identity(3).sqrt_psd().unwrap(), SymMat::identity(3));
    }

    #[test]
    fn sqrt_squares_back_for_d3() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let m = random_psd(3, 3, &mut rng);
            let s = m.sqrt_psd().unwrap();
            let ss = SymMat::symmetrize(3, &s.matmul(&s));
            assert!(ss.sub(&m).frobenius() <= 1e-12 * m.frobenius());
        }
    }

    #[test]
    fn not_psd_is_rejected() {
        let m = SymMat::diag(&[1.0, -0.5]);
        assert!(matches!(m.sqrt_psd(), Err(Error::NotPsd { .. })));
        assert!(matches!(m.logdet(), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn tiny_negative_eigenvalue_is_clamped() {
        let m = SymMat::diag(&[1.0, -1e-13, 2.0]);
        let s = m.sqrt_psd().unwrap();
        assert_eq!(s.get(1, 1), 0.0);
    }

    #[test]
    fn eigen2_matches_nalgebra() {
        let m = SymMat::from_rows(&[vec![2.0, -1.5], vec![-1.5, 0.25]]).unwrap();
        let e = m.eigen();
        let se = m.to_nalgebra().symmetric_eigen();
        let mut v: Vec<f64> = se.eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        assert!((e.values[0] - v[0]).abs() < 1e-14 && (e.values[1] - v[1]).abs() < 1e-14);
        for k in 0..2 {
            let mv = m.mul_vec(&e.vectors[k]);
            for i in 0..2 {
                assert!((mv[i] - e.values[k] * e.vectors[k][i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn inverse_and_logdet() {
        let m = SymMat::from_rows(&[vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 0.5], vec![0.0, 0.5, 2.0]]).unwrap();
        let p = SymMat::symmetrize(3, &m.matmul(&m.inv().unwrap()));
        assert!(p.sub(&SymMat::identity(3)).frobenius() < 1e-14);
        assert!((m.logdet().unwrap() - m.det().ln()).abs() < 1e-13);
    }

    #[test]
    fn serde_round_trip() {
        let m = SymMat::from_rows(&[vec![1.0, 2.0], vec![2.0, 5.0]]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[1.0,2.0],[2.0,5.0]]");
        let back: SymMat = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<SymMat>("[[1.0,2.0],[3.0,5.0]]").is_err());
    }
}
