//! Evaluable matrix weights with analytic descriptors.
//!
//! A [`MatrixWeight`] is a symmetric positive semidefinite `d x d` field on ℝⁿ.
//! Its JSON form is `{"kind": ..., "n": ..., "d": ..., "parameters": {...}}`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::SymMat;
use crate::poly::{mean_abs2_powers, Poly};

/// Scalar weights, used as diagonal entries and as derived scalar fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarWeight {
    /// c ≥ 0.
    Constant { c: f64 },
    /// a·|x|^γ with a > 0 and γ > −n.
    Power { a: f64, gamma: f64 },
    /// Σ_k c_k |x|^{2k} with c_k ≥ 0.
    Polynomial { coefs: Vec<f64> },
    /// λ_min of a matrix weight.
    MinEigen { of: Box<MatrixWeight> },
    /// λ_max of a matrix weight.
    MaxEigen { of: Box<MatrixWeight> },
    /// (det W)^{1/d}.
    DetRoot { of: Box<MatrixWeight> },
}

impl ScalarWeight {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ScalarWeight::Constant { c } => *c,
            ScalarWeight::Power { a, gamma } => a * norm2(x).powf(*gamma),
            ScalarWeight::Polynomial { coefs } => {
                let s = x.iter().map(|v| v * v).sum::<f64>();
                coefs.iter().rev().fold(0.0, |acc, c| acc * s + c)
            }
            ScalarWeight::MinEigen { of } => of.eval_unchecked(x).lambda_min().max(0.0),
            ScalarWeight::MaxEigen { of } => of.eval_unchecked(x).lambda_max(),
            ScalarWeight::DetRoot { of } => {
                let m = of.eval_unchecked(x);
                m.det().max(0.0).powf(1.0 / m.d() as f64)
            }
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            ScalarWeight::Constant { c } if *c < 0.0 || !c.is_finite() => {
                Err(Error::Config(format!("constant scalar weight must be >= 0, got {c}")))
            }
            ScalarWeight::Power { a, gamma } if *a <= 0.0 || *gamma <= -(n as f64) => Err(Error::Config(format!(
                "power scalar weight needs a > 0 and gamma > -n, got a={a}, gamma={gamma}"
            ))),
            ScalarWeight::Polynomial { coefs } if coefs.iter().any(|c| *c < 0.0) => {
                Err(Error::Config("polynomial scalar weight needs nonnegative coefficients".into()))
            }
            ScalarWeight::MinEigen { of } | ScalarWeight::MaxEigen { of } | ScalarWeight::DetRoot { of }
                if of.n != n =>
            {
                Err(Error::Config("derived scalar weight has mismatched dimension".into()))
            }
            _ => Ok(()),
        }
    }

    fn singular_at_origin(&self) -> bool {
        match self {
            ScalarWeight::Power { gamma, .. } => !is_even_nonneg_int(*gamma),
            ScalarWeight::MinEigen { of } | ScalarWeight::MaxEigen { of } | ScalarWeight::DetRoot { of } => {
                of.singular_at_origin()
            }
            _ => false,
        }
    }

    pub fn is_radial(&self) -> bool {
        match self {
            ScalarWeight::MinEigen { of } | ScalarWeight::MaxEigen { of } | ScalarWeight::DetRoot { of } => of.is_radial(),
            _ => true,
        }
    }

    fn kink_radii(&self) -> Vec<f64> {
        match self {
            ScalarWeight::MinEigen { of } | ScalarWeight::MaxEigen { of } | ScalarWeight::DetRoot { of } => of.kink_radii(),
            _ => Vec::new(),
        }
    }

    fn blows_up_at_origin(&self) -> bool {
        match self {
            ScalarWeight::Power { gamma, .. } => *gamma < 0.0,
            ScalarWeight::MinEigen { of } | ScalarWeight::MaxEigen { of } | ScalarWeight::DetRoot { of } => {
                of.blows_up_at_origin()
            }
            _ => false,
        }
    }

    fn exact_mean(&self, center: &[f64], r: f64) -> Option<f64> {
        match self {
            ScalarWeight::Constant { c } => Some(*c),
            ScalarWeight::Polynomial { coefs } => {
                let k = coefs.len().saturating_sub(1) as u32;
                let m = mean_abs2_powers(center, r, k);
                Some(coefs.iter().zip(&m).map(|(c, v)| c * v).sum())
            }
            ScalarWeight::Power { a, gamma } if is_even_nonneg_int(*gamma) => {
                let k = (*gamma / 2.0).round() as u32;
                Some(a * mean_abs2_powers(center, r, k)[k as usize])
            }
            _ => None,
        }
    }
}

fn is_even_nonneg_int(g: f64) -> bool {
    g >= 0.0 && (g / 2.0).fract() == 0.0
}

/// (r, 0, …, 0).
pub fn radial_point(n: usize, r: f64) -> Vec<f64> {
    let mut x = vec![0.0; n];
    x[0] = r;
    x
}

/// Sign changes of f on a log grid over [1e−8, 1e8], refined by bisection.
fn crossings(f: impl Fn(f64) -> f64) -> Vec<f64> {
    let steps = 1600;
    let at = |k: usize| 10f64.powf(-8.0 + 16.0 * k as f64 / steps as f64);
    let mut out = Vec::new();
    let mut prev = f(at(0));
    for k in 1..=steps {
        let cur = f(at(k));
        if prev == 0.0 {
            out.push(at(k - 1));
        } else if prev * cur < 0.0 {
            let (mut lo, mut hi) = (at(k - 1), at(k));
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if f(mid) * prev > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        prev = cur;
    }
    out
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// The analytic description of a matrix weight.
#[derive(Clone, Debug, PartialEq)]
pub enum Descriptor {
    Constant(SymMat),
    ScalarDiag(Vec<ScalarWeight>),
    /// Entries a_ij |x|^{γ_ij} with γ_ij = (γ_i + γ_j)/2.
    Power { a: SymMat, gamma: Vec<f64> },
    /// W = Pᵀ P for a k x d polynomial matrix P, PSD by construction.
    PolynomialPsd { factor: Vec<Vec<Poly>> },
    /// [[1, |x|²], [|x|², |x|⁴]].
    AppendixA,
    /// |V(x)|·I.
    NormDiag(Box<MatrixWeight>),
}

/// A symmetric PSD matrix field on ℝⁿ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightDoc", into = "WeightDoc")]
pub struct MatrixWeight {
    n: usize,
    d: usize,
    descriptor: Descriptor,
}

/// Serialized form of a weight.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightDoc {
    pub kind: String,
    pub n: usize,
    pub d: usize,
    #[serde(default)]
    pub parameters: Value,
}

#[derive(Serialize, Deserialize)]
struct ConstantParams {
    matrix: SymMat,
}
#[derive(Serialize, Deserialize)]
struct DiagParams {
    entries: Vec<ScalarWeight>,
}
#[derive(Serialize, Deserialize)]
struct PowerParams {
    a: SymMat,
    gamma: Vec<f64>,
}
#[derive(Serialize, Deserialize)]
struct PolyParams {
    factor: Vec<Vec<Poly>>,
}
#[derive(Serialize, Deserialize)]
struct NormDiagParams {
    base: Box<MatrixWeight>,
}

fn params<T: serde::de::DeserializeOwned>(kind: &str, v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::Config(format!("bad parameters for weight kind '{kind}': {e}")))
}

impl TryFrom<WeightDoc> for MatrixWeight {
    type Error = Error;
    fn try_from(doc: WeightDoc) -> Result<Self> {
        let descriptor = match doc.kind.as_str() {
            "constant" => Descriptor::Constant(params::<ConstantParams>(&doc.kind, doc.parameters)?.matrix),
            "scalar_diag" => Descriptor::ScalarDiag(params::<DiagParams>(&doc.kind, doc.parameters)?.entries),
            "power" => {
                let p: PowerParams = params(&doc.kind, doc.parameters)?;
                Descriptor::Power { a: p.a, gamma: p.gamma }
            }
            "polynomial_psd" => {
                Descriptor::PolynomialPsd { factor: params::<PolyParams>(&doc.kind, doc.parameters)?.factor }
            }
            "appendix_a" => Descriptor::AppendixA,
            "norm_diag" => Descriptor::NormDiag(params::<NormDiagParams>(&doc.kind, doc.parameters)?.base),
            other => return Err(Error::Config(format!("unknown weight kind '{other}'"))),
        };
        MatrixWeight::new(doc.n, doc.d, descriptor)
    }
}

impl From<MatrixWeight> for WeightDoc {
    fn from(w: MatrixWeight) -> Self {
        let (kind, parameters) = match w.descriptor {
            Descriptor::Constant(m) => ("constant", serde_json::to_value(ConstantParams { matrix: m })),
            Descriptor::ScalarDiag(e) => ("scalar_diag", serde_json::to_value(DiagParams { entries: e })),
            Descriptor::Power { a, gamma } => ("power", serde_json::to_value(PowerParams { a, gamma })),
            Descriptor::PolynomialPsd { factor } => ("polynomial_psd", serde_json::to_value(PolyParams { factor })),
            Descriptor::AppendixA => ("appendix_a", Ok(Value::Object(Default::default()))),
            Descriptor::NormDiag(base) => ("norm_diag", serde_json::to_value(NormDiagParams { base })),
        };
        WeightDoc { kind: kind.into(), n: w.n, d: w.d, parameters: parameters.expect("weight parameters serialize") }
    }
}

impl MatrixWeight {
    /// Validates the descriptor against (n, d).
    pub fn new(n: usize, d: usize, descriptor: Descriptor) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Config("weight needs n >= 1 and d >= 1".into()));
        }
        match &descriptor {
            Descriptor::Constant(m) => {
                if m.d() != d || !m.is_psd() {
                    return Err(Error::Config("constant weight must be a PSD d x d matrix".into()));
                }
            }
            Descriptor::ScalarDiag(e) => {
                if e.len() != d {
                    return Err(Error::Config(format!("scalar_diag needs {d} entries, got {}", e.len())));
                }
                for s in e {
                    s.validate(n)?;
                }
            }
            Descriptor::Power { a, gamma } => {
                if a.d() != d || gamma.len() != d {
                    return Err(Error::Config("power weight needs a d x d matrix and d exponents".into()));
                }
                if a.lambda_min() <= 0.0 {
                    return Err(Error::Config("power weight matrix must be positive definite".into()));
                }
                if gamma.iter().any(|g| *g <= -(n as f64)) {
                    return Err(Error::Config("power weight exponents must exceed -n".into()));
                }
            }
            Descriptor::PolynomialPsd { factor } => {
                if factor.is_empty() || factor.iter().any(|row| row.len() != d) {
                    return Err(Error::Config("polynomial_psd factor must be k x d".into()));
                }
                if factor.iter().flatten().flat_map(|p| &p.terms).any(|m| m.exps.len() != n) {
                    return Err(Error::Config("polynomial_psd monomials must have n exponents".into()));
                }
            }
            Descriptor::AppendixA => {
                if d != 2 {
                    return Err(Error::Config("appendix_a weight is 2 x 2".into()));
                }
            }
            Descriptor::NormDiag(base) => {
                if base.n != n || base.d != d {
                    return Err(Error::Config("norm_diag base must share n and d".into()));
                }
            }
        }
        Ok(MatrixWeight { n, d, descriptor })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn descriptor(&self) -> &Descriptor {
        &self.descriptor
    }

    pub fn constant(n: usize, m: SymMat) -> Result<Self> {
        let d = m.d();
        Self::new(n, d, Descriptor::Constant(m))
    }

    pub fn identity(n: usize, d: usize) -> Self {
        Self::constant(n, SymMat::identity(d)).expect("identity is a valid weight")
    }

    pub fn scalar_diag(n: usize, entries: Vec<ScalarWeight>) -> Result<Self> {
        let d = entries.len();
        Self::new(n, d, Descriptor::ScalarDiag(entries))
    }

    /// A scalar weight viewed as a 1 x 1 matrix weight.
    pub fn scalar(n: usize, s: ScalarWeight) -> Result<Self> {
        Self::scalar_diag(n, vec![s])
    }

    pub fn power(n: usize, a: SymMat, gamma: Vec<f64>) -> Result<Self> {
        let d = a.d();
        Self::new(n, d, Descriptor::Power { a, gamma })
    }

    pub fn polynomial_psd(n: usize, factor: Vec<Vec<Poly>>) -> Result<Self> {
        let d = factor.first().map(|r| r.len()).unwrap_or(0);
        Self::new(n, d, Descriptor::PolynomialPsd { factor })
    }

    pub fn appendix_a(n: usize) -> Self {
        Self::new(n, 2, Descriptor::AppendixA).expect("appendix_a is valid")
    }

    pub fn norm_diag(base: &MatrixWeight) -> Self {
        Self::new(base.n, base.d, Descriptor::NormDiag(Box::new(base.clone()))).expect("norm_diag of a valid weight")
    }

    /// diag(|x|², |x|⁴).
    pub fn diag_x2_x4(n: usize) -> Self {
        Self::scalar_diag(
            n,
            vec![
                ScalarWeight::Polynomial { coefs: vec![0.0, 1.0] },
                ScalarWeight::Polynomial { coefs: vec![0.0, 0.0, 1.0] },
            ],
        )
        .expect("valid diagonal weight")
    }

    /// The power weight with A = [[1, 1/2], [1/2, 1]] and γ = (1, 3).
    pub fn power_1_3(n: usize) -> Self {
        let a = SymMat::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).expect("symmetric");
        Self::power(n, a, vec![1.0, 3.0]).expect("valid power weight")
    }

    /// Catalog used by the cross-consistency experiments, in a fixed order.
    pub fn catalog(n: usize) -> Vec<(&'static str, MatrixWeight)> {
        vec![
            ("identity", Self::identity(n, 2)),
            ("power_1_3", Self::power_1_3(n)),
            ("diag_x2_x4", Self::diag_x2_x4(n)),
            ("appendix_a", Self::appendix_a(n)),
        ]
    }

    /// True if the weight is not smooth at the origin (power-type exponents).
    pub fn singular_at_origin(&self) -> bool {
        match &self.descriptor {
            Descriptor::Power { gamma, .. } => gamma
                .iter()
                .any(|gi| gamma.iter().any(|gj| !is_even_nonneg_int(0.5 * (gi + gj)))),
            Descriptor::ScalarDiag(e) => e.iter().any(|s| s.singular_at_origin()),
            Descriptor::NormDiag(b) => b.singular_at_origin() || b.d > 1,
            _ => false,
        }
    }

    /// True if W(x) depends on |x| only.
    pub fn is_radial(&self) -> bool {
        match &self.descriptor {
            Descriptor::ScalarDiag(e) => e.iter().all(|s| s.is_radial()),
            Descriptor::PolynomialPsd { .. } => false,
            Descriptor::NormDiag(b) => b.is_radial(),
            _ => true,
        }
    }

    /// Radii where two diagonal entries of a radial weight cross; there functions of
    /// W such as λ_min or |W| have a kink.
    pub fn kink_radii(&self) -> Vec<f64> {
        let mut out = match &self.descriptor {
            Descriptor::ScalarDiag(e) => {
                let mut k: Vec<f64> = e.iter().flat_map(|s| s.kink_radii()).collect();
                let n = self.n;
                for i in 0..e.len() {
                    for j in i + 1..e.len() {
                        k.extend(crossings(|r| e[i].eval(&radial_point(n, r)) - e[j].eval(&radial_point(n, r))));
                    }
                }
                k
            }
            Descriptor::Power { a, gamma } => {
                let mut k = Vec::new();
                for i in 0..self.d {
                    for j in i + 1..self.d {
                        if a.get(i, j) == 0.0 && gamma[i] != gamma[j] {
                            let r = (a.get(j, j) / a.get(i, i)).powf(1.0 / (gamma[i] - gamma[j]));
                            if r.is_finite() && r > 0.0 {
                                k.push(r);
                            }
                        }
                    }
                }
                k
            }
            Descriptor::NormDiag(b) => b.kink_radii(),
            _ => Vec::new(),
        };
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());
        out
    }

    /// True if some entry is unbounded near the origin.
    pub fn blows_up_at_origin(&self) -> bool {
        match &self.descriptor {
            Descriptor::Power { gamma, .. } => gamma.iter().any(|g| *g < 0.0),
            Descriptor::ScalarDiag(e) => e.iter().any(|s| s.blows_up_at_origin()),
            Descriptor::NormDiag(b) => b.blows_up_at_origin(),
            _ => false,
        }
    }

    /// Evaluates W(x), refusing the origin for negative exponents.
    pub fn eval(&self, x: &[f64]) -> Result<SymMat> {
        if x.len() != self.n {
            return Err(Error::domain("eval", format!("point has dimension {}, weight has n = {}", x.len(), self.n)));
        }
        if self.blows_up_at_origin() && x.iter().all(|v| *v == 0.0) {
            return Err(Error::domain("eval", "negative power exponent evaluated at the origin"));
        }
        Ok(self.eval_unchecked(x))
    }

    /// Evaluation without the domain check; the hot path for quadrature.
    pub fn eval_unchecked(&self, x: &[f64]) -> SymMat {
        let mut buf = vec![0.0; self.d * self.d];
        self.eval_into(x, &mut buf);
        SymMat::from_upper(self.d, &buf)
    }

    /// Writes the upper triangle (row-major, full d x d buffer) of W(x).
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.d;
        match &self.descriptor {
            Descriptor::Constant(m) => out.copy_from_slice(m.as_slice()),
            Descriptor::ScalarDiag(e) => {
                out.iter_mut().for_each(|v| *v = 0.0);
                for (i, s) in e.iter().enumerate() {
                    out[i * d + i] = s.eval(x);
                }
            }
            Descriptor::Power { a, gamma } => {
                let rho = norm2(x);
                let lr = rho.ln();
                for i in 0..d {
                    for j in i..d {
                        let g = 0.5 * (gamma[i] + gamma[j]);
                        let f = if g == 0.0 {
                            1.0
                        } else if rho == 0.0 {
                            if g > 0.0 {
                                0.0
                            } else {
                                f64::INFINITY
                            }
                        } else {
                            (g * lr).exp()
                        };
                        out[i * d + j] = a.get(i, j) * f;
                    }
                }
            }
            Descriptor::PolynomialPsd { factor } => {
                let vals: Vec<Vec<f64>> = factor.iter().map(|row| row.iter().map(|p| p.eval(x)).collect()).collect();
                for i in 0..d {
                    for j in i..d {
                        out[i * d + j] = vals.iter().map(|row| row[i] * row[j]).sum();
                    }
                }
            }
            Descriptor::AppendixA => {
                let s = x.iter().map(|v| v * v).sum::<f64>();
                out[0] = 1.0;
                out[1] = s;
                out[2] = s;
                out[3] = s * s;
            }
            Descriptor::NormDiag(base) => {
                let v = base.eval_unchecked(x).lambda_max();
                out.iter_mut().for_each(|o| *o = 0.0);
                for i in 0..d {
                    out[i * d + i] = v;
                }
            }
        }
    }

    /// Exact cube mean when the weight is polynomial (or constant).
    pub fn exact_mean(&self, center: &[f64], r: f64) -> Option<SymMat> {
        let d = self.d;
        match &self.descriptor {
            Descriptor::Constant(m) => Some(m.clone()),
            Descriptor::ScalarDiag(e) => {
                let v: Option<Vec<f64>> = e.iter().map(|s| s.exact_mean(center, r)).collect();
                v.map(|v| SymMat::diag(&v))
            }
            Descriptor::Power { a, gamma } => {
                let mut buf = vec![0.0; d * d];
                for i in 0..d {
                    for j in i..d {
                        let g = 0.5 * (gamma[i] + gamma[j]);
                        if !is_even_nonneg_int(g) {
                            return None;
                        }
                        let k = (g / 2.0).round() as u32;
                        buf[i * d + j] = a.get(i, j) * mean_abs2_powers(center, r, k)[k as usize];
                    }
                }
                Some(SymMat::from_upper(d, &buf))
            }
            Descriptor::PolynomialPsd { factor } => {
                let mut buf = vec![0.0; d * d];
                for i in 0..d {
                    for j in i..d {
                        let mut p = Poly::default();
                        for row in factor {
                            p = p.add(&row[i].mul(&row[j]));
                        }
                        buf[i * d + j] = p.cube_mean(center, r);
                    }
                }
                Some(SymMat::from_upper(d, &buf))
            }
            Descriptor::AppendixA => {
                let m = mean_abs2_powers(center, r, 2);
                Some(SymMat::from_upper(2, &[1.0, m[1], 0.0, m[2]]))
            }
            Descriptor::NormDiag(_) => None,
        }
    }

    /// V(x)^{-1} = (a^{ij} |x|^{-γ_ij}) for power weights.
    pub fn inv_power_weight(&self, x: &[f64]) -> Result<SymMat> {
        let Descriptor::Power { a, gamma } = &self.descriptor else {
            return Err(Error::domain("inv_power_weight", "weight is not a power weight"));
        };
        let rho = norm2(x);
        if rho == 0.0 {
            return Err(Error::domain("inv_power_weight", "x = 0"));
        }
        let ai = a.inv()?;
        Ok(SymMat::from_fn(self.d, |i, j| ai.get(i, j) * rho.powf(-0.5 * (gamma[i] + gamma[j]))))
    }

    /// The weight with every value replaced by its t-th matrix power.
    pub fn eval_pow(&self, x: &[f64], t: f64) -> Result<SymMat> {
        self.eval_unchecked(x).pow_psd(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn appendix_a_at_unit_point() {
        let w = MatrixWeight::appendix_a(3);
        let v = w.eval(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(v, SymMat::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap());
    }

    #[test]
    fn power_with_zero_exponents_is_constant() {
        let a = SymMat::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let w = MatrixWeight::power(3, a.clone(), vec![0.0, 0.0]).unwrap();
        assert_eq!(w.eval(&[0.3, -2.0, 5.0]).unwrap(), a);
        assert_eq!(w.eval(&[0.0, 0.0, 0.0]).unwrap(), a);
    }

    #[test]
    fn scalar_diag_substitution() {
        let w = MatrixWeight::diag_x2_x4(3);
        assert_eq!(w.eval(&[2.0, 0.0, 0.0]).unwrap(), SymMat::diag(&[4.0, 16.0]));
    }

    #[test]
    fn negative_exponent_refuses_origin() {
        let w = MatrixWeight::scalar(3, ScalarWeight::Power { a: 1.0, gamma: -1.0 }).unwrap();
        assert!(matches!(w.eval(&[0.0, 0.0, 0.0]), Err(Error::Domain { .. })));
        assert!(w.eval(&[0.0, 1.0, 0.0]).is_ok());
    }

    #[test]
    fn inverse_power_weight_identity_case() {
        let w = MatrixWeight::power(3, SymMat::identity(2), vec![1.0, 3.0]).unwrap();
        let x = [0.5, 1.0, -2.0];
        let rho = norm2(&x);
        let inv = w.inv_power_weight(&x).unwrap();
        assert!((inv.get(0, 0) - rho.powf(-1.0)).abs() < 1e-15);
        assert!((inv.get(1, 1) - rho.powf(-3.0)).abs() < 1e-15);
        assert_eq!(inv.get(0, 1), 0.0);
        assert!(matches!(w.inv_power_weight(&[0.0; 3]), Err(Error::Domain { .. })));
    }

    #[test]
    fn inverse_power_weight_product() {
        let w = MatrixWeight::power_1_3(3);
        let x = [1.0, 1.0, 1.0];
        let p = SymMat::symmetrize(2, &w.eval(&x).unwrap().matmul(&w.inv_power_weight(&x).unwrap()));
        assert!(p.sub(&SymMat::identity(2)).frobenius() < 1e-10);
    }

    #[test]
    fn inverse_constant_power_weight() {
        let a = SymMat::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let w = MatrixWeight::power(3, a.clone(), vec![0.0, 0.0]).unwrap();
        let inv = w.inv_power_weight(&[1.0, 2.0, 0.0]).unwrap();
        assert!(inv.sub(&a.inv().unwrap()).frobenius() < 1e-15);
    }

    #[test]
    fn norm_diag_is_lambda_max_identity() {
        let base = MatrixWeight::appendix_a(3);
        let w = MatrixWeight::norm_diag(&base);
        let x = [0.5, 1.0, 0.2];
        let lam = base.eval(&x).unwrap().lambda_max();
        assert_eq!(w.eval(&x).unwrap(), SymMat::diag(&[lam, lam]));
    }

    #[test]
    fn json_round_trip_for_catalog() {
        for (_, w) in MatrixWeight::catalog(3).into_iter().chain([("nd", MatrixWeight::norm_diag(&MatrixWeight::power_1_3(3)))]) {
            let s = serde_json::to_string(&w).unwrap();
            let back: MatrixWeight = serde_json::from_str(&s).unwrap();
            assert_eq!(back, w);
        }
        let doc = r#"{"kind":"appendix_a","n":3,"d":2}"#;
        let w: MatrixWeight = serde_json::from_str(doc).unwrap();
        assert_eq!(w, MatrixWeight::appendix_a(3));
        assert!(serde_json::from_str::<MatrixWeight>(r#"{"kind":"appendix_a","n":3,"d":3}"#).is_err());
        assert!(serde_json::from_str::<MatrixWeight>(r#"{"kind":"nope","n":3,"d":2}"#).is_err());
    }

    #[test]
    fn exact_means_agree_with_polynomial_psd_form() {
        // Appendix-A weight written as PᵀP with P = [1, |x|²].
        let p = vec![vec![Poly::constant(3, 1.0), Poly::abs2_pow(3, 1)]];
        let w = MatrixWeight::polynomial_psd(3, p).unwrap();
        let a = MatrixWeight::appendix_a(3);
        let c = [0.4, -1.0, 2.5];
        let x = w.exact_mean(&c, 0.8).unwrap();
        let y = a.exact_mean(&c, 0.8).unwrap();
        assert!(x.sub(&y).frobenius() < 1e-12 * y.frobenius());
        assert_eq!(w.eval(&c).unwrap(), a.eval(&c).unwrap());
    }
}
