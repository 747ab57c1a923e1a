//! Cubes, quadrature of matrix fields, the averaged matrix Ψ, reducing matrices and
//! the determinant inequalities (matrix Jensen, Hadamard).

mod family;
pub mod mvee;
pub mod quad;
pub mod radial;

pub use family::{Cube, CubeFamily};
pub use quad::{Integral, QuadratureRule, Scheme, MAX_LEVEL, QUAD_TOL};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{random_unit, SymMat};
use crate::weights::MatrixWeight;

/// The singular point handed to the quadrature, if the weight has one.
pub fn singular_point(w: &MatrixWeight) -> Option<Vec<f64>> {
    w.singular_at_origin().then(|| vec![0.0; w.n()])
}

/// Mean over `q` of an m-valued integrand.
pub fn mean_fn(
    op: &'static str,
    f: &dyn Fn(&[f64], &mut [f64]),
    q: &Cube,
    singular: Option<&[f64]>,
    rule: &QuadratureRule,
    m: usize,
) -> Result<Integral> {
    let (lo, hi) = q.bounds();
    let mut out = quad::integrate(op, f, &lo, &hi, singular, rule, m)?;
    let vol = q.volume();
    out.value.iter_mut().for_each(|v| *v /= vol);
    Ok(out)
}

/// Mean over `q` of an integrand that depends on x only through W(x).
///
/// Radial weights in three dimensions use the edge-integral reduction in
/// [`radial`]; everything else uses the tensor rule, graded toward the origin when
/// the weight is singular there or the integrand is a nonlinear function of W.
pub fn weight_mean(
    op: &'static str,
    w: &MatrixWeight,
    f: &dyn Fn(&[f64], &mut [f64]),
    q: &Cube,
    rule: &QuadratureRule,
    nonlinear: bool,
    m: usize,
) -> Result<Integral> {
    if let crate::weights::Descriptor::Constant(_) = w.descriptor() {
        let mut value = vec![0.0; m];
        f(&q.center, &mut value);
        return Ok(Integral { value, divergent: false });
    }
    if w.n() == 3 && w.is_radial() {
        let breaks = w.kink_radii();
        let graded = nonlinear || w.singular_at_origin();
        let g = |s: f64, out: &mut [f64]| f(&[s, 0.0, 0.0], out);
        let (lo, hi) = q.bounds();
        let run = |level: u32| radial::radial_box_integral(&g, &breaks, graded, &lo, &hi, level, m);
        let mut out = quad::adapt(op, &run, rule)?;
        let vol = q.volume();
        out.value.iter_mut().for_each(|v| *v /= vol);
        return Ok(out);
    }
    let sing = (nonlinear || w.singular_at_origin()).then(|| vec![0.0; w.n()]);
    mean_fn(op, f, q, sing.as_deref(), rule, m)
}

/// ⨍_Q W.
pub fn average(w: &MatrixWeight, q: &Cube, rule: &QuadratureRule) -> Result<SymMat> {
    if q.center.len() != w.n() {
        return Err(Error::domain("average", "cube dimension differs from the weight's n"));
    }
    if rule.use_exact {
        if let Some(m) = w.exact_mean(&q.center, q.r) {
            return Ok(m);
        }
    }
    let d = w.d();
    let f = |x: &[f64], out: &mut [f64]| w.eval_into(x, out);
    let res = weight_mean("average", w, &f, q, rule, false, d * d)?;
    if res.divergent {
        return Err(Error::QuadratureNonConvergence { op: "average", level: rule.level, change: f64::INFINITY });
    }
    Ok(SymMat::from_upper(d, &res.value))
}

/// Ψ(x, r; W) = r^{2−n} ∫_{Q(x,r)} W.
pub fn psi(w: &MatrixWeight, x: &[f64], r: f64, rule: &QuadratureRule) -> Result<SymMat> {
    let n = w.n();
    if n < 3 {
        return Err(Error::domain("psi", format!("averaged matrix needs n >= 3, weight has n = {n}")));
    }
    if r <= 0.0 {
        return Err(Error::domain("psi", format!("radius must be positive, got {r}")));
    }
    let q = Cube::new(x.to_vec(), r);
    let avg = average(w, &q, rule)?;
    Ok(avg.scale(psi_scale(n, r)))
}

/// (2r)ⁿ r^{2−n} = 2ⁿ r².
pub fn psi_scale(n: usize, r: f64) -> f64 {
    2f64.powi(n as i32) * r * r
}

/// Unit directions used to sample direction-dependent norms.
pub fn sample_directions(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    if d == 1 {
        return vec![vec![1.0]];
    }
    if d == 2 {
        return (0..count)
            .map(|k| {
                let t = std::f64::consts::PI * (k as f64 + 0.5) / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_unit(d, &mut rng)).collect()
}

/// ⨍_Q |W^{1/p} e|^p for each direction e.
pub fn directional_norms(
    w: &MatrixWeight,
    q: &Cube,
    p: f64,
    dirs: &[Vec<f64>],
    rule: &QuadratureRule,
) -> Result<Integral> {
    let d = w.d();
    let f = |x: &[f64], out: &mut [f64]| {
        let root = w.eval_unchecked(x).pow_psd(1.0 / p).unwrap_or_else(|_| SymMat::zeros(d));
        for (o, e) in out.iter_mut().zip(dirs) {
            let v = root.mul_vec(e);
            let len = v.iter().map(|t| t * t).sum::<f64>().sqrt();
            *o = len.powf(p);
        }
    };
    weight_mean("reducing_matrix", w, &f, q, rule, true, dirs.len())
}

/// Matrix R with |Re| within [ρ(e), √d ρ(e)] on the sampled directions, where
/// ρ(e)^p is the given directional mean. Fits the John ellipsoid of the sampled unit ball.
pub fn john_matrix(dirs: &[Vec<f64>], rho: &[f64]) -> Result<SymMat> {
    let d = dirs[0].len();
    if rho.iter().any(|r| !(*r > 1e-300) || !r.is_finite()) {
        return Err(Error::degenerate("reducing_matrix", "norm functional vanishes or is infinite in a sampled direction"));
    }
    let pts: Vec<Vec<f64>> = dirs.iter().zip(rho).map(|(e, r)| e.iter().map(|v| v / r).collect()).collect();
    let shape = mvee::mvee_centered(&pts, 1e-6);
    Ok(shape.sqrt_psd()?.scale((d as f64).sqrt()))
}

/// Reducing matrix R_Q^p(W) of the norm e ↦ (⨍_Q |W^{1/p}e|^p)^{1/p}.
pub fn reducing_matrix(w: &MatrixWeight, q: &Cube, p: f64, rule: &QuadratureRule) -> Result<SymMat> {
    if p < 1.0 {
        return Err(Error::domain("reducing_matrix", format!("exponent must be >= 1, got {p}")));
    }
    if p == 2.0 {
        let avg = average(w, q, rule)?;
        if avg.lambda_min() <= 0.0 {
            return Err(Error::degenerate("reducing_matrix", "average is singular"));
        }
        return avg.sqrt_psd();
    }
    let d = w.d();
    let dirs = sample_directions(d, 64 * d, q.seed(0x5eed));
    let res = directional_norms(w, q, p, &dirs, rule)?;
    let rho: Vec<f64> =
        res.value.iter().map(|v| if res.divergent { f64::INFINITY } else { v.powf(1.0 / p) }).collect();
    john_matrix(&dirs, &rho)
}

#[derive(Clone, Debug, Serialize)]
pub struct JensenCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// det ⨍W ≥ exp(⨍ ln det W).
pub fn check_matrix_jensen(w: &MatrixWeight, q: &Cube, rule: &QuadratureRule) -> Result<JensenCheck> {
    let lhs = average(w, q, rule)?.det();
    let f = |x: &[f64], out: &mut [f64]| {
        let det = w.eval_unchecked(x).det();
        out[0] = if det > 0.0 { det.ln() } else { f64::NAN };
    };
    let res = weight_mean("check_matrix_jensen", w, &f, q, rule, true, 1);
    let mean_log = match res {
        Ok(r) if r.value[0].is_nan() => return Err(Error::domain("check_matrix_jensen", "det W <= 0 at a quadrature node")),
        Ok(r) => r.value[0],
        Err(e) => return Err(e),
    };
    let rhs = mean_log.exp();
    Ok(JensenCheck { lhs, rhs, pass: lhs >= rhs * (1.0 - QUAD_TOL) })
}

/// Discrete form det(Σ t_i A_i) ≥ exp(Σ t_i ln det A_i) for probability weights t and
/// positive definite A_i; passes within relative `slack`.
pub fn check_discrete_jensen(mats: &[SymMat], weights: &[f64], slack: f64) -> Result<JensenCheck> {
    if mats.is_empty() || mats.len() != weights.len() {
        return Err(Error::Config("Jensen check needs one weight per matrix".into()));
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|t| *t < 0.0) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::Config("Jensen weights must be a probability vector".into()));
    }
    let mut avg = SymMat::zeros(mats[0].d());
    let mut mean_log = 0.0;
    for (a, t) in mats.iter().zip(weights) {
        avg = avg.add(&a.scale(*t));
        mean_log += t * a.logdet()?;
    }
    let lhs = avg.det();
    let rhs = mean_log.exp();
    Ok(JensenCheck { lhs, rhs, pass: lhs >= rhs * (1.0 - slack) })
}

#[derive(Clone, Debug, Serialize)]
pub struct HadamardCheck {
    pub det: f64,
    pub diag_product: f64,
    pub norm_product: f64,
    pub pass: bool,
}

/// det M ≤ ∏⟨M e_j, e_j⟩ ≤ ∏|M e_j| for an orthonormal frame.
pub fn check_hadamard(m: &SymMat, basis: &[Vec<f64>]) -> Result<HadamardCheck> {
    if !m.is_psd() {
        return Err(Error::NotPsd { op: "check_hadamard", lambda_min: m.lambda_min() });
    }
    if basis.len() != m.d() || crate::linalg::frame_defect(basis) > 1e-12 {
        return Err(Error::degenerate("check_hadamard", "basis is not an orthonormal frame"));
    }
    let det = m.det();
    let diag_product: f64 = basis.iter().map(|e| m.quad(e)).product();
    let norm_product: f64 =
        basis.iter().map(|e| m.mul_vec(e).iter().map(|v| v * v).sum::<f64>().sqrt()).product();
    let slack = 1e-12 * norm_product.abs().max(f64::MIN_POSITIVE);
    let pass = det <= diag_product + slack && diag_product <= norm_product + slack;
    Ok(HadamardCheck { det, diag_product, norm_product, pass })
}

/// λ_max(B^{-1/2} A B^{-1/2}): the least c with A ≤ c B.
pub fn gen_eig_max(a: &SymMat, b: &SymMat) -> Result<f64> {
    Ok(a.sandwich(&b.inv_sqrt()?).lambda_max())
}

/// λ_min(B^{-1/2} A B^{-1/2}): the largest c with c B ≤ A.
pub fn gen_eig_min(a: &SymMat, b: &SymMat) -> Result<f64> {
    Ok(a.sandwich(&b.inv_sqrt()?).lambda_min())
}

/// Least Ĉ with Ψ(x,r) ≤ Ĉ (r/R)^{2−n/p} Ψ(x,R) in PSD order.
pub fn controlled_growth(w: &MatrixWeight, x: &[f64], r: f64, big_r: f64, p: f64, rule: &QuadratureRule) -> Result<f64> {
    let n = w.n() as f64;
    let small = psi(w, x, r, rule)?;
    let large = psi(w, x, big_r, rule)?;
    Ok(gen_eig_max(&small, &large)? / (r / big_r).powf(2.0 - n / p))
}

/// Least γ̂ with ∫_{Q(x,2r)} W ≤ γ̂ ∫_{Q(x,r)} W in PSD order.
pub fn doubling_ratio(w: &MatrixWeight, x: &[f64], r: f64, rule: &QuadratureRule) -> Result<f64> {
    let n = w.n() as i32;
    let inner = average(w, &Cube::new(x.to_vec(), r), rule)?;
    let outer = average(w, &Cube::new(x.to_vec(), 2.0 * r), rule)?;
    Ok(gen_eig_max(&outer, &inner)? * 2f64.powi(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::ScalarWeight;

    #[test]
    fn identity_average_and_psi() {
        let w = MatrixWeight::identity(3, 2);
        let q = Cube::new(vec![0.3, 1.0, -2.0], 0.7);
        assert_eq!(average(&w, &q, &QuadratureRule::default()).unwrap(), SymMat::identity(2));
        let p = psi(&w, &[0.0; 3], 1.0, &QuadratureRule::default().quadrature_only()).unwrap();
        assert!(p.sub(&SymMat::scaled_identity(2, 8.0)).frobenius() < 1e-12);
    }

    #[test]
    fn second_moment_by_quadrature() {
        let w = MatrixWeight::diag_x2_x4(3);
        for r in [0.5, 1.0, 2.0] {
            let q = Cube::new(vec![0.0; 3], r);
            let a = average(&w, &q, &QuadratureRule::default().quadrature_only()).unwrap();
            assert!((a.get(0, 0) - r * r).abs() < 1e-10 * r * r);
        }
    }

    #[test]
    fn appendix_a_psi_frozen_values() {
        let w = MatrixWeight::appendix_a(3);
        for rule in [QuadratureRule::default(), QuadratureRule::default().quadrature_only()] {
            let p0 = psi(&w, &[0.0; 3], 1.0, &rule).unwrap();
            let e0 = SymMat::from_rows(&[vec![8.0, 8.0], vec![8.0, 8.0 * 19.0 / 15.0]]).unwrap();
            assert!(p0.sub(&e0).frobenius() < 1e-7 * e0.frobenius());
            let p2 = psi(&w, &[2.0, 0.0, 0.0], 1.0, &rule).unwrap();
            let e2 = SymMat::from_rows(&[vec![8.0, 40.0], vec![40.0, 8.0 * 30.6]]).unwrap();
            assert!(p2.sub(&e2).frobenius() < 1e-7 * e2.frobenius());
        }
    }

    #[test]
    fn psi_refuses_low_dimension() {
        let w = MatrixWeight::identity(2, 1);
        assert!(matches!(psi(&w, &[0.0, 0.0], 1.0, &QuadratureRule::default()), Err(Error::Domain { .. })));
    }

    #[test]
    fn psi_average_consistency() {
        let w = MatrixWeight::power_1_3(3);
        let rule = QuadratureRule::default();
        let (x, r) = ([0.4, -0.2, 0.9], 0.6);
        let avg = average(&w, &Cube::new(x.to_vec(), r), &rule).unwrap();
        let p = psi(&w, &x, r, &rule).unwrap();
        let lhs = avg.scale((2.0 * r).powi(3) * r.powi(-1));
        assert!(p.sub(&lhs).frobenius() <= 1e-12 * p.frobenius());
    }

    #[test]
    fn power_weight_average_across_origin() {
        // Scalar |x| over Q(0,1): by symmetry 8 ⨍_{[0,1]^3}|y| = 8 · 0.960591956...
        let w = MatrixWeight::scalar(3, ScalarWeight::Power { a: 1.0, gamma: 1.0 }).unwrap();
        let a = average(&w, &Cube::new(vec![0.0; 3], 1.0), &QuadratureRule::default()).unwrap();
        // Mean of |y| on the unit cube, high-order tensor reference.
        let (x, wt) = quad::gauss_legendre(8);
        let mut reference = 0.0;
        // |y| is smooth on each of the dyadic shells; shells scale by 2^{-4}.
        for a0 in 0..2 {
            for a1 in 0..2 {
                for a2 in 0..2 {
                    if a0 + a1 + a2 == 0 {
                        continue;
                    }
                    let lo = [0.5 * a0 as f64, 0.5 * a1 as f64, 0.5 * a2 as f64];
                    for i in 0..8 {
                        for j in 0..8 {
                            for k in 0..8 {
                                let y = [lo[0] + 0.25 * (x[i] + 1.0), lo[1] + 0.25 * (x[j] + 1.0), lo[2] + 0.25 * (x[k] + 1.0)];
                                reference += wt[i] * wt[j] * wt[k] / 64.0 * (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
                            }
                        }
                    }
                }
            }
        }
        reference /= 1.0 - 1.0 / 16.0;
        assert!((a.get(0, 0) - reference).abs() < 1e-6 * reference, "{} vs {}", a.get(0, 0), reference);
    }

    #[test]
    fn reducing_matrix_p2_is_sqrt_average() {
        let w = MatrixWeight::appendix_a(3);
        let q = Cube::new(vec![0.0; 3], 1.0);
        let rule = QuadratureRule::default();
        let r = reducing_matrix(&w, &q, 2.0, &rule).unwrap();
        let avg = average(&w, &q, &rule).unwrap();
        let rr = SymMat::symmetrize(2, &r.matmul(&r));
        assert!(rr.sub(&avg).frobenius() < 1e-10 * avg.frobenius());
        let id = reducing_matrix(&MatrixWeight::identity(3, 2), &q, 2.0, &rule).unwrap();
        assert_eq!(id, SymMat::identity(2));
    }

    #[test]
    fn reducing_matrix_general_p_brackets_norms() {
        let w = MatrixWeight::diag_x2_x4(3);
        let q = Cube::new(vec![0.5, 0.0, 0.0], 0.5);
        let rule = QuadratureRule::default();
        let p = 4.0;
        let r = reducing_matrix(&w, &q, p, &rule).unwrap();
        // 1-D oracle per axis: ⨍ |W^{1/p} e_i|^p = ⨍ λ_i.
        let avg = average(&w, &q, &rule).unwrap();
        for i in 0..2 {
            let mut e = vec![0.0; 2];
            e[i] = 1.0;
            let rho = avg.get(i, i).powf(1.0 / p);
            let re = r.mul_vec(&e).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(re >= rho * (1.0 - 1e-6) && re <= rho * 2f64.sqrt() * (1.0 + 1e-6), "{re} {rho}");
        }
        assert!(r.get(0, 1).abs() < 1e-3 * r.get(0, 0));
    }

    #[test]
    fn jensen_examples() {
        let q = Cube::new(vec![0.0; 3], 1.0);
        let rule = QuadratureRule::default();
        let j = check_matrix_jensen(&MatrixWeight::identity(3, 2), &q, &rule).unwrap();
        assert!((j.lhs - 1.0).abs() < 1e-15 && (j.rhs - 1.0).abs() < 1e-12 && j.pass);
        let x2 = ScalarWeight::Polynomial { coefs: vec![0.0, 1.0] };
        let w = MatrixWeight::scalar_diag(3, vec![x2.clone(), x2]).unwrap();
        let j = check_matrix_jensen(&w, &q, &rule).unwrap();
        assert!((j.lhs - 1.0).abs() < 1e-12);
        assert!(j.rhs < 1.0 && j.pass);
        assert!(matches!(check_matrix_jensen(&MatrixWeight::appendix_a(3), &q, &rule), Err(Error::Domain { .. })));
    }

    #[test]
    fn hadamard_examples() {
        let e = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let h = check_hadamard(&SymMat::diag(&[2.0, 3.0]), &e).unwrap();
        assert_eq!((h.det, h.diag_product, h.norm_product), (6.0, 6.0, 6.0));
        assert!(h.pass);
        let h = check_hadamard(&SymMat::identity(2), &e).unwrap();
        assert!(h.pass && h.det == 1.0 && h.norm_product == 1.0);
    }

    #[test]
    fn doubling_and_growth_for_constant() {
        let w = MatrixWeight::identity(3, 2);
        let rule = QuadratureRule::default();
        assert!((doubling_ratio(&w, &[0.0; 3], 1.0, &rule).unwrap() - 8.0).abs() < 1e-12);
        // Ψ ∝ r², so Ĉ = (r/R)^{2}/(r/R)^{2-n/p}.
        let c = controlled_growth(&w, &[0.0; 3], 0.5, 2.0, 2.0, &rule).unwrap();
        assert!((c - 0.25f64.powf(1.5)).abs() < 1e-12);
    }
}
