//! Experiments on W = [[1, |x|²], [|x|², |x|⁴]], which is polynomial (so in every
//! B_p) and nondegenerate, but whose kernel direction (−|x|², 1) defeats the
//! noncommutativity condition and the lower Fefferman–Phong bound.

use serde::Serialize;

use crate::auxmetric::{aux_value, AuxKind, AuxSettings};
use crate::classes::nc_value;
use crate::cubature::quad::gauss_legendre;
use crate::cubature::{Cube, QuadratureRule};
use crate::error::{Error, Result};
use crate::linalg::SymMat;
use crate::weights::MatrixWeight;

/// Closed-form Ψ(x, r) = 2ⁿr²·⨍_{Q(x,r)} W; depends on x only through |x|.
pub fn appendix_a_psi(n: usize, x: &[f64], r: f64) -> SymMat {
    let nf = n as f64;
    let s2 = x.iter().map(|v| v * v).sum::<f64>();
    let r2 = r * r;
    let off = s2 + nf / 3.0 * r2;
    let corner = s2 * s2 + 2.0 * (nf + 2.0) / 3.0 * s2 * r2 + (5.0 * nf + 4.0) * nf / 45.0 * r2 * r2;
    SymMat::from_rows(&[vec![1.0, off], vec![off, corner]]).expect("symmetric").scale(2f64.powi(n as i32) * r2)
}

/// The point x_m = s·e₁ with λ_min(Ψ(x_m, √m)) = 1, so that the lower critical
/// radius at x_m is √m. Found by bisection in s on the closed form.
pub fn appendix_a_critical_center(n: usize, m: f64) -> Result<Vec<f64>> {
    let r = m.sqrt();
    let crit = |s: f64| {
        let mut x = vec![0.0; n];
        x[0] = s;
        appendix_a_psi(n, &x, r).lambda_min()
    };
    if crit(0.0) <= 1.0 {
        return Err(Error::domain("appendix_a_critical_center", format!("no center with critical radius sqrt({m})")));
    }
    let mut hi = 1.0;
    while crit(hi) > 1.0 {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::BracketFailure { op: "appendix_a_critical_center", x: vec![m], r_lo: 0.0, r_hi: hi });
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if crit(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let mut x = vec![0.0; n];
    x[0] = 0.5 * (lo + hi);
    Ok(x)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NcDecayRow {
    pub m: f64,
    pub center_norm: f64,
    pub r: f64,
    pub witness: f64,
}

/// The NC witness on the critical cubes Q(x_m, √m).
pub fn nc_decay(ms: &[f64], rule: &QuadratureRule) -> Result<Vec<NcDecayRow>> {
    let w = MatrixWeight::appendix_a(3);
    ms.iter()
        .map(|&m| {
            let x = appendix_a_critical_center(3, m)?;
            let q = Cube::new(x.clone(), m.sqrt());
            Ok(NcDecayRow { m, center_norm: x[0], r: q.r, witness: nc_value(&w, &q, rule)? })
        })
        .collect()
}

/// Least-squares slope of ln y against ln x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FpFailureRow {
    pub r: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FpFailure {
    pub weight: String,
    pub rows: Vec<FpFailureRow>,
    pub slope: f64,
}

/// Quintic smoothstep and its derivative.
fn step(t: f64) -> (f64, f64) {
    let t = t.clamp(0.0, 1.0);
    (t * t * t * (10.0 - 15.0 * t + 6.0 * t * t), 30.0 * t * t * (1.0 - t) * (1.0 - t))
}

/// Radial cutoff: 1 on [R, 2R], supported in [R/2, 3R], |ξ′| ≤ 15/(8·(R/2)).
fn cutoff(s: f64, r: f64) -> (f64, f64) {
    if s <= 0.5 * r || s >= 3.0 * r {
        (0.0, 0.0)
    } else if s < r {
        let (v, dv) = step((s - 0.5 * r) / (0.5 * r));
        (v, dv / (0.5 * r))
    } else if s <= 2.0 * r {
        (1.0, 0.0)
    } else {
        let (v, dv) = step((3.0 * r - s) / r);
        (v, -dv / r)
    }
}

/// Lower-form Fefferman–Phong ratio for u_R = ξ_R(|x|)·(−|x|², 1) in three
/// dimensions, integrated radially. Assumes m̲ and W are radial along e₁, which
/// holds for W above and for constant weights.
pub fn fp_failure(w: &MatrixWeight, r_list: &[f64], aux: &AuxSettings) -> Result<FpFailure> {
    if w.n() != 3 || w.d() != 2 {
        return Err(Error::Config("the Fefferman-Phong failure harness needs n = 3, d = 2".into()));
    }
    let (gx, gw) = gauss_legendre(32);
    let four_pi = 4.0 * std::f64::consts::PI;
    let mut rows = Vec::new();
    for &r in r_list {
        let (mut lhs, mut energy, mut vmass) = (0.0, 0.0, 0.0);
        for (a, b) in [(0.5 * r, r), (r, 2.0 * r), (2.0 * r, 3.0 * r)] {
            let half = 0.5 * (b - a);
            for (t, wt) in gx.iter().zip(&gw) {
                let s = 0.5 * (a + b) + half * t;
                let (xi, dxi) = cutoff(s, r);
                let x = [s, 0.0, 0.0];
                let m = aux_value(w, &x, &AuxKind::Lower, aux)?;
                let u = [-s * s * xi, xi];
                let jac = four_pi * s * s * half * wt;
                lhs += jac * m * m * (u[0] * u[0] + u[1] * u[1]);
                let g0 = s * s * dxi + 2.0 * s * xi;
                energy += jac * (g0 * g0 + dxi * dxi);
                vmass += jac * w.eval(&x)?.quad(&u);
            }
        }
        let rhs = energy + vmass;
        rows.push(FpFailureRow { r, lhs, rhs, ratio: lhs / rhs });
    }
    let slope = loglog_slope(&rows.iter().map(|x| x.r).collect::<Vec<_>>(), &rows.iter().map(|x| x.ratio).collect::<Vec<_>>());
    Ok(FpFailure { weight: format!("{:?}", w.descriptor()).chars().take(40).collect(), rows, slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cubature::psi;

    #[test]
    fn closed_form_matches_quadrature() {
        let w = MatrixWeight::appendix_a(3);
        let rule = QuadratureRule::default().quadrature_only();
        for (x, r) in [([0.3, -0.2, 0.5], 0.7), ([2.0, 1.0, -3.0], 0.1), ([0.0; 3], 2.0)] {
            let a = appendix_a_psi(3, &x, r);
            let b = psi(&w, &x, r, &rule).unwrap();
            assert!(a.sub(&b).frobenius() <= 1e-10 * a.frobenius());
        }
    }

    #[test]
    fn critical_center_has_critical_radius() {
        let w = MatrixWeight::appendix_a(3);
        for m in [4.0, 9.0] {
            let x = appendix_a_critical_center(3, m).unwrap();
            let mlow = aux_value(&w, &x, &AuxKind::Lower, &AuxSettings::default()).unwrap();
            assert!((1.0 / mlow - m.sqrt()).abs() < 1e-5 * m.sqrt(), "{m}: {}", 1.0 / mlow);
        }
        assert!(appendix_a_critical_center(3, 1.0).is_err());
    }

    #[test]
    fn cutoff_shape() {
        let r = 10.0;
        assert_eq!(cutoff(4.0, r).0, 0.0);
        assert_eq!(cutoff(15.0, r).0, 1.0);
        assert_eq!(cutoff(31.0, r).0, 0.0);
        assert!((cutoff(7.5, r).0 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
        assert!((loglog_slope(&xs, &ys) - 1.5).abs() < 1e-12);
    }
}
