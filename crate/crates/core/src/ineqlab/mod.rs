//! Inequality harnesses: Poincaré and Fefferman–Phong ratios, the failure of the
//! lower Fefferman–Phong bound for the rank-one-at-infinity weight, and
//! decay-envelope fits of Green matrices against Agmon distances.

mod appendix;
mod envelope;
mod fields;

pub use appendix::{
    appendix_a_critical_center, appendix_a_psi, fp_failure, loglog_slope, nc_decay, FpFailure, FpFailureRow, NcDecayRow,
};
pub use envelope::{
    diagonal_consistency, envelope_fit, small_scale_fit, DiagonalConsistency, EnvelopeFit, EnvelopeSample, Projector,
    SmallScaleFit,
};
pub use fields::{library, TestFunctionField};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::auxmetric::{aux_field, AuxField, AuxKind, AuxSettings};
use crate::cubature::quad::gauss_legendre;
use crate::cubature::Cube;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::SymMat;
use crate::weights::{MatrixWeight, ScalarWeight};

/// Which Fefferman–Phong inequality a ratio tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FpForm {
    /// ∫m̲²|u|² against ∫|Du|² + ∫⟨Vu,u⟩.
    Lower,
    /// ∫m(·,|V|)²|u|² against ∫|Du|² + ∫⟨Vu,u⟩.
    Norm,
    /// ∫⟨Vu,u⟩ against ∫|Du|² + ∫m̄²|u|².
    Upper,
}

impl FpForm {
    pub fn label(self) -> &'static str {
        match self {
            FpForm::Lower => "lower",
            FpForm::Norm => "norm",
            FpForm::Upper => "upper",
        }
    }

    /// The auxiliary function the form weighs |u|² with.
    pub fn aux_kind(self, w: &MatrixWeight) -> AuxKind {
        match self {
            FpForm::Lower => AuxKind::Lower,
            FpForm::Upper => AuxKind::Upper,
            FpForm::Norm => AuxKind::Scalar { v: ScalarWeight::MaxEigen { of: Box::new(w.clone()) } },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FpRatio {
    pub form: FpForm,
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

fn guarded(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else {
        lhs / rhs
    }
}

/// Discrete ratio with h³-weighted sums and centered differences; `aux` must be
/// sampled on the field's grid with the form's aux kind.
pub fn fp_ratio(w: &MatrixWeight, u: &TestFunctionField, form: FpForm, aux: &AuxField) -> Result<FpRatio> {
    if aux.grid != u.grid {
        return Err(Error::Config("aux field and test function live on different grids".into()));
    }
    if u.d != w.d() {
        return Err(Error::Config(format!("test function has {} components, weight has d = {}", u.d, w.d())));
    }
    let g = &u.grid;
    let hn = g.h().powi(g.dim as i32);
    let mut vmass = 0.0;
    for k in 0..g.len() {
        let uk = u.at(k);
        if uk.iter().any(|v| *v != 0.0) {
            vmass += hn * w.eval(&g.point(k))?.quad(uk);
        }
    }
    let m2: Vec<f64> = aux.values.iter().map(|m| m * m).collect();
    let mmass = u.weighted_mass(&m2);
    let energy = u.dirichlet_energy();
    let (lhs, rhs) = match form {
        FpForm::Lower | FpForm::Norm => (mmass, energy + vmass),
        FpForm::Upper => (vmass, energy + mmass),
    };
    Ok(FpRatio { form, label: u.label.clone(), lhs, rhs, ratio: guarded(lhs, rhs) })
}

/// Ratios of one form over the 20-field library.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FpLibraryReport {
    pub form: FpForm,
    pub ratios: Vec<FpRatio>,
    pub max: f64,
    pub min: f64,
}

pub fn fp_library(w: &MatrixWeight, grid: &Grid, form: FpForm, aux: &AuxSettings) -> Result<FpLibraryReport> {
    let field = aux_field(w, grid, &form.aux_kind(w), aux)?;
    let ratios: Vec<FpRatio> = library(grid, w.d()).iter().map(|u| fp_ratio(w, u, form, &field)).collect::<Result<_>>()?;
    let max = ratios.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let min = ratios.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    Ok(FpLibraryReport { form, ratios, max, min })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoincareRatio {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub nodes: usize,
}

/// (1/|Q|)∫_Q∫_Q |V(Q)^{−1/2}V^{1/2}(y)(u(x)−u(y))|² dx dy against |Q|^{2/n}∫_Q|Du|²,
/// with V(Q) = ⨍_Q V, by a tensor Gauss rule of 4·2^level nodes per axis.
pub fn poincare_ratio(w: &MatrixWeight, q: &Cube, u: &dyn Fn(&[f64]) -> Vec<f64>, level: u32) -> Result<PoincareRatio> {
    let n = w.n();
    let d = w.d();
    if q.n() != n {
        return Err(Error::Config("cube dimension differs from weight dimension".into()));
    }
    let (gx, gw) = gauss_legendre(4);
    let cells = 1usize << level;
    let per_axis = 4 * cells;
    let side = 2.0 * q.r / cells as f64;
    let axis: Vec<(f64, f64)> = (0..per_axis)
        .map(|k| {
            let (c, j) = (k / 4, k % 4);
            let lo = -q.r + c as f64 * side;
            (lo + 0.5 * side * (gx[j] + 1.0), 0.5 * side * gw[j])
        })
        .collect();
    let total = per_axis.pow(n as u32);
    let nodes: Vec<(Vec<f64>, f64)> = (0..total)
        .map(|mut k| {
            let mut x = vec![0.0; n];
            let mut wt = 1.0;
            for a in (0..n).rev() {
                let (t, wa) = axis[k % per_axis];
                x[a] = q.center[a] + t;
                wt *= wa;
                k /= per_axis;
            }
            (x, wt)
        })
        .collect();
    let vol = q.volume();
    let vals: Vec<SymMat> = nodes.iter().map(|(x, _)| w.eval(x)).collect::<Result<_>>()?;
    let mut avg = SymMat::zeros(d);
    for ((_, wt), v) in nodes.iter().zip(&vals) {
        avg = avg.add(&v.scale(*wt / vol));
    }
    let a = avg.inv().map_err(|_| Error::degenerate("poincare_ratio", "the cube average of V is singular"))?;
    let b: Vec<SymMat> = vals.iter().map(|v| Ok(a.sandwich(&v.sqrt_psd()?))).collect::<Result<_>>()?;
    let us: Vec<Vec<f64>> = nodes.iter().map(|(x, _)| u(x)).collect();
    let lhs_parts: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..total {
                let diff: Vec<f64> = us[i].iter().zip(&us[j]).map(|(p, q)| p - q).collect();
                acc += nodes[j].1 * b[j].quad(&diff);
            }
            nodes[i].1 * acc
        })
        .collect();
    let lhs = lhs_parts.iter().sum::<f64>() / vol;
    let delta = 1e-3 * q.r;
    let mut energy = 0.0;
    for (x, wt) in &nodes {
        for ax in 0..n {
            let shifted = |t: f64| {
                let mut y = x.clone();
                y[ax] += t;
                u(&y)
            };
            let (p1, m1, p2, m2) = (shifted(delta), shifted(-delta), shifted(2.0 * delta), shifted(-2.0 * delta));
            for i in 0..d {
                let g = (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * delta);
                energy += wt * g * g;
            }
        }
    }
    let rhs = vol.powf(2.0 / n as f64) * energy;
    Ok(PoincareRatio { lhs, rhs, ratio: guarded(lhs, rhs), nodes: total })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poincare_identity_linear_closed_form() {
        let w = MatrixWeight::identity(3, 1);
        let q = Cube::new(vec![0.0; 3], 1.0);
        let r = poincare_ratio(&w, &q, &|x| vec![x[0]], 1).unwrap();
        assert!((r.lhs - 16.0 / 3.0).abs() < 1e-12, "{}", r.lhs);
        assert!((r.rhs - 32.0).abs() < 1e-8);
        assert!((r.ratio - 1.0 / 6.0).abs() < 1e-9);
        let c = poincare_ratio(&w, &q, &|_| vec![3.0], 0).unwrap();
        assert_eq!(c.ratio, 0.0);
    }

    #[test]
    fn poincare_diagonal_stable_under_refinement() {
        let w = MatrixWeight::diag_x2_x4(3);
        let q = Cube::new(vec![0.2, -0.1, 0.3], 0.8);
        let u = |x: &[f64]| vec![x[0], x[1]];
        let a = poincare_ratio(&w, &q, &u, 1).unwrap().ratio;
        let b = poincare_ratio(&w, &q, &u, 2).unwrap().ratio;
        assert!(a.is_finite() && a > 0.0 && (a - b).abs() < 1e-3 * b, "{a} {b}");
    }

    #[test]
    fn lower_form_for_identity_is_at_most_eight() {
        let g = Grid::cube3(1.5, 12).unwrap();
        let r = fp_library(&MatrixWeight::identity(3, 2), &g, FpForm::Lower, &AuxSettings::default()).unwrap();
        assert!(r.max <= 8.0 && r.min > 0.0);
    }

    #[test]
    fn diagonal_weight_ratios_bounded() {
        let g = Grid::cube3(2.0, 12).unwrap();
        let w = MatrixWeight::diag_x2_x4(3);
        for form in [FpForm::Lower, FpForm::Norm, FpForm::Upper] {
            let r = fp_library(&w, &g, form, &AuxSettings::default()).unwrap();
            assert!(r.max.is_finite() && r.max < 100.0 && r.min >= 0.0, "{form:?} {}", r.max);
        }
    }
}
