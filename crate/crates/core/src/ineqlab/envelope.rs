//! Empirical exponential envelopes of Green matrices in Agmon distance.

use serde::{Deserialize, Serialize};

use crate::auxmetric::{agmon_field, aux_field, AuxField, AuxKind, AuxSettings, DistanceField, PathNorm};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::pde::{assemble, block_norm, green_field, Boundary, Coefficient, GreenField};
use crate::weights::{Descriptor, MatrixWeight};

/// Reduction of a Γ block to a scalar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Projector {
    /// Spectral norm |Γ(x, y)|.
    Norm,
    /// ⟨Γ(x, y)e, e⟩.
    Quadratic { e: Vec<f64> },
}

impl Projector {
    fn apply(&self, g: &GreenField, node: usize) -> f64 {
        match self {
            Projector::Norm => g.norm(node),
            Projector::Quadratic { e } => g.quad(node, e),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeSample {
    pub node: usize,
    /// |x − y|∞.
    pub sep: f64,
    pub dist: f64,
    pub value: f64,
}

/// ln(value·|x−y|∞^{n−2}) ≈ ln Ĉ − ε̂·d over the admissible samples.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeFit {
    pub projector: Projector,
    pub samples: Vec<EnvelopeSample>,
    pub eps_hat: f64,
    pub c_hat: f64,
    pub r2: f64,
    pub dist_range: (f64, f64),
    /// Admissible nodes dropped because the projected value was not positive.
    pub nonpositive: usize,
    /// Prefactor of the lower envelope Ĉ_low·e^{−ε̂d}: the fitted line shifted down
    /// to the 5% residual quantile.
    pub lower_c_hat: f64,
    /// Fraction of samples on or above the lower envelope.
    pub coverage: f64,
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(ys).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = xs.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = ys.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if sxx > 0.0 && syy > 0.0 { sxy * sxy / (sxx * syy) } else { 0.0 };
    (slope, my - slope * mx, r2)
}

fn sep_inf(g: &Grid, a: usize, b: usize) -> f64 {
    g.point(a).iter().zip(g.point(b)).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

/// Excludes |x−y|∞ < 4h (discretization) and the outer L/6 shell (truncation).
fn admissible(g: &Grid, pole: usize, x: usize) -> Option<f64> {
    let sep = sep_inf(g, x, pole);
    (sep >= 4.0 * g.h() * (1.0 - 1e-12) && g.boundary_distance(x) >= g.l / 6.0).then_some(sep)
}

pub const MIN_ENVELOPE_SAMPLES: usize = 50;

pub fn envelope_fit(green: &GreenField, dist: &DistanceField, projector: &Projector) -> Result<EnvelopeFit> {
    if green.grid != dist.grid || green.pole != dist.source {
        return Err(Error::Config("green field and distance field must share grid and pole".into()));
    }
    let g = &green.grid;
    let mut samples = Vec::new();
    let mut nonpositive = 0;
    for x in 0..g.len() {
        let Some(sep) = admissible(g, green.pole, x) else { continue };
        let value = projector.apply(green, x);
        if value > 0.0 && value.is_finite() {
            samples.push(EnvelopeSample { node: x, sep, dist: dist.values[x], value });
        } else {
            nonpositive += 1;
        }
    }
    if samples.len() < MIN_ENVELOPE_SAMPLES {
        return Err(Error::InsufficientSamples { op: "envelope_fit", found: samples.len(), needed: MIN_ENVELOPE_SAMPLES });
    }
    let np2 = g.dim as i32 - 2;
    let xs: Vec<f64> = samples.iter().map(|s| s.dist).collect();
    let ys: Vec<f64> = samples.iter().map(|s| (s.value * s.sep.powi(np2)).ln()).collect();
    let (slope, intercept, r2) = linear_fit(&xs, &ys);
    let mut resid: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - intercept - slope * x).collect();
    resid.sort_by(f64::total_cmp);
    let q05 = resid[(0.05 * (resid.len() - 1) as f64).floor() as usize];
    let coverage = resid.iter().filter(|r| **r >= q05).count() as f64 / resid.len() as f64;
    let dist_range = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    Ok(EnvelopeFit {
        projector: projector.clone(),
        samples,
        eps_hat: -slope,
        c_hat: intercept.exp(),
        r2,
        dist_range,
        nonpositive,
        lower_c_hat: (intercept + q05).exp(),
        coverage,
    })
}

/// |Γ^V − Γ⁰|·|x−y|^{n−2} ≤ Ĉ(|x−y|m̄(x))^α on |x−y| ≤ 1/m̄(x), α = 2 − n/q, q = min(p, 2.9).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmallScaleFit {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    /// Fitted log-log slope of the difference against t = |x−y|∞·m̄(x).
    pub slope: f64,
    /// Exponent the bound is tested with: min(slope, α).
    pub beta: f64,
    /// max value/t^β over the samples with t at or above the median; the bound is
    /// calibrated on the larger scales and then tested on all of them.
    pub c_hat: f64,
    pub coverage: f64,
    pub samples: Vec<(f64, f64)>,
    pub pass: bool,
}

pub const MIN_SMALL_SCALE_SAMPLES: usize = 20;

pub fn small_scale_fit(gv: &GreenField, g0: &GreenField, upper: &AuxField, p: f64) -> Result<SmallScaleFit> {
    if gv.grid != g0.grid || gv.pole != g0.pole || upper.grid != gv.grid || gv.d != g0.d {
        return Err(Error::Config("small-scale fit needs Green fields and aux field on one grid and pole".into()));
    }
    let g = &gv.grid;
    let n = g.dim as f64;
    let q = p.min(2.9);
    let alpha = 2.0 - n / q;
    let mut samples = Vec::new();
    for x in 0..g.len() {
        let Some(sep) = admissible(g, gv.pole, x) else { continue };
        let t = sep * upper.values[x];
        if t > 1.0 {
            continue;
        }
        let diff: Vec<f64> = gv.block(x).iter().zip(g0.block(x)).map(|(a, b)| a - b).collect();
        let value = block_norm(&diff, gv.d) * sep.powi(g.dim as i32 - 2);
        if value > 0.0 {
            samples.push((t, value));
        }
    }
    if samples.len() < MIN_SMALL_SCALE_SAMPLES {
        return Err(Error::InsufficientSamples { op: "small_scale_fit", found: samples.len(), needed: MIN_SMALL_SCALE_SAMPLES });
    }
    let lx: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ly: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let (slope, _, _) = linear_fit(&lx, &ly);
    let mut ts: Vec<f64> = samples.iter().map(|s| s.0).collect();
    ts.sort_by(f64::total_cmp);
    let median = ts[ts.len() / 2];
    let beta = slope.min(alpha);
    let c_hat = samples.iter().filter(|s| s.0 >= median).map(|s| s.1 / s.0.powf(beta)).fold(0.0, f64::max);
    let coverage =
        samples.iter().filter(|s| s.1 <= c_hat * s.0.powf(beta) * (1.0 + 1e-12)).count() as f64 / samples.len() as f64;
    let pass = coverage >= 0.95 && slope >= alpha - 0.3;
    Ok(SmallScaleFit { p, q, alpha, slope, beta, c_hat, coverage, samples, pass })
}

/// Decay rates of a diagonal V = diag(v₁, v₂), v₁ ≤ v₂, against the scalar problems.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagonalConsistency {
    /// ε̂ of ⟨Γ^V e₁, e₁⟩ against d̲.
    pub eps_first: f64,
    /// ε̂ of Γ^{v₁} against d(·, ·, v₁).
    pub eps_first_scalar: f64,
    /// ε̂ of ⟨Γ^V e₂, e₂⟩ against d̄.
    pub eps_second: f64,
    /// ε̂ of Γ^{v₂} against d(·, ·, v₂).
    pub eps_second_scalar: f64,
    pub pass: bool,
}

pub fn diagonal_consistency(
    w: &MatrixWeight,
    coefficient: &Coefficient,
    grid: &Grid,
    pole: usize,
    aux: &AuxSettings,
) -> Result<DiagonalConsistency> {
    let Descriptor::ScalarDiag(entries) = w.descriptor() else {
        return Err(Error::Config("diagonal consistency needs a diagonal weight".into()));
    };
    if entries.len() != 2 {
        return Err(Error::Config("diagonal consistency needs d = 2".into()));
    }
    let bc = Boundary::Dirichlet;
    let gv = green_field(&assemble(w, coefficient, grid, &bc)?, pole)?;
    let lower = aux_field(w, grid, &AuxKind::Lower, aux)?;
    let upper = aux_field(w, grid, &AuxKind::Upper, aux)?;
    let d_lower = agmon_field(&lower, pole, PathNorm::Linf);
    let d_upper = agmon_field(&upper, pole, PathNorm::Linf);
    let eps_first = envelope_fit(&gv, &d_lower, &Projector::Quadratic { e: vec![1.0, 0.0] })?.eps_hat;
    let eps_second = envelope_fit(&gv, &d_upper, &Projector::Quadratic { e: vec![0.0, 1.0] })?.eps_hat;
    let scalar_eps = |v: &crate::weights::ScalarWeight| -> Result<f64> {
        let sw = MatrixWeight::scalar(w.n(), v.clone())?;
        let gs = green_field(&assemble(&sw, coefficient, grid, &bc)?, pole)?;
        let m = aux_field(&sw, grid, &AuxKind::Lower, aux)?;
        Ok(envelope_fit(&gs, &agmon_field(&m, pole, PathNorm::Linf), &Projector::Norm)?.eps_hat)
    };
    let eps_first_scalar = scalar_eps(&entries[0])?;
    let eps_second_scalar = scalar_eps(&entries[1])?;
    let close = |a: f64, b: f64| (a - b).abs() <= 0.2 * a.abs().max(b.abs());
    let pass = close(eps_first, eps_first_scalar) && close(eps_second, eps_second_scalar);
    Ok(DiagonalConsistency { eps_first, eps_first_scalar, eps_second, eps_second_scalar, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMat;

    #[test]
    fn free_green_is_flat_in_distance() {
        // W = 0 has no decay: ε̂ against any distance stays near 0 away from the boundary.
        let g = Grid::cube3(1.0, 24).unwrap();
        let zero = MatrixWeight::constant(3, SymMat::zeros(1)).unwrap();
        let pole = g.nearest(&[0.0; 3]);
        let y = g.point(pole);
        let op = assemble(&zero, &Coefficient::default(), &g, &Boundary::Radiation { center: y }).unwrap();
        let gf = green_field(&op, pole).unwrap();
        let dist = agmon_field(&AuxField::constant(g, 1, 1.0), pole, PathNorm::Linf);
        let fit = envelope_fit(&gf, &dist, &Projector::Norm).unwrap();
        assert!(fit.eps_hat.abs() < 0.5, "{}", fit.eps_hat);
    }

    #[test]
    fn constant_potential_decays() {
        let g = Grid::cube3(3.0, 24).unwrap();
        let w = MatrixWeight::constant(3, SymMat::scaled_identity(1, 4.0)).unwrap();
        let pole = g.nearest(&[0.0; 3]);
        let op = assemble(&w, &Coefficient::default(), &g, &Boundary::Dirichlet).unwrap();
        let gf = green_field(&op, pole).unwrap();
        let m = aux_field(&w, &g, &AuxKind::Lower, &AuxSettings::default()).unwrap();
        // Euclidean path length: Yukawa decay is isotropic, ℓ∞ distance would scatter it by direction.
        let fit = envelope_fit(&gf, &agmon_field(&m, pole, PathNorm::L2), &Projector::Norm).unwrap();
        assert!(fit.eps_hat > 0.0 && fit.r2 >= 0.9, "{} {}", fit.eps_hat, fit.r2);
        assert!(fit.coverage >= 0.95);
    }

    #[test]
    fn too_few_samples() {
        // A vanishing field has no positive samples to fit.
        let g = Grid::cube3(1.0, 12).unwrap();
        let pole = g.nearest(&[0.0; 3]);
        let gf = GreenField { grid: g, d: 1, pole, blocks: vec![0.0; g.len()], residual: 0.0 };
        let dist = agmon_field(&AuxField::constant(g, 1, 1.0), pole, PathNorm::Linf);
        let err = envelope_fit(&gf, &dist, &Projector::Norm).unwrap_err();
        assert!(matches!(err, Error::InsufficientSamples { found: 0, .. }), "{err:?}");
    }
}
