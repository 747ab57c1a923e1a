//! The verification catalog: twelve numerical checks with fixed seeds, each
//! reporting its measured quantities, a pass flag, and long-format rows.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::auxmetric::{agmon_field, aux_field, aux_fields, aux_value, AuxField, AuxKind, AuxSettings, PathNorm};
use crate::classes::{certify, cross_checks, default_nc_centers, nc_critical, CertSettings, Class};
use crate::cubature::{check_discrete_jensen, check_hadamard, psi, CubeFamily, QuadratureRule};
use crate::error::Result;
use crate::grid::Grid;
use crate::ineqlab::{appendix_a_psi, envelope_fit, fp_failure, nc_decay, small_scale_fit, Projector};
use crate::linalg::{random_frame, random_psd, random_unit, SymMat};
use crate::pde::{
    assemble, free_green_check, green_field, landscape_stability, resolvent_identity_check, Boundary, Coefficient,
};
use crate::report::Row;
use crate::weights::{MatrixWeight, ScalarWeight};

/// Box half-width and nodes per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub l: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn grid(&self) -> Result<Grid> {
        Grid::cube3(self.l, self.n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub seed: u64,
    pub psi_samples: usize,
    pub constant_grid: GridSpec,
    pub diagonal_grid: GridSpec,
    pub sandwich_samples: usize,
    pub norm_points: usize,
    pub family: CubeFamily,
    pub cert: CertSettings,
    pub nc_centers: usize,
    pub nc_masses: Vec<f64>,
    pub fp_radii: Vec<f64>,
    pub resolvent_grid: GridSpec,
    pub resolvent_nodes: usize,
    pub free_grid: GridSpec,
    pub decay_grid: GridSpec,
    pub small_scale_grid: GridSpec,
    pub landscape_l: f64,
    pub landscape_coarse: usize,
    pub landscape_fine: usize,
    pub landscape_probes: usize,
    pub random_instances: usize,
    pub aux: AuxSettings,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 2024,
            psi_samples: 20,
            constant_grid: GridSpec { l: 1.0, n: 12 },
            diagonal_grid: GridSpec { l: 2.0, n: 16 },
            sandwich_samples: 1000,
            norm_points: 100,
            family: CubeFamily::Dyadic { half_width: 2.0, depth: 0 },
            cert: CertSettings::default(),
            nc_centers: 8,
            nc_masses: vec![4.0, 9.0, 16.0, 25.0],
            fp_radii: vec![10.0, 20.0, 40.0, 80.0],
            resolvent_grid: GridSpec { l: 2.0, n: 13 },
            resolvent_nodes: 20,
            free_grid: GridSpec { l: 1.0, n: 48 },
            decay_grid: GridSpec { l: 3.0, n: 48 },
            small_scale_grid: GridSpec { l: 1.5, n: 48 },
            landscape_l: 3.0,
            landscape_coarse: 32,
            landscape_fine: 48,
            landscape_probes: 10,
            random_instances: 10_000,
            aux: AuxSettings::default(),
        }
    }
}

impl SuiteConfig {
    /// Reduced sizes for smoke runs; pass flags at these sizes are not meaningful.
    pub fn quick() -> Self {
        SuiteConfig {
            psi_samples: 4,
            constant_grid: GridSpec { l: 1.0, n: 9 },
            diagonal_grid: GridSpec { l: 2.0, n: 10 },
            sandwich_samples: 24,
            norm_points: 2,
            cert: CertSettings { refinements: 1, random_directions: 4, samples_per_axis: 4, ..CertSettings::default() },
            nc_centers: 4,
            resolvent_grid: GridSpec { l: 2.0, n: 9 },
            resolvent_nodes: 4,
            free_grid: GridSpec { l: 1.0, n: 40 },
            decay_grid: GridSpec { l: 3.0, n: 16 },
            small_scale_grid: GridSpec { l: 1.5, n: 24 },
            landscape_coarse: 10,
            landscape_fine: 12,
            landscape_probes: 3,
            random_instances: 200,
            ..SuiteConfig::default()
        }
    }
}

/// Outcome of one check.
#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub summary: String,
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip)]
    pub rows: Vec<Row>,
}

struct Builder {
    id: u32,
    name: &'static str,
    metrics: BTreeMap<String, f64>,
    rows: Vec<Row>,
}

impl Builder {
    fn new(id: u32, name: &'static str) -> Self {
        Builder { id, name, metrics: BTreeMap::new(), rows: Vec::new() }
    }

    fn metric(&mut self, weight: &str, key: &str, value: f64) {
        let k = if weight.is_empty() { key.to_string() } else { format!("{weight}.{key}") };
        self.metrics.insert(k, value);
        self.rows.push(Row::scalar(self.name, weight, key, value));
    }

    fn row(&mut self, weight: &str, quantity: &str, x: &[f64], value: f64) {
        self.rows.push(Row::new(self.name, weight, quantity, x, value));
    }

    fn finish(mut self, pass: bool, summary: String) -> CheckResult {
        self.rows.push(Row::flag(self.name, "", "pass", pass));
        CheckResult { id: self.id, name: self.name.into(), pass, summary, metrics: self.metrics, rows: self.rows }
    }
}

fn rng(cfg: &SuiteConfig, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(1000).wrapping_add(salt))
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| rel(*x, *y)).fold(0.0, f64::max)
}

/// diag(|x|², 1 + |x|⁴): v₁ ≤ v₂ everywhere.
pub fn ordered_diagonal(n: usize) -> MatrixWeight {
    MatrixWeight::scalar_diag(n, vec![poly(&[0.0, 1.0]), poly(&[1.0, 0.0, 1.0])]).expect("valid diagonal weight")
}

fn poly(c: &[f64]) -> ScalarWeight {
    ScalarWeight::Polynomial { coefs: c.to_vec() }
}

/// Quadrature Ψ of the rank-one-at-infinity weight against its closed form.
pub fn psi_closed_form(cfg: &SuiteConfig) -> Result<CheckResult> {
    let mut b = Builder::new(1, "psi_closed_form");
    let w = MatrixWeight::appendix_a(3);
    let rule = QuadratureRule::default().quadrature_only();
    let mut r = rng(cfg, 1);
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.psi_samples {
        let x: Vec<f64> = (0..3).map(|_| r.random_range(-3.0..3.0)).collect();
        let rad = r.random_range(0.05f64.ln()..3f64.ln()).exp();
        let exact = appendix_a_psi(3, &x, rad);
        let err = psi(&w, &x, rad, &rule)?.sub(&exact).frobenius() / exact.frobenius();
        let mut at = x.clone();
        at.push(rad);
        b.row("appendix_a", "relative_error", &at, err);
        worst = worst.max(err);
    }
    b.metric("appendix_a", "max_relative_error", worst);
    Ok(b.finish(worst <= 1e-6, format!("max relative error {worst:.2e} over {} samples (bound 1e-6)", cfg.psi_samples)))
}

/// For W = I: m̲ = m̄ = 2^{3/2}, and the ℓ∞ lattice distance is 2^{3/2}|x−y|∞.
pub fn constant_weight(cfg: &SuiteConfig) -> Result<CheckResult> {
    let mut b = Builder::new(2, "constant_weight");
    let w = MatrixWeight::identity(3, 2);
    let target = 2f64.powf(1.5);
    let mut r = rng(cfg, 2);
    let mut aux_err: f64 = 0.0;
    for _ in 0..10 {
        let x: Vec<f64> = (0..3).map(|_| r.random_range(-2.0..2.0)).collect();
        for kind in [AuxKind::Lower, AuxKind::Upper] {
            aux_err = aux_err.max(rel(aux_value(&w, &x, &kind, &cfg.aux)?, target));
        }
    }
    let g = cfg.constant_grid.grid()?;
    let source = g.nearest(&[0.3, -0.2, 0.1]);
    let exact = AuxField::constant(g, 2, target);
    let computed = aux_field(&w, &g, &AuxKind::Lower, &cfg.aux)?;
    let y = g.point(source);
    let linf: Vec<f64> = (0..g.len())
        .map(|k| target * g.point(k).iter().zip(&y).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max))
        .collect();
    let d_exact = agmon_field(&exact, source, PathNorm::Linf).values;
    let d_computed = agmon_field(&computed, source, PathNorm::Linf).values;
    let dist_err = max_rel(&d_exact, &linf);
    let field_dist_err = max_rel(&d_computed, &linf);
    b.metric("identity", "aux_max_relative_error", aux_err);
    b.metric("identity", "distance_max_relative_error", dist_err);
    b.metric("identity", "computed_speed_distance_error", field_dist_err);
    let pass = aux_err <= 1e-6 && dist_err <= 1e-12 && field_dist_err <= 1e-6;
    Ok(b.finish(
        pass,
        format!("aux error {aux_err:.2e} (1e-6); lattice distance error {dist_err:.2e} exact speed, {field_dist_err:.2e} computed speed"),
    ))
}

/// For diag(v₁, v₂) with v₁ ≤ v₂ the matrix objects reduce to the scalar ones.
pub fn diagonal_reduction(cfg: &SuiteConfig) -> Result<CheckResult> {
    let mut b = Builder::new(3, "diagonal_reduction");
    let w = ordered_diagonal(3);
    let g = cfg.diagonal_grid.grid()?;
    let fields = aux_fields(&w, &g, &[AuxKind::Lower, AuxKind::Upper], &cfg.aux)?;
    let v1 = aux_field(&w, &g, &AuxKind::Scalar { v: poly(&[0.0, 1.0]) }, &cfg.aux)?;
    let v2 = aux_field(&w, &g, &AuxKind::Scalar { v: poly(&[1.0, 0.0, 1.0]) }, &cfg.aux)?;
    let lower_err = max_rel(&fields[0].values, &v1.values);
    let upper_err = max_rel(&fields[1].values, &v2.values);
    let source = g.nearest(&[0.0; 3]);
    let mut dist_err: f64 = 0.0;
    for (m, s) in [(&fields[0], &v1), (&fields[1], &v2)] {
        dist_err = dist_err.max(max_rel(&agmon_field(m, source, PathNorm::Linf).values, &agmon_field(s, source, PathNorm::Linf).values));
    }
    let gf = green_field(&assemble(&w, &Coefficient::default(), &g, &Boundary::Dirichlet)?, source)?;
    let (mut off, mut diag): (f64, f64) = (0.0, 0.0);
    for x in 0..g.len() {
        off = off.max(gf.entry(x, 0, 1).abs()).max(gf.entry(x, 1, 0).abs());
        diag = diag.max(gf.entry(x, 0, 0).abs()).max(gf.entry(x, 1, 1).abs());
    }
    let block = off / diag;
    b.metric("ordered_diagonal", "lower_vs_v1", lower_err);
    b.metric("ordered_diagonal", "upper_vs_v2", upper_err);
    b.metric("ordered_diagonal", "distance_error", dist_err);
    b.metric("ordered_diagonal", "offdiagonal_ratio", block);
    let pass = lower_err <= 1e-9 && upper_err <= 1e-9 && dist_err <= 1e-9 && block <= 1e-8;
    Ok(b.finish(
        pass,
        format!("aux {:.1e}/{:.1e}, distance {dist_err:.1e} (1e-9); off-diagonal Green ratio {block:.1e} (1e-8)", lower_err, upper_err),
    ))
}

/// m̲ ≤ m(x, e) ≤ m̄ on random (x, e), and m̄ ≤ m(·, |V|) ≤ (d²C_V)^{2/(2p−n)} m̄ with p = 2.
pub fn sandwich(cfg: &SuiteConfig) -> Result<CheckResult> {
    let mut b = Builder::new(4, "sandwich");
    let catalog = MatrixWeight::catalog(3);
    let mut r = rng(cfg, 4);
    let slack = 1e-6;
    let mut violations = 0usize;
    for k in 0..cfg.sandwich_samples {
        let (name, w) = &catalog[k % catalog.len()];
        let x: Vec<f64> = (0..3).map(|_| r.random_range(-2.0..2.0)).collect();
        let e = random_unit(w.d(), &mut r);
        let lo = aux_value(w, &x, &AuxKind::Lower, &cfg.aux)?;
        let hi = aux_value(w, &x, &AuxKind::Upper, &cfg.aux)?;
        let me = aux_value(w, &x, &AuxKind::Directional { e }, &cfg.aux)?;
        if me < lo * (1.0 - slack) || me > hi * (1.0 + slack) {
            violations += 1;
            b.row(name, "sandwich_violation", &x, me);
        }
    }
    b.metric("", "sandwich_violations", violations as f64);
    let (p, n) = (2.0, 3.0);
    let mut norm_violations = 0usize;
    for (name, w) in &catalog {
        let cv = certify(&Class::Bp { p }, w, &cfg.family, &cfg.cert)?.constant_estimate;
        let d = w.d() as f64;
        let factor = (d * d * cv).powf(2.0 / (2.0 * p - n));
        let norm = AuxKind::Scalar { v: ScalarWeight::MaxEigen { of: Box::new(w.clone()) } };
        let (mut lo_ratio, mut hi_ratio) = (f64::INFINITY, 0.0f64);
        for _ in 0..cfg.norm_points {
            let x: Vec<f64> = (0..3).map(|_| r.random_range(-2.0..2.0)).collect();
            let hi = aux_value(w, &x, &AuxKind::Upper, &cfg.aux)?;
            let mv = aux_value(w, &x, &norm, &cfg.aux)?;
            let ratio = mv / hi;
            lo_ratio = lo_ratio.min(ratio);
            hi_ratio = hi_ratio.max(ratio);
            if ratio < 1.0 - slack || ratio > factor * (1.0 + slack) {
                norm_violations += 1;
            }
            b.row(name, "norm_over_upper", &x, ratio);
        }
        b.metric(name, "c_v", cv);
        b.metric(name, "norm_bound_factor", factor);
        b.metric(name, "min_norm_over_upper", lo_ratio);
        b.metric(name, "max_norm_over_upper", hi_ratio);
    }
    b.metric("", "norm_violations", norm_violations as f64);
    Ok(b.finish(
        violations == 0 && norm_violations == 0,
        format!("{violations} sandwich violations in {} samples; {norm_violations} norm-comparison violations", cfg.sandwich_samples),
    ))
}

/// The implication matrix on the catalog, plus the class profile of the
/// rank-one-at-infinity weight.
pub fn class_consistency(cfg: &SuiteConfig) -> Result<CheckResult> {
    let mut b = Builder::new(5, "class_consistency");
    let mut disagreements = 0usize;
    let mut appendix_ok = false;
    for (name, w) in MatrixWeight::catalog(3) {
        let rep = cross_checks(&w, 2.0, &cfg.family, &cfg.cert);
        disagreements += rep.disagreements;
        for o in &rep.outcomes {
            b.row(name, &format!("{}_pass", o.label), &[], if o.pass { 1.0 } else { 0.0 });
        }
        let nc = nc_critical(&w, &default_nc_centers(3, cfg.nc_centers), &cfg.cert)?;
        b.row(name, "nc_pass", &[], if nc.pass { 1.0 } else { 0.0 });
        b.row(name, "nc_estimate", &[], nc.constant_estimate);
        if name == "appendix_a" {
            let pass = |l: &str| rep.outcome(l).is_some_and(|o| o.pass);
            appendix_ok = pass("bp") && pass("nd") && !nc.pass && !pass("ainf") && !pass("a2inf") && !pass("rbm");
        }
    }
    b.metric("", "disagreements", disagreements as f64);
    b.metric("appendix_a", "expected_profile", if appendix_ok { 1.0 } else { 0.0 });
    Ok(b.finish(
        disagreements == 0 && appendix_ok,
        format!("{disagreements} disagreements; rank-one weight profile (B_p, ND in; NC, A∞, A2∞, RBM out) matched = {appendix_ok}"),
    ))
}

/// NC witness on the critical cubes Q(x_m, √m) decreases and halves.
pub fn nc_witness_decay(cfg: &SuiteConfig) -> Result<CheckResult> {
    let mut b = Builder::new(6, "nc_witness_decay");
    let rows = nc_decay(&cfg.nc_masses, &cfg.cert.rule)?;
    for r in &rows {
        b.row("appendix_a", "nc_witness", &[r.m], r.witness);
    }
    let decreasing = rows.windows(2).all(|w| w[1].witness < w[0].witness);
    let (first, last) = (rows[0].witness, rows[rows.len() - 1].witness);
    b.metric("appendix_a", "last_over_first", last / first);
    Ok(b.finish(
        decreasing && last < 0.5 * first,
        format!("witnesses {:?}; strictly decreasing = {decreasing}, last/first = {:.3}", rows.iter().map(|r| r.witness).collect::<Vec<_>>(), last / first),
    ))
}

/// Log-log slope of the lower Fefferman–Phong ratio for (−|x|², 1)-directed cutoffs.
pub fn fp_counterexample(cfg: &SuiteConfig) -> Result<CheckResult> {
    let mut b = Builder::new(7, "fp_counterexample");
    let bad = fp_failure(&MatrixWeight::appendix_a(3), &cfg.fp_radii, &cfg.aux)?;
    let control = fp_failure(&MatrixWeight::identity(3, 2), &cfg.fp_radii, &cfg.aux)?;
    for (name, f) in [("appendix_a", &bad), ("identity", &control)] {
        for r in &f.rows {
            b.row(name, "fp_ratio", &[r.r], r.ratio);
        }
        b.metric(name, "slope", f.slope);
    }
    let pass = (0.7..=1.3).contains(&bad.slope) && control.slope.abs() <= 0.1;
    Ok(b.finish(pass, format!("slope {:.3} (0.7 to 1.3); identity control {:.3} (within 0.1)", bad.slope, control.slope)))
}

/// Resolvent representation identity with direct solves on a small grid.
pub fn resolvent_identity(cfg: &SuiteConfig) -> Result<CheckResult> {
    let mut b = Builder::new(8, "resolvent_identity");
    let g = cfg.resolvent_grid.grid()?;
    let pole = g.nearest(&[0.1, -0.1, 0.05]);
    let mut r = rng(cfg, 8);
    let nodes: Vec<usize> = (0..cfg.resolvent_nodes).map(|_| r.random_range(0..g.len())).collect();
    let mut worst: f64 = 0.0;
    for (name, w) in MatrixWeight::catalog(3) {
        let c = resolvent_identity_check(&w, &g, pole, &nodes)?;
        b.metric(name, "max_relative_error", c.max_error);
        worst = worst.max(c.max_error);
    }
    Ok(b.finish(worst <= 1e-7, format!("max relative error {worst:.2e} over the catalog (1e-7)")))
}

/// W = 0 Green function against 1/(4π|x−y|) in the band 5h ≤ |x−y| ≤ L/4.
pub fn free_green(cfg: &SuiteConfig) -> Result<CheckResult> {
    let mut b = Builder::new(9, "free_green");
    let g = cfg.free_grid.grid()?;
    let center = g.point(g.nearest(&[0.0; 3]));
    let c = free_green_check(&g, &Boundary::Radiation { center })?;
    b.metric("zero", "max_relative_error", c.max_rel_error);
    b.metric("zero", "mean_relative_error", c.mean_rel_error);
    b.metric("zero", "samples", c.samples as f64);
    Ok(b.finish(
        c.max_rel_error <= 0.05,
        format!("max deviation {:.2}% over {} nodes in [{:.3}, {:.3}] (5%)", 100.0 * c.max_rel_error, c.samples, c.band.0, c.band.1),
    ))
}

/// Upper decay envelope against d̲ and the small-scale difference bound.
pub fn decay_envelopes(cfg: &SuiteConfig) -> Result<CheckResult> {
    let mut b = Builder::new(10, "decay_envelopes");
    let w = MatrixWeight::diag_x2_x4(3);
    let coef = Coefficient::default();
    let g = cfg.decay_grid.grid()?;
    let pole = g.nearest(&[0.0; 3]);
    let lower = aux_field(&w, &g, &AuxKind::Lower, &cfg.aux)?;
    let gv = green_field(&assemble(&w, &coef, &g, &Boundary::Dirichlet)?, pole)?;
    let fit = envelope_fit(&gv, &agmon_field(&lower, pole, PathNorm::L2), &Projector::Norm)?;
    b.metric("diag_x2_x4", "eps_hat", fit.eps_hat);
    b.metric("diag_x2_x4", "r2", fit.r2);
    b.metric("diag_x2_x4", "envelope_samples", fit.samples.len() as f64);

    let gs = cfg.small_scale_grid.grid()?;
    let ps = gs.nearest(&[0.0; 3]);
    let boundary = Boundary::Radiation { center: gs.point(ps) };
    let zero = MatrixWeight::constant(3, SymMat::zeros(2))?;
    let upper = aux_field(&w, &gs, &AuxKind::Upper, &cfg.aux)?;
    let sv = green_field(&assemble(&w, &coef, &gs, &boundary)?, ps)?;
    let s0 = green_field(&assemble(&zero, &coef, &gs, &boundary)?, ps)?;
    let ss = small_scale_fit(&sv, &s0, &upper, f64::INFINITY)?;
    b.metric("diag_x2_x4", "alpha", ss.alpha);
    b.metric("diag_x2_x4", "small_scale_slope", ss.slope);
    b.metric("diag_x2_x4", "small_scale_coverage", ss.coverage);
    b.metric("diag_x2_x4", "small_scale_samples", ss.samples.len() as f64);
    let upper_ok = fit.eps_hat > 0.0 && fit.r2 >= 0.9;
    Ok(b.finish(
        upper_ok && ss.pass,
        format!(
            "upper fit slope {:.3}, R² {:.3}; small scale slope {:.3} (>= {:.3}), coverage {:.3} of {} samples",
            -fit.eps_hat,
            fit.r2,
            ss.slope,
            ss.alpha - 0.3,
            ss.coverage,
            ss.samples.len()
        ),
    ))
}

/// Landscape sandwich constants on two resolutions.
pub fn landscape_sandwich(cfg: &SuiteConfig) -> Result<CheckResult> {
    let mut b = Builder::new(11, "landscape_sandwich");
    let w = ordered_diagonal(3);
    let l = cfg.landscape_l;
    let mut r = rng(cfg, 11);
    let probes: Vec<Vec<f64>> =
        (0..cfg.landscape_probes).map(|_| (0..3).map(|_| r.random_range(-0.5 * l..0.5 * l)).collect()).collect();
    let (a, c) = (Grid::cube3(l, cfg.landscape_coarse)?, Grid::cube3(l, cfg.landscape_fine)?);
    let s = landscape_stability(&w, &Coefficient::default(), (&a, &c), &probes, &cfg.aux)?;
    for row in s.coarse.iter().chain(&s.fine) {
        b.row("ordered_diagonal", "u", &row.point, row.u);
    }
    b.metric("ordered_diagonal", "c1_coarse", s.c1.0);
    b.metric("ordered_diagonal", "c1_fine", s.c1.1);
    b.metric("ordered_diagonal", "c2_coarse", s.c2.0);
    b.metric("ordered_diagonal", "c2_fine", s.c2.1);
    Ok(b.finish(s.pass, format!("c1 {:.3}/{:.3}, c2 {:.3}/{:.3} (within 25%)", s.c1.0, s.c1.1, s.c2.0, s.c2.1)))
}

/// Determinant inequalities on random positive (semi)definite matrices.
pub fn determinant_inequalities(cfg: &SuiteConfig) -> Result<CheckResult> {
    let mut b = Builder::new(12, "determinant_inequalities");
    let mut r = rng(cfg, 12);
    let (mut jensen_bad, mut hadamard_bad) = (0usize, 0usize);
    for _ in 0..cfg.random_instances {
        let d = r.random_range(2..=4usize);
        let k = r.random_range(2..=6usize);
        let mats: Vec<SymMat> = (0..k).map(|_| random_psd(d, d + 1, &mut r)).collect();
        let raw: Vec<f64> = (0..k).map(|_| r.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let t: Vec<f64> = raw.iter().map(|v| v / total).collect();
        // Renormalize the last weight so the sum is 1 to rounding.
        let mut t = t;
        let rest: f64 = t[..k - 1].iter().sum();
        t[k - 1] = 1.0 - rest;
        if !check_discrete_jensen(&mats, &t, 1e-12)?.pass {
            jensen_bad += 1;
        }
        let rank = r.random_range(1..=d);
        let m = random_psd(d, rank, &mut r);
        if !check_hadamard(&m, &random_frame(d, &mut r))?.pass {
            hadamard_bad += 1;
        }
    }
    b.metric("", "jensen_violations", jensen_bad as f64);
    b.metric("", "hadamard_violations", hadamard_bad as f64);
    b.metric("", "instances", cfg.random_instances as f64);
    Ok(b.finish(
        jensen_bad == 0 && hadamard_bad == 0,
        format!("{jensen_bad} Jensen and {hadamard_bad} Hadamard violations in {} instances", cfg.random_instances),
    ))
}

pub type CheckFn = fn(&SuiteConfig) -> Result<CheckResult>;

/// The checks in order, with their stage names.
pub fn checks() -> Vec<(&'static str, CheckFn)> {
    vec![
        ("psi_closed_form", psi_closed_form),
        ("constant_weight", constant_weight),
        ("diagonal_reduction", diagonal_reduction),
        ("sandwich", sandwich),
        ("class_consistency", class_consistency),
        ("nc_witness_decay", nc_witness_decay),
        ("fp_counterexample", fp_counterexample),
        ("resolvent_identity", resolvent_identity),
        ("free_green", free_green),
        ("decay_envelopes", decay_envelopes),
        ("landscape_sandwich", landscape_sandwich),
        ("determinant_inequalities", determinant_inequalities),
    ]
}
