//! Auxiliary functions m(x, ·) defined through the averaged matrix Ψ, and their
//! slow-variation diagnostics.
//!
//! Each auxiliary function is 1/r* with r* = sup{r : criterion(Ψ(x, r)) ≤ 1}.

mod agmon;

pub use agmon::{agmon_field, close_pair_check, DistanceField, PathNorm};

use std::cell::RefCell;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cubature::{psi, QuadratureRule};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::SymMat;
use crate::weights::{MatrixWeight, ScalarWeight};

/// Which criterion of Ψ defines the auxiliary function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuxKind {
    /// λ_min(Ψ): the lower function m̲.
    Lower,
    /// λ_max(Ψ): the upper function m̄.
    Upper,
    /// ⟨Ψe, e⟩ for a unit vector e.
    Directional { e: Vec<f64> },
    /// Scalar Ψ of a scalar weight (the matrix weight is ignored).
    Scalar { v: ScalarWeight },
}

impl AuxKind {
    pub fn code(&self) -> u64 {
        match self {
            AuxKind::Lower => 0,
            AuxKind::Upper => 1,
            AuxKind::Directional { .. } => 2,
            AuxKind::Scalar { .. } => 3,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            AuxKind::Lower => "lower",
            AuxKind::Upper => "upper",
            AuxKind::Directional { .. } => "directional",
            AuxKind::Scalar { .. } => "scalar",
        }
    }

    fn criterion(&self, m: &SymMat) -> f64 {
        match self {
            AuxKind::Lower => m.lambda_min(),
            AuxKind::Upper => m.lambda_max(),
            AuxKind::Directional { e } => m.quad(e),
            AuxKind::Scalar { .. } => m.get(0, 0),
        }
    }
}

/// Scan and bisection settings for the crossing search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxSettings {
    pub rule: QuadratureRule,
    pub r_min: f64,
    pub r_max: f64,
    pub per_decade: u32,
    pub rel_tol: f64,
    /// The scan starts below the smallest lattice radius where the criterion exceeds `guard`.
    pub guard: f64,
}

impl Default for AuxSettings {
    fn default() -> Self {
        AuxSettings { rule: QuadratureRule::default(), r_min: 1e-4, r_max: 1e4, per_decade: 64, rel_tol: 1e-6, guard: 100.0 }
    }
}

impl AuxSettings {
    fn lattice_len(&self) -> i64 {
        ((self.r_max / self.r_min).log10() * self.per_decade as f64).round() as i64
    }

    fn radius(&self, k: i64) -> f64 {
        self.r_min * 10f64.powf(k as f64 / self.per_decade as f64)
    }

    fn index_of(&self, r: f64) -> i64 {
        ((r / self.r_min).log10() * self.per_decade as f64).round().clamp(0.0, self.lattice_len() as f64) as i64
    }
}

/// Ψ(x, ·) memoized on the scan lattice so several criteria share evaluations.
struct PsiCache<'a> {
    w: &'a MatrixWeight,
    x: &'a [f64],
    s: &'a AuxSettings,
    lattice: RefCell<HashMap<i64, SymMat>>,
}

impl<'a> PsiCache<'a> {
    fn at_index(&self, k: i64) -> Result<SymMat> {
        if let Some(m) = self.lattice.borrow().get(&k) {
            return Ok(m.clone());
        }
        let m = psi(self.w, self.x, self.s.radius(k), &self.s.rule)?;
        self.lattice.borrow_mut().insert(k, m.clone());
        Ok(m)
    }

    fn at(&self, r: f64) -> Result<SymMat> {
        psi(self.w, self.x, r, &self.s.rule)
    }
}

fn crossing(cache: &PsiCache, kind: &AuxKind, guess: f64) -> Result<f64> {
    let s = cache.s;
    let top = s.lattice_len();
    let fail = || Error::BracketFailure { op: "aux_value", x: cache.x.to_vec(), r_lo: s.r_min, r_hi: s.r_max };
    let crit = |k: i64| -> Result<f64> { Ok(kind.criterion(&cache.at_index(k)?)) };
    let step = (s.per_decade / 4).max(1) as i64;

    // Smallest lattice index (on a coarse stride) whose criterion reaches the guard.
    let mut k = s.index_of(guess);
    let mut k_hi;
    if crit(k)? >= s.guard {
        k_hi = k;
        while k_hi - step >= 0 && crit(k_hi - step)? >= s.guard {
            k_hi -= step;
        }
    } else {
        loop {
            if k == top {
                return Err(fail());
            }
            k = (k + step).min(top);
            if crit(k)? >= s.guard {
                break;
            }
        }
        k_hi = k;
    }
    // Downward scan for the last lattice point inside the sublevel set.
    let mut j = k_hi;
    loop {
        if j == 0 {
            return Err(fail());
        }
        j -= 1;
        if crit(j)? <= 1.0 {
            break;
        }
    }
    let (mut lo, mut hi) = (s.radius(j), s.radius(j + 1));
    while hi / lo - 1.0 > 0.1 * s.rel_tol {
        let mid = (lo * hi).sqrt();
        if kind.criterion(&cache.at(mid)?) <= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

fn scalar_weight_for(w: &MatrixWeight, kind: &AuxKind) -> Result<Option<MatrixWeight>> {
    match kind {
        AuxKind::Scalar { v } => Ok(Some(MatrixWeight::scalar(w.n(), v.clone())?)),
        AuxKind::Directional { e } if e.len() != w.d() => {
            Err(Error::domain("aux_value", "direction has the wrong dimension"))
        }
        _ => Ok(None),
    }
}

/// m(x) = 1/r* for the given kind.
pub fn aux_value(w: &MatrixWeight, x: &[f64], kind: &AuxKind, settings: &AuxSettings) -> Result<f64> {
    Ok(aux_values(w, x, std::slice::from_ref(kind), settings)?[0])
}

/// Several kinds at one point, sharing Ψ evaluations on the scan lattice.
pub fn aux_values(w: &MatrixWeight, x: &[f64], kinds: &[AuxKind], settings: &AuxSettings) -> Result<Vec<f64>> {
    let cache = PsiCache { w, x, s: settings, lattice: RefCell::new(HashMap::new()) };
    let mut out = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let r = match scalar_weight_for(w, kind)? {
            Some(sw) => {
                let c = PsiCache { w: &sw, x, s: settings, lattice: RefCell::new(HashMap::new()) };
                crossing(&c, kind, 1.0)?
            }
            None => crossing(&cache, kind, 1.0)?,
        };
        out.push(1.0 / r);
    }
    Ok(out)
}

/// Grid-sampled auxiliary function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxField {
    pub grid: Grid,
    pub d: usize,
    pub kind: AuxKind,
    pub values: Vec<f64>,
}

impl AuxField {
    /// A constant field, the reference case for the Agmon solver.
    pub fn constant(grid: Grid, d: usize, value: f64) -> Self {
        AuxField { grid, d, kind: AuxKind::Lower, values: vec![value; grid.len()] }
    }
}

/// Node-wise aux values over the grid (parallel over nodes).
pub fn aux_field(w: &MatrixWeight, grid: &Grid, kind: &AuxKind, settings: &AuxSettings) -> Result<AuxField> {
    if grid.dim != w.n() {
        return Err(Error::Config(format!("grid dimension {} differs from weight dimension {}", grid.dim, w.n())));
    }
    let reps = representatives(grid, symmetric(w, std::slice::from_ref(kind)));
    let values: Result<Vec<f64>> = reps.unique.par_iter().map(|&k| aux_value(w, &grid.point(k), kind, settings)).collect();
    let values = values?;
    Ok(AuxField { grid: *grid, d: w.d(), kind: kind.clone(), values: reps.slot.iter().map(|&s| values[s]).collect() })
}

/// Ψ(x, r) is invariant under coordinate reflections and permutations of x when
/// the integrand depends on |y| only, since the cube family shares that symmetry.
fn symmetric(w: &MatrixWeight, kinds: &[AuxKind]) -> bool {
    kinds.iter().all(|k| match k {
        AuxKind::Scalar { v } => v.is_radial(),
        _ => w.is_radial(),
    })
}

/// Nodes to evaluate, and for every grid node the position of its value among them.
struct Representatives {
    unique: Vec<usize>,
    slot: Vec<usize>,
}

fn representatives(grid: &Grid, symmetric: bool) -> Representatives {
    if !symmetric {
        return Representatives { unique: (0..grid.len()).collect(), slot: (0..grid.len()).collect() };
    }
    let mut pos = std::collections::HashMap::new();
    let mut unique = Vec::new();
    let slot = (0..grid.len())
        .map(|k| {
            *pos.entry(grid.canonical(k)).or_insert_with_key(|&c| {
                unique.push(c);
                unique.len() - 1
            })
        })
        .collect();
    Representatives { unique, slot }
}

/// Several kinds over a grid, sharing Ψ per node.
pub fn aux_fields(w: &MatrixWeight, grid: &Grid, kinds: &[AuxKind], settings: &AuxSettings) -> Result<Vec<AuxField>> {
    if grid.dim != w.n() {
        return Err(Error::Config(format!("grid dimension {} differs from weight dimension {}", grid.dim, w.n())));
    }
    let reps = representatives(grid, symmetric(w, kinds));
    let per_rep: Result<Vec<Vec<f64>>> =
        reps.unique.par_iter().map(|&k| aux_values(w, &grid.point(k), kinds, settings)).collect();
    let per_rep = per_rep?;
    let per_node: Vec<&Vec<f64>> = reps.slot.iter().map(|&s| &per_rep[s]).collect();
    Ok(kinds
        .iter()
        .enumerate()
        .map(|(i, kind)| AuxField {
            grid: *grid,
            d: w.d(),
            kind: kind.clone(),
            values: per_node.iter().map(|v| v[i]).collect(),
        })
        .collect())
}

/// Fitted slow-variation constants.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlowVariation {
    /// max m(x)/m(y) ∨ m(y)/m(x) over pairs with |x−y|∞ ≤ 1/m(x).
    pub c_a: f64,
    /// m(y) ≤ C_b (1 + |x−y| m(x))^{k0} m(x).
    pub c_b: f64,
    pub k0: f64,
    /// m(y) ≥ c_c (1 + |x−y| m(x))^{−k0/(k0+1)} m(x).
    pub c_c: f64,
    pub pairs_local: usize,
}

/// Deterministic random node pairs.
pub fn sample_pairs(grid: &Grid, count: usize, seed: u64) -> Vec<(usize, usize)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (rng.random_range(0..grid.len()), rng.random_range(0..grid.len()))).collect()
}

/// Fits the comparability, growth and decay constants over the given pairs.
///
/// k0 is the smallest value on a 0.05 grid for which the growth constant drops to
/// the local comparability constant.
pub fn slow_variation_check(field: &AuxField, pairs: &[(usize, usize)]) -> SlowVariation {
    let g = &field.grid;
    let data: Vec<(f64, f64)> = pairs
        .iter()
        .map(|&(a, b)| {
            let (pa, pb) = (g.point(a), g.point(b));
            let dist = pa.iter().zip(&pb).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            let (ma, mb) = (field.values[a], field.values[b]);
            (dist * ma, mb / ma)
        })
        .collect();
    let mut c_a: f64 = 1.0;
    let mut pairs_local = 0;
    for &(t, ratio) in &data {
        if t <= 1.0 {
            pairs_local += 1;
            c_a = c_a.max(ratio.max(1.0 / ratio));
        }
    }
    let growth = |k: f64| data.iter().map(|&(t, ratio)| ratio / (1.0 + t).powf(k)).fold(1.0f64, f64::max);
    let mut k0 = 0.0;
    while growth(k0) > c_a * (1.0 + 1e-12) && k0 < 20.0 {
        k0 += 0.05;
    }
    let c_b = growth(k0);
    let e = k0 / (k0 + 1.0);
    let c_c = data.iter().map(|&(t, ratio)| ratio * (1.0 + t).powf(e)).fold(1.0f64, f64::min);
    SlowVariation { c_a, c_b, k0, c_c, pairs_local }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_gives_two_sqrt_two() {
        let w = MatrixWeight::identity(3, 2);
        let s = AuxSettings::default();
        for kind in [AuxKind::Lower, AuxKind::Upper] {
            let m = aux_value(&w, &[0.3, -1.0, 2.0], &kind, &s).unwrap();
            assert!((m - 8f64.sqrt()).abs() < 1e-6 * 8f64.sqrt(), "{m}");
        }
    }

    #[test]
    fn scaled_identity_gives_four() {
        let w = MatrixWeight::constant(3, SymMat::scaled_identity(2, 2.0)).unwrap();
        let m = aux_value(&w, &[0.0; 3], &AuxKind::Lower, &AuxSettings::default()).unwrap();
        assert!((m - 4.0).abs() < 4e-6);
    }

    #[test]
    fn scalar_quadratic_at_origin() {
        let w = MatrixWeight::identity(3, 1);
        let kind = AuxKind::Scalar { v: ScalarWeight::Polynomial { coefs: vec![0.0, 1.0] } };
        let m = aux_value(&w, &[0.0; 3], &kind, &AuxSettings::default()).unwrap();
        assert!((m - 8f64.powf(0.25)).abs() < 1e-6 * 1.6818, "{m}");
    }

    #[test]
    fn zero_weight_fails_to_bracket() {
        let w = MatrixWeight::constant(3, SymMat::zeros(2)).unwrap();
        assert!(matches!(aux_value(&w, &[0.0; 3], &AuxKind::Upper, &AuxSettings::default()), Err(Error::BracketFailure { .. })));
    }

    #[test]
    fn diagonal_reduction_is_exact() {
        let w = MatrixWeight::diag_x2_x4(3);
        let s = AuxSettings::default();
        let v1 = AuxKind::Scalar { v: ScalarWeight::Polynomial { coefs: vec![0.0, 1.0] } };
        let v2 = AuxKind::Scalar { v: ScalarWeight::Polynomial { coefs: vec![0.0, 0.0, 1.0] } };
        // diag(|x|², |x|⁴) is unordered across |x| = 1; diag(|x|², 1 + |x|⁴) is ordered everywhere.
        let ordered = MatrixWeight::scalar_diag(
            3,
            vec![ScalarWeight::Polynomial { coefs: vec![0.0, 1.0] }, ScalarWeight::Polynomial { coefs: vec![1.0, 0.0, 1.0] }],
        )
        .unwrap();
        let v2o = AuxKind::Scalar { v: ScalarWeight::Polynomial { coefs: vec![1.0, 0.0, 1.0] } };
        for x in [[0.1, 0.2, 0.0], [1.5, -0.5, 2.0], [3.0, 0.0, 0.0]] {
            let lo = aux_value(&ordered, &x, &AuxKind::Lower, &s).unwrap();
            let hi = aux_value(&ordered, &x, &AuxKind::Upper, &s).unwrap();
            assert_eq!(lo, aux_value(&ordered, &x, &v1, &s).unwrap());
            assert_eq!(hi, aux_value(&ordered, &x, &v2o, &s).unwrap());
        }
        // Without a global order the lower function still sits below both scalar ones.
        let x = [0.5, 0.5, 0.5];
        let lo = aux_value(&w, &x, &AuxKind::Lower, &s).unwrap();
        assert!(lo <= aux_value(&w, &x, &v1, &s).unwrap() * (1.0 + 1e-9));
        assert!(lo <= aux_value(&w, &x, &v2, &s).unwrap() * (1.0 + 1e-9));
    }

    #[test]
    fn sandwich_on_appendix_a() {
        let w = MatrixWeight::appendix_a(3);
        let s = AuxSettings::default();
        let e = vec![0.6, 0.8];
        let kinds = [AuxKind::Lower, AuxKind::Directional { e }, AuxKind::Upper];
        let v = aux_values(&w, &[2.0, 1.0, 0.0], &kinds, &s).unwrap();
        assert!(v[0] <= v[1] && v[1] <= v[2], "{v:?}");
    }

    #[test]
    fn appendix_a_ratio_grows_along_ray() {
        let w = MatrixWeight::appendix_a(3);
        let s = AuxSettings::default();
        let ratio = |t: f64| {
            let v = aux_values(&w, &[t, 0.0, 0.0], &[AuxKind::Lower, AuxKind::Upper], &s).unwrap();
            v[1] / v[0]
        };
        assert!(ratio(20.0) > 10.0 * ratio(2.0));
    }

    #[test]
    fn constant_field_slow_variation() {
        let g = Grid::new(3, 1.0, 6).unwrap();
        let f = AuxField::constant(g, 1, 2.5);
        let sv = slow_variation_check(&f, &sample_pairs(&g, 500, 3));
        assert_eq!((sv.c_a, sv.c_b, sv.k0, sv.c_c), (1.0, 1.0, 0.0, 1.0));
    }

    #[test]
    fn symmetry_reduction_matches_direct_evaluation() {
        let g = Grid::cube3(2.0, 9).unwrap();
        let st = AuxSettings::default();
        let w = MatrixWeight::diag_x2_x4(3);
        let f = aux_field(&w, &g, &AuxKind::Lower, &st).unwrap();
        for k in 0..g.len() {
            let direct = aux_value(&w, &g.point(k), &AuxKind::Lower, &st).unwrap();
            assert!((f.values[k] - direct).abs() <= 1e-6 * direct, "{k}");
        }
        assert_eq!(representatives(&g, true).unique.len(), 35);
        let p = crate::poly::Poly::constant(3, 1.0);
        let skew = MatrixWeight::polynomial_psd(3, vec![vec![p]]).unwrap();
        assert!(!symmetric(&skew, &[AuxKind::Lower]));
    }
}
