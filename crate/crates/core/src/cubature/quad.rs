//! Tensor-product quadrature over boxes, with corner grading toward a singular point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative agreement between successive refinement levels.
pub const QUAD_TOL: f64 = 1e-6;
/// Highest refinement level tried before giving up.
pub const MAX_LEVEL: u32 = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// One cell-centered node per cell.
    Midpoint,
    /// Two Gauss–Legendre nodes per cell and axis.
    Gauss2,
    /// Four Gauss–Legendre nodes per cell and axis; exact for degree 7 per axis.
    Gauss4,
}

impl Scheme {
    fn nodes_per_cell(self) -> usize {
        match self {
            Scheme::Midpoint => 1,
            Scheme::Gauss2 => 2,
            Scheme::Gauss4 => 4,
        }
    }
}

/// Quadrature settings; `level` is the starting (or fixed) refinement depth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub level: u32,
    pub scheme: Scheme,
    /// Keep doubling until two successive levels agree to [`QUAD_TOL`].
    #[serde(default = "yes")]
    pub adaptive: bool,
    /// Use closed-form cube moments when the weight is polynomial.
    #[serde(default = "yes")]
    pub use_exact: bool,
}

fn yes() -> bool {
    true
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule { level: 0, scheme: Scheme::Gauss2, adaptive: true, use_exact: true }
    }
}

impl QuadratureRule {
    pub fn fixed(level: u32) -> Self {
        QuadratureRule { level, scheme: Scheme::Gauss2, adaptive: false, use_exact: true }
    }

    /// Higher-order variant for smooth nonlinear integrands.
    pub fn gauss4(self) -> Self {
        QuadratureRule { scheme: Scheme::Gauss4, ..self }
    }

    /// Starting level raised by `k`.
    pub fn deeper(self, k: u32) -> Self {
        QuadratureRule { level: (self.level + k).min(MAX_LEVEL), ..self }
    }

    /// Forces quadrature even where closed-form moments exist.
    pub fn quadrature_only(self) -> Self {
        QuadratureRule { use_exact: false, ..self }
    }

    /// Total node count of the plain tensor rule on an n-dimensional box.
    pub fn node_count(&self, n: usize) -> usize {
        ((1usize << self.level) * self.scheme.nodes_per_cell()).pow(n as u32)
    }
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; q];
    let mut w = vec![0.0; q];
    for i in 0..q.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=q {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if q == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = q as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if q == 1 {
            return (vec![0.0], vec![2.0]);
        }
        x[i] = -z;
        x[q - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[q - 1 - i] = w[i];
    }
    (x, w)
}

/// 1-D composite rule on [a, b]: `cells` cells with the given base nodes.
fn composite(a: f64, b: f64, cells: usize, base: &(Vec<f64>, Vec<f64>)) -> Vec<(f64, f64)> {
    let h = (b - a) / cells as f64;
    let mut out = Vec::with_capacity(cells * base.0.len());
    for c in 0..cells {
        let mid = a + (c as f64 + 0.5) * h;
        for (t, w) in base.0.iter().zip(&base.1) {
            out.push((mid + 0.5 * h * t, 0.5 * h * w));
        }
    }
    out
}

fn base_rule(scheme: Scheme) -> (Vec<f64>, Vec<f64>) {
    match scheme {
        Scheme::Midpoint => (vec![0.0], vec![2.0]),
        Scheme::Gauss2 => gauss_legendre(2),
        Scheme::Gauss4 => gauss_legendre(4),
    }
}

/// Σ w f over a tensor grid, accumulated into `acc`.
fn tensor_sum(f: &dyn Fn(&[f64], &mut [f64]), axes: &[Vec<(f64, f64)>], acc: &mut [f64]) {
    let n = axes.len();
    let m = acc.len();
    let mut idx = vec![0usize; n];
    let mut x: Vec<f64> = axes.iter().map(|a| a[0].0).collect();
    let mut buf = vec![0.0; m];
    if axes.iter().any(|a| a.is_empty()) {
        return;
    }
    loop {
        let mut w = 1.0;
        for k in 0..n {
            let (xk, wk) = axes[k][idx[k]];
            x[k] = xk;
            w *= wk;
        }
        f(&x, &mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += w * b;
        }
        let mut k = n;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Plain tensor rule over the box [lo, hi].
pub fn integrate_box(
    f: &dyn Fn(&[f64], &mut [f64]),
    lo: &[f64],
    hi: &[f64],
    level: u32,
    scheme: Scheme,
    m: usize,
) -> Vec<f64> {
    let base = base_rule(scheme);
    let cells = 1usize << level;
    let axes: Vec<Vec<(f64, f64)>> = lo.iter().zip(hi).map(|(&a, &b)| composite(a, b, cells, &base)).collect();
    let mut acc = vec![0.0; m];
    tensor_sum(f, &axes, &mut acc);
    acc
}

/// Result of one quadrature pass.
#[derive(Clone, Debug)]
pub struct Integral {
    pub value: Vec<f64>,
    /// Set when the graded annuli stop shrinking: the integral is infinite.
    pub divergent: bool,
}

const MAX_ANNULI: usize = 60;

/// Integral over the box spanned by the corner `s` and the opposite corner `c`.
///
/// The box is peeled into dyadic L-shaped annuli shrinking toward `s`; each annulus
/// consists of 2ⁿ−1 boxes integrated with a single-cell Gauss rule of 2(level+1)
/// nodes per axis. Once the per-entry annulus ratios settle, the remaining tail is
/// summed as a geometric series.
fn graded_corner(f: &dyn Fn(&[f64], &mut [f64]), s: &[f64], c: &[f64], level: u32, m: usize) -> Integral {
    let n = s.len();
    let q = 2 * (level as usize + 1);
    let gl = gauss_legendre(q);
    let mut total = vec![0.0; m];
    let mut prev: Option<Vec<f64>> = None;
    let mut prev_ratio: Option<Vec<f64>> = None;
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    let mut growing = 0usize;
    let divergence_cap = 4 * (level as usize + 2);
    for j in 0..MAX_ANNULI {
        let t_hi = 0.5f64.powi(j as i32);
        let t_mid = 0.5 * t_hi;
        let mut ann = vec![0.0; m];
        for mask in 1u32..(1u32 << n) {
            for i in 0..n {
                let span = c[i] - s[i];
                let (a, b) = if mask & (1 << i) != 0 { (t_mid, t_hi) } else { (0.0, t_mid) };
                let (p, r) = (s[i] + a * span, s[i] + b * span);
                lo[i] = p.min(r);
                hi[i] = p.max(r);
            }
            let axes: Vec<Vec<(f64, f64)>> = lo.iter().zip(&hi).map(|(&a, &b)| composite(a, b, 1, &gl)).collect();
            tensor_sum(f, &axes, &mut ann);
        }
        for (t, a) in total.iter_mut().zip(&ann) {
            *t += a;
        }
        let tn = total.iter().fold(0.0f64, |x, v| x.max(v.abs()));
        let an = ann.iter().fold(0.0f64, |x, v| x.max(v.abs()));
        if an <= 1e-15 * tn || tn == 0.0 && j >= 2 {
            return Integral { value: total, divergent: false };
        }
        if let Some(p) = &prev {
            let pn = p.iter().fold(0.0f64, |x, v| x.max(v.abs()));
            if an >= pn * (1.0 - 1e-12) {
                growing += 1;
            } else {
                growing = 0;
            }
            if growing >= 3 && j + 1 >= divergence_cap {
                return Integral { value: total, divergent: true };
            }
            let ratio: Vec<f64> =
                ann.iter().zip(p).map(|(a, b)| if *b == 0.0 { if *a == 0.0 { 0.0 } else { f64::NAN } } else { a / b }).collect();
            if let Some(pr) = &prev_ratio {
                let settled = j >= 3
                    && ratio.iter().zip(pr).all(|(r, s)| r.is_finite() && (0.0..1.0 - 1e-9).contains(r) && (r - s).abs() <= 1e-7);
                if settled {
                    for ((t, a), r) in total.iter_mut().zip(&ann).zip(&ratio) {
                        *t += a * r / (1.0 - r);
                    }
                    return Integral { value: total, divergent: false };
                }
            }
            prev_ratio = Some(ratio);
        }
        prev = Some(ann);
    }
    let divergent = growing >= 3;
    Integral { value: total, divergent }
}

/// Integral of `f` (m outputs) over the box [lo, hi] at a single level.
///
/// If `singular` lies within one half-side of the box, the box is split at the
/// nearest point and every piece is graded toward it; otherwise the plain tensor
/// rule is used.
pub fn integrate_level(
    f: &dyn Fn(&[f64], &mut [f64]),
    lo: &[f64],
    hi: &[f64],
    singular: Option<&[f64]>,
    level: u32,
    scheme: Scheme,
    m: usize,
) -> Integral {
    let n = lo.len();
    let near = singular.and_then(|s| {
        let p: Vec<f64> = (0..n).map(|i| s[i].clamp(lo[i], hi[i])).collect();
        let dist = (0..n).map(|i| (s[i] - p[i]).abs()).fold(0.0, f64::max);
        let half = (0..n).map(|i| 0.5 * (hi[i] - lo[i])).fold(f64::INFINITY, f64::min);
        (dist < half).then_some(p)
    });
    let Some(p) = near else {
        return Integral { value: integrate_box(f, lo, hi, level, scheme, m), divergent: false };
    };
    let mut total = vec![0.0; m];
    let mut divergent = false;
    let mut c = vec![0.0; n];
    'corner: for corner in 0u32..(1u32 << n) {
        for i in 0..n {
            c[i] = if corner & (1 << i) != 0 { hi[i] } else { lo[i] };
            if c[i] == p[i] {
                continue 'corner;
            }
        }
        let part = graded_corner(f, &p, &c, level, m);
        divergent |= part.divergent;
        for (t, v) in total.iter_mut().zip(&part.value) {
            *t += v;
        }
    }
    Integral { value: total, divergent }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |x, y| x.max(y.abs()))
}

/// Entrywise relative change with a floor tied to the largest entry.
pub fn relative_change(a: &[f64], b: &[f64]) -> f64 {
    let scale = max_abs(b);
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let den = y.abs().max(1e-9 * scale);
            if den == 0.0 {
                0.0
            } else {
                (x - y).abs() / den
            }
        })
        .fold(0.0, f64::max)
}

/// Runs `level_fn` at successive levels per `rule` until two agree to [`QUAD_TOL`].
///
/// Divergent or non-finite results are returned at once, flagged or as computed.
pub fn adapt(op: &'static str, level_fn: &dyn Fn(u32) -> Integral, rule: &QuadratureRule) -> Result<Integral> {
    let mut cur = level_fn(rule.level);
    if !rule.adaptive || cur.divergent || cur.value.iter().any(|v| !v.is_finite()) {
        return Ok(cur);
    }
    let mut change = f64::INFINITY;
    for level in rule.level + 1..=MAX_LEVEL {
        let next = level_fn(level);
        if next.divergent {
            return Ok(next);
        }
        change = relative_change(&next.value, &cur.value);
        cur = next;
        if change <= QUAD_TOL || change.is_nan() {
            return Ok(cur);
        }
    }
    Err(Error::QuadratureNonConvergence { op, level: MAX_LEVEL, change })
}

/// Tensor-rule integral with adaptive level doubling per `rule`.
pub fn integrate(
    op: &'static str,
    f: &dyn Fn(&[f64], &mut [f64]),
    lo: &[f64],
    hi: &[f64],
    singular: Option<&[f64]>,
    rule: &QuadratureRule,
    m: usize,
) -> Result<Integral> {
    adapt(op, &|level| integrate_level(f, lo, hi, singular, level, rule.scheme, m), rule)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rules_integrate_polynomials() {
        for q in 1..12 {
            let (x, w) = gauss_legendre(q);
            for k in 0..(2 * q) {
                let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((s - exact).abs() < 1e-13, "q={q} k={k}");
            }
        }
    }

    #[test]
    fn node_count_formula() {
        let r = QuadratureRule { level: 2, scheme: Scheme::Gauss2, adaptive: false, use_exact: false };
        assert_eq!(r.node_count(3), 512);
        let count = std::cell::Cell::new(0usize);
        let f = |_: &[f64], out: &mut [f64]| {
            count.set(count.get() + 1);
            out[0] = 1.0;
        };
        let v = integrate_box(&f, &[0.0; 3], &[1.0; 3], 2, Scheme::Gauss2, 1);
        assert_eq!(count.get(), 512);
        assert!((v[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn midpoint_never_hits_cell_faces() {
        let f = |x: &[f64], out: &mut [f64]| {
            assert!(x.iter().any(|v| *v != 0.0));
            out[0] = 1.0;
        };
        integrate_box(&f, &[-1.0; 3], &[1.0; 3], 3, Scheme::Midpoint, 1);
    }

    #[test]
    fn graded_handles_integrable_singularity() {
        // ∫_{[0,1]^3} |y|^{-2} dy by grading at the corner; 1-D reference by symmetry.
        let f = |x: &[f64], out: &mut [f64]| out[0] = 1.0 / x.iter().map(|v| v * v).sum::<f64>();
        let rule = QuadratureRule::default();
        let v = integrate("t", &f, &[0.0; 3], &[1.0; 3], Some(&[0.0; 3]), &rule, 1).unwrap();
        let reference = 3.0 * graded_reference();
        assert!(!v.divergent);
        assert!((v.value[0] - reference).abs() < 1e-6 * reference, "{} vs {}", v.value[0], reference);
    }

    fn graded_reference() -> f64 {
        // On the piece where y1 is the largest coordinate, y = t(1, u, v) has Jacobian t²,
        // so the radial integral is exactly ∫∫ du dv / (1 + u² + v²).
        let (x, w) = gauss_legendre(40);
        let mut s = 0.0;
        for i in 0..40 {
            for j in 0..40 {
                let u = 0.5 * (x[i] + 1.0);
                let v = 0.5 * (x[j] + 1.0);
                s += 0.25 * w[i] * w[j] / (1.0 + u * u + v * v);
            }
        }
        s
    }

    #[test]
    fn graded_detects_non_integrable_power() {
        let f = |x: &[f64], out: &mut [f64]| out[0] = x.iter().map(|v| v * v).sum::<f64>().powf(-2.0);
        let rule = QuadratureRule::default();
        let v = integrate("t", &f, &[-1.0; 3], &[1.0; 3], Some(&[0.0; 3]), &rule, 1).unwrap();
        assert!(v.divergent);
    }

    #[test]
    fn adaptive_converges_on_smooth_integrand() {
        let f = |x: &[f64], out: &mut [f64]| out[0] = (x[0] + 2.0 * x[1] - x[2]).exp();
        let rule = QuadratureRule::default();
        let v = integrate("t", &f, &[0.0; 3], &[1.0; 3], None, &rule, 1).unwrap();
        let e1 = std::f64::consts::E - 1.0;
        let exact = e1 * (0.5 * (2f64.exp() - 1.0)) * (1.0 - (-1f64).exp());
        assert!((v.value[0] - exact).abs() < 1e-6 * exact);
    }
}
