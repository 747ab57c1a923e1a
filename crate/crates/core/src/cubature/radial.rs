//! Cube integrals of radial integrands in three dimensions.
//!
//! For g = g(|x|) the divergence theorem applied twice (in the cube, then in each
//! face) gives
//!
//! ∫_Q g = Σ_F h_F Σ_{e ⊂ F} sgn(d_e) ∫_{θ₁}^{θ₂} Φ_{|h_F|}(√(h_F² + d_e² sec²θ)) dθ,
//!
//! Φ_H(U) = ∫₀^U g(s) s² (1/max(s, H) − 1/U) ds,
//!
//! where h_F is the signed distance from the origin to the face plane and d_e the
//! signed in-plane distance from the foot point to the edge line (both positive on
//! the inner side). Every remaining integral is one-dimensional and split at the
//! kink radii of g, so piecewise smooth profiles integrate to near machine precision.

use super::quad::{gauss_legendre, Integral};

/// Grading pieces toward s = 0 before the divergence test may fire.
fn divergence_cap(level: u32) -> usize {
    8 * (level as usize + 2)
}

const MAX_PIECES: usize = 400;

struct Ctx<'a> {
    g: &'a dyn Fn(f64, &mut [f64]),
    breaks: &'a [f64],
    graded: bool,
    level: u32,
    m: usize,
    /// Rule for the θ pieces.
    theta_nodes: (Vec<f64>, Vec<f64>),
    /// Rule for the short radial gaps between consecutive U values.
    gap_nodes: (Vec<f64>, Vec<f64>),
    buf: std::cell::RefCell<Vec<f64>>,
}

/// A θ quadrature node of one face: Φ_H(u) enters with weight `wt`.
struct Node {
    u: f64,
    wt: f64,
}

impl Ctx<'_> {
    /// Adds ∫_a^b g(s) s² ds into `d` and ∫_a^b g(s) s² / max(s, h) ds into `c`.
    fn gap(&self, a: f64, b: f64, h: f64, rule: &(Vec<f64>, Vec<f64>), c: &mut [f64], d: &mut [f64]) {
        if b <= a {
            return;
        }
        let (x, w) = rule;
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut buf = self.buf.borrow_mut();
        for (t, wt) in x.iter().zip(w) {
            let s = mid + half * t;
            (self.g)(s, &mut buf);
            let fd = half * wt * s * s;
            let fc = fd / s.max(h);
            for ((ci, di), v) in c.iter_mut().zip(d.iter_mut()).zip(buf.iter()) {
                *ci += fc * v;
                *di += fd * v;
            }
        }
    }

    /// Cumulative integrals over [0, top], graded toward 0 when requested.
    /// Returns true if the grading detected divergence.
    fn head(&self, top: f64, h: f64, c: &mut [f64], d: &mut [f64]) -> bool {
        if !self.graded {
            self.gap(0.0, top, h, &self.theta_nodes, c, d);
            return false;
        }
        let norm = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        let mut prev_ratio: Option<Vec<f64>> = None;
        let mut growing = 0;
        let mut hi = top;
        for j in 0..MAX_PIECES {
            let (mut pc, mut pd) = (vec![0.0; self.m], vec![0.0; self.m]);
            self.gap(0.5 * hi, hi, h, &self.theta_nodes, &mut pc, &mut pd);
            hi *= 0.5;
            for (o, v) in c.iter_mut().zip(&pc) {
                *o += v;
            }
            for (o, v) in d.iter_mut().zip(&pd) {
                *o += v;
            }
            let (pn, tn) = (norm(&pc).max(norm(&pd)), norm(c).max(norm(d)));
            if pn <= 1e-17 * tn || (tn == 0.0 && j >= 2) {
                return false;
            }
            if let Some((qc, qd)) = &prev {
                if pn >= norm(qc).max(norm(qd)) * (1.0 - 1e-12) {
                    growing += 1;
                } else {
                    growing = 0;
                }
                if growing >= 3 && j + 1 >= divergence_cap(self.level) {
                    return true;
                }
                let ratio: Vec<f64> = pc
                    .iter()
                    .chain(&pd)
                    .zip(qc.iter().chain(qd))
                    .map(|(a, b)| if *b == 0.0 { 0.0 } else { a / b })
                    .collect();
                if let Some(pr) = &prev_ratio {
                    let settled = j >= 3
                        && ratio.iter().zip(pr).all(|(r, s)| (0.0..1.0 - 1e-9).contains(r) && (r - s).abs() <= 1e-9);
                    if settled {
                        let m = self.m;
                        for k in 0..m {
                            c[k] += pc[k] * ratio[k] / (1.0 - ratio[k]);
                            d[k] += pd[k] * ratio[m + k] / (1.0 - ratio[m + k]);
                        }
                        return false;
                    }
                }
                prev_ratio = Some(ratio);
            }
            prev = Some((pc, pd));
        }
        false
    }

    /// θ nodes of sgn(d) ∫ Φ_H(√(h² + d² sec²θ)) dθ over the edge parameter range [s1, s2].
    fn edge_nodes(&self, h: f64, d: f64, s1: f64, s2: f64, out: &mut Vec<Node>) {
        if d == 0.0 || s1 == s2 {
            return;
        }
        let dd = d.abs();
        let sign = d.signum();
        let (t1, t2) = ((s1 / dd).atan(), (s2 / dd).atan());
        let mut pts = vec![t1, t2];
        for &rho in self.breaks {
            let q = rho * rho - h * h;
            if q > dd * dd {
                let t = (dd / q.sqrt()).acos();
                for c in [t, -t] {
                    if c > t1 && c < t2 {
                        pts.push(c);
                    }
                }
            }
        }
        pts.sort_by(f64::total_cmp);
        let mut segs = Vec::new();
        for seg in pts.windows(2) {
            split_toward_poles(seg[0], seg[1], 0, &mut segs);
        }
        let (x, w) = &self.theta_nodes;
        for seg in &segs {
            let half = 0.5 * (seg[1] - seg[0]);
            let mid = 0.5 * (seg[0] + seg[1]);
            for (t, wt) in x.iter().zip(w) {
                let sec = 1.0 / (mid + half * t).cos();
                out.push(Node { u: (h * h + dd * dd * sec * sec).sqrt(), wt: sign * half * wt });
            }
        }
    }

    /// Σ wt·Φ_H(u) over the nodes, walking the cumulative integrals once in increasing u.
    fn face(&self, h: f64, mut nodes: Vec<Node>, acc: &mut [f64]) -> bool {
        if nodes.is_empty() {
            return false;
        }
        nodes.sort_by(|a, b| a.u.total_cmp(&b.u));
        let h = h.abs();
        let mut stops: Vec<f64> = self.breaks.iter().copied().filter(|&b| b > 0.0).collect();
        stops.push(h);
        stops.sort_by(f64::total_cmp);
        let first = stops.iter().copied().filter(|&b| b > 0.0).fold(nodes[0].u, f64::min);
        let (mut c, mut d) = (vec![0.0; self.m], vec![0.0; self.m]);
        let divergent = self.head(first, h, &mut c, &mut d);
        let mut at = first;
        let mut pending: Vec<f64> = stops.into_iter().filter(|&b| b > first).collect();
        pending.reverse();
        for node in &nodes {
            while let Some(&b) = pending.last() {
                if b >= node.u {
                    break;
                }
                self.gap(at, b, h, &self.gap_nodes, &mut c, &mut d);
                at = b;
                pending.pop();
            }
            self.gap(at, node.u, h, &self.gap_nodes, &mut c, &mut d);
            at = node.u;
            for ((o, ci), di) in acc.iter_mut().zip(&c).zip(&d) {
                *o += node.wt * (ci - di / node.u);
            }
        }
        divergent
    }
}

/// Splits [a, b] ⊂ (−π/2, π/2) until every piece is at most half its distance to
/// the poles of sec θ, which keeps the Gauss rule geometrically convergent.
fn split_toward_poles(a: f64, b: f64, depth: u32, out: &mut Vec<[f64; 2]>) {
    let gap = std::f64::consts::FRAC_PI_2 - a.abs().max(b.abs());
    if b - a > 0.5 * gap && depth < 64 {
        let mid = 0.5 * (a + b);
        split_toward_poles(a, mid, depth + 1, out);
        split_toward_poles(mid, b, depth + 1, out);
    } else {
        out.push([a, b]);
    }
}

/// ∫ over the box [lo, hi] ⊂ ℝ³ of g(|x|), with `g(s, out)` writing m values.
///
/// `breaks` are radii where g is not smooth; `graded` adds dyadic grading toward
/// s = 0 for profiles singular at the origin. θ pieces use 8·(level+1) Gauss nodes.
pub fn radial_box_integral(
    g: &dyn Fn(f64, &mut [f64]),
    breaks: &[f64],
    graded: bool,
    lo: &[f64],
    hi: &[f64],
    level: u32,
    m: usize,
) -> Integral {
    debug_assert_eq!(lo.len(), 3);
    let ctx = Ctx {
        g,
        breaks,
        graded,
        level,
        m,
        theta_nodes: gauss_legendre(8 * (level as usize + 1)),
        gap_nodes: gauss_legendre(6 * (level as usize + 1)),
        buf: std::cell::RefCell::new(vec![0.0; m]),
    };
    let mut total = vec![0.0; m];
    let mut divergent = false;
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        for h in [hi[a], -lo[a]] {
            if h == 0.0 {
                continue;
            }
            // Edges u_b = hi_b / lo_b run along axis c, and vice versa.
            let mut nodes = Vec::new();
            ctx.edge_nodes(h, hi[b], lo[c], hi[c], &mut nodes);
            ctx.edge_nodes(h, -lo[b], lo[c], hi[c], &mut nodes);
            ctx.edge_nodes(h, hi[c], lo[b], hi[b], &mut nodes);
            ctx.edge_nodes(h, -lo[c], lo[b], hi[b], &mut nodes);
            let mut face = vec![0.0; m];
            divergent |= ctx.face(h, nodes, &mut face);
            for (t, v) in total.iter_mut().zip(&face) {
                *t += h * v;
            }
        }
    }
    Integral { value: total, divergent }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::mean_abs2_powers;

    fn vol(lo: &[f64], hi: &[f64]) -> f64 {
        lo.iter().zip(hi).map(|(a, b)| b - a).product()
    }

    #[test]
    fn polynomial_moments_match_closed_form() {
        let boxes = [([-1.0, -1.0, -1.0], [1.0, 1.0, 1.0]), ([0.5, -0.2, 1.0], [1.5, 0.8, 2.0]), ([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])];
        for (lo, hi) in boxes {
            let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
            let r = 0.5 * (hi[0] - lo[0]);
            let want = mean_abs2_powers(&center, r, 2);
            let g = |s: f64, out: &mut [f64]| {
                out[0] = 1.0;
                out[1] = s * s;
                out[2] = s.powi(4);
            };
            let got = radial_box_integral(&g, &[], false, &lo, &hi, 0, 3);
            for k in 0..3 {
                let v = got.value[k] / vol(&lo, &hi);
                assert!((v - want[k]).abs() < 1e-12 * want[k].max(1.0), "box {lo:?} k={k}: {v} vs {}", want[k]);
            }
        }
    }

    #[test]
    fn kinked_profile_with_breakpoint() {
        // max(s², s⁴) = s² + (s⁴ − s²)₊; compare the breakpoint rule against a refined one.
        let g = |s: f64, out: &mut [f64]| out[0] = (s * s).max(s.powi(4));
        let (lo, hi) = ([-0.3, 0.1, -0.9], [0.9, 1.3, 0.3]);
        let a = radial_box_integral(&g, &[1.0], false, &lo, &hi, 0, 1).value[0];
        let b = radial_box_integral(&g, &[1.0], false, &lo, &hi, 2, 1).value[0];
        assert!((a - b).abs() < 1e-13 * b, "{a} {b}");
    }

    #[test]
    fn singular_profile_and_divergence() {
        // ∫_{[−1,1]³} |x|^{−2}: compare with the graded tensor reference.
        let g = |s: f64, out: &mut [f64]| out[0] = s.powi(-2);
        let (lo, hi) = ([-1.0; 3], [1.0; 3]);
        let v = radial_box_integral(&g, &[], true, &lo, &hi, 0, 1);
        assert!(!v.divergent);
        let v1 = radial_box_integral(&g, &[], true, &lo, &hi, 1, 1);
        assert!((v.value[0] - v1.value[0]).abs() < 1e-10 * v1.value[0], "{} {}", v.value[0], v1.value[0]);
        // 8 · 3 ∫∫_{[0,1]²} du dv / (1 + u² + v²).
        let (x, w) = gauss_legendre(40);
        let mut acc = 0.0;
        for (a, wa) in x.iter().zip(&w) {
            for (b, wb) in x.iter().zip(&w) {
                let (u, t) = (0.5 * (a + 1.0), 0.5 * (b + 1.0));
                acc += 0.25 * wa * wb / (1.0 + u * u + t * t);
            }
        }
        assert!((v.value[0] - 24.0 * acc).abs() < 1e-9 * v.value[0]);
        let bad = |s: f64, out: &mut [f64]| out[0] = s.powi(-4);
        let a = radial_box_integral(&bad, &[], true, &lo, &hi, 0, 1);
        let b = radial_box_integral(&bad, &[], true, &lo, &hi, 1, 1);
        assert!(a.divergent && b.divergent && b.value[0] > a.value[0]);
    }

    #[test]
    fn origin_on_face_and_vertex() {
        let g = |s: f64, out: &mut [f64]| out[0] = s * s;
        for (lo, hi) in [([0.0, -1.0, -1.0], [2.0, 1.0, 1.0]), ([0.0, 0.0, 0.0], [2.0, 2.0, 2.0])] {
            let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
            let want = mean_abs2_powers(&center, 1.0, 1)[1] * 8.0;
            let got = radial_box_integral(&g, &[], false, &lo, &hi, 0, 1).value[0];
            assert!((got - want).abs() < 1e-12 * want);
        }
    }
}
