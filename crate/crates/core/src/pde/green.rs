//! Discrete fundamental matrices and the experiments built on them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solve::{BandedCholesky, LinearSolver};
use super::{assemble, Boundary, Coefficient, DiscreteOperator};
use crate::auxmetric::{aux_value, AuxKind, AuxSettings};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::SymMat;
use crate::weights::MatrixWeight;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Cg,
    /// Banded Cholesky: direct, exact to rounding, O(N⁷d³) so only for small grids.
    Banded,
}

/// Γ(·, y₀): one d×d block per node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenField {
    pub grid: Grid,
    pub d: usize,
    pub pole: usize,
    /// blocks[node·d² + i·d + k] = Γ_ik(x_node, y₀).
    pub blocks: Vec<f64>,
    /// Worst relative residual over the d column solves.
    pub residual: f64,
}

/// Spectral norm of a row-major d×d block.
pub fn block_norm(b: &[f64], d: usize) -> f64 {
    if d == 1 {
        return b[0].abs();
    }
    let btb = SymMat::from_fn(d, |i, j| (0..d).map(|k| b[k * d + i] * b[k * d + j]).sum());
    btb.lambda_max().max(0.0).sqrt()
}

impl GreenField {
    pub fn block(&self, node: usize) -> &[f64] {
        let dd = self.d * self.d;
        &self.blocks[node * dd..(node + 1) * dd]
    }

    pub fn entry(&self, node: usize, i: usize, k: usize) -> f64 {
        self.blocks[node * self.d * self.d + i * self.d + k]
    }

    pub fn norm(&self, node: usize) -> f64 {
        block_norm(self.block(node), self.d)
    }

    /// ⟨Γ(x, y₀)e, e⟩.
    pub fn quad(&self, node: usize, e: &[f64]) -> f64 {
        let b = self.block(node);
        let d = self.d;
        (0..d).map(|i| (0..d).map(|k| e[i] * b[i * d + k] * e[k]).sum::<f64>()).sum()
    }
}

/// Solves op·g = e_k δ_{y₀}/h³ for each component k.
pub fn green_field_with(op: &DiscreteOperator, pole: usize, solver: &dyn LinearSolver) -> Result<GreenField> {
    let d = op.d;
    let h3 = op.grid.h().powi(3);
    let cols: Vec<Result<super::Solution>> = (0..d)
        .into_par_iter()
        .map(|k| {
            let mut rhs = vec![0.0; op.len()];
            rhs[pole * d + k] = 1.0 / h3;
            solver.solve(&rhs)
        })
        .collect();
    let mut blocks = vec![0.0; op.len() * d];
    let mut residual: f64 = 0.0;
    for (k, c) in cols.into_iter().enumerate() {
        let c = c?;
        residual = residual.max(c.residual);
        for node in 0..op.grid.len() {
            for i in 0..d {
                blocks[node * d * d + i * d + k] = c.x[node * d + i];
            }
        }
    }
    Ok(GreenField { grid: op.grid, d, pole, blocks, residual })
}

/// Green field with the default CG solver.
pub fn green_field(op: &DiscreteOperator, pole: usize) -> Result<GreenField> {
    green_field_with(op, pole, &op.cg())
}

fn solver_for<'a>(op: &'a DiscreteOperator, kind: SolverKind) -> Result<Box<dyn LinearSolver + 'a>> {
    Ok(match kind {
        SolverKind::Cg => Box::new(op.cg()),
        SolverKind::Banded => Box::new(BandedCholesky::factor(&op.matrix)?),
    })
}

/// max over pole pairs of |Γ(x,y) − Γ(y,x)ᵀ|, relative to the largest block norm seen.
pub fn green_symmetry(op: &DiscreteOperator, poles: &[usize], kind: SolverKind) -> Result<f64> {
    let solver = solver_for(op, kind)?;
    let fields: Vec<GreenField> = poles.iter().map(|&p| green_field_with(op, p, solver.as_ref())).collect::<Result<_>>()?;
    let d = op.d;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for a in &fields {
        for b in &fields {
            // a.block(b.pole) = Γ(y_b, y_a); compare with Γ(y_a, y_b)ᵀ.
            let (ab, ba) = (a.block(b.pole), b.block(a.pole));
            scale = scale.max(block_norm(ab, d));
            for i in 0..d {
                for k in 0..d {
                    worst = worst.max((ab[i * d + k] - ba[k * d + i]).abs());
                }
            }
        }
    }
    Ok(if scale > 0.0 { worst / scale } else { 0.0 })
}

/// Residual of G₀ − G_V = G₀ M_Λ G_Λ + G_Λ (M_V − M_Λ) G_V at (x, y₀), Λ = |V|·I.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolventCheck {
    pub pole: usize,
    pub nodes: Vec<usize>,
    pub errors: Vec<f64>,
    pub max_error: f64,
}

fn transpose_times(g: &GreenField, z: usize, m: &[f64], d: usize) -> Vec<f64> {
    // Γ(z, x)ᵀ · M: (d×d)·(d×d).
    let b = g.block(z);
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = (0..d).map(|k| b[k * d + i] * m[k * d + j]).sum();
        }
    }
    out
}

fn mat_block(a: &[f64], b: &[f64], d: usize, acc: &mut [f64], scale: f64) {
    for i in 0..d {
        for j in 0..d {
            acc[i * d + j] += scale * (0..d).map(|k| a[i * d + k] * b[k * d + j]).sum::<f64>();
        }
    }
}

pub fn resolvent_identity_with(
    w: &MatrixWeight,
    coefficient: &Coefficient,
    grid: &Grid,
    pole: usize,
    nodes: &[usize],
    kind: SolverKind,
) -> Result<ResolventCheck> {
    let d = w.d();
    let zero = MatrixWeight::constant(w.n(), SymMat::zeros(d))?;
    let lam = MatrixWeight::norm_diag(w);
    let bc = Boundary::Dirichlet;
    let (op0, opv, opl) = (
        assemble(&zero, coefficient, grid, &bc)?,
        assemble(w, coefficient, grid, &bc)?,
        assemble(&lam, coefficient, grid, &bc)?,
    );
    let (s0, sv, sl) = (solver_for(&op0, kind)?, solver_for(&opv, kind)?, solver_for(&opl, kind)?);
    let gv_y = green_field_with(&opv, pole, sv.as_ref())?;
    let gl_y = green_field_with(&opl, pole, sl.as_ref())?;
    let g0_y = green_field_with(&op0, pole, s0.as_ref())?;
    let h3 = grid.h().powi(3);
    let dd = d * d;
    let mut errors = Vec::with_capacity(nodes.len());
    for &x in nodes {
        // Rows at x come from the columns at pole x by symmetry.
        let g0_x = green_field_with(&op0, x, s0.as_ref())?;
        let gl_x = green_field_with(&opl, x, sl.as_ref())?;
        let mut lhs = vec![0.0; dd];
        for i in 0..d {
            for k in 0..d {
                lhs[i * d + k] = g0_y.entry(x, i, k) - gv_y.entry(x, i, k);
            }
        }
        let mut rhs = vec![0.0; dd];
        for z in 0..grid.len() {
            let ml = opl.potential_block(z);
            let mv = opv.potential_block(z);
            let diff: Vec<f64> = mv.iter().zip(ml).map(|(a, b)| a - b).collect();
            mat_block(&transpose_times(&g0_x, z, ml, d), gl_y.block(z), d, &mut rhs, h3);
            mat_block(&transpose_times(&gl_x, z, &diff, d), gv_y.block(z), d, &mut rhs, h3);
        }
        let num = lhs.iter().zip(&rhs).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let den = lhs.iter().map(|a| a * a).sum::<f64>().sqrt();
        errors.push(if num == 0.0 { 0.0 } else if den == 0.0 { f64::INFINITY } else { num / den });
    }
    let max_error = errors.iter().copied().fold(0.0, f64::max);
    Ok(ResolventCheck { pole, nodes: nodes.to_vec(), errors, max_error })
}

/// Resolvent identity with the banded direct solver (the dense-inverse oracle).
pub fn resolvent_identity_check(w: &MatrixWeight, grid: &Grid, pole: usize, nodes: &[usize]) -> Result<ResolventCheck> {
    resolvent_identity_with(w, &Coefficient::default(), grid, pole, nodes, SolverKind::Banded)
}

/// u(x₀) = h³ Σ_y |Γ(x₀, y)| with the comparands m̲(x₀)⁻², m̄(x₀)⁻².
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Landscape {
    pub node: usize,
    pub point: Vec<f64>,
    pub u: f64,
    pub lower_inv2: f64,
    pub upper_inv2: f64,
}

pub fn landscape(op: &DiscreteOperator, w: &MatrixWeight, node: usize, aux: &AuxSettings) -> Result<Landscape> {
    // Γ(x₀, y) = Γ(y, x₀)ᵀ and transposition preserves the spectral norm.
    let g = green_field(op, node)?;
    let h3 = op.grid.h().powi(3);
    let u = h3 * (0..op.grid.len()).map(|y| g.norm(y)).sum::<f64>();
    let point = op.grid.point(node);
    let lo = aux_value(w, &point, &AuxKind::Lower, aux)?;
    let hi = aux_value(w, &point, &AuxKind::Upper, aux)?;
    Ok(Landscape { node, point, u, lower_inv2: lo.powi(-2), upper_inv2: hi.powi(-2) })
}

/// Worst relative deviation of the W = 0 Green function from 1/(4π|x−y|₂) over
/// nodes with 5h ≤ |x−y|₂ ≤ L/4, pole at the node nearest the origin.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FreeGreenCheck {
    pub samples: usize,
    pub band: (f64, f64),
    pub max_rel_error: f64,
    pub mean_rel_error: f64,
}

pub fn free_green_check(grid: &Grid, boundary: &Boundary) -> Result<FreeGreenCheck> {
    let zero = MatrixWeight::constant(grid.dim, SymMat::zeros(1))?;
    let pole = grid.nearest(&vec![0.0; grid.dim]);
    let op = assemble(&zero, &Coefficient::default(), grid, boundary)?;
    let g = green_field(&op, pole)?;
    let y = grid.point(pole);
    let band = (5.0 * grid.h(), grid.l / 4.0);
    let errors: Vec<f64> = (0..grid.len())
        .filter_map(|x| {
            let r = crate::weights::norm2(&grid.point(x).iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
            (r >= band.0 && r <= band.1).then(|| (g.entry(x, 0, 0) * 4.0 * std::f64::consts::PI * r - 1.0).abs())
        })
        .collect();
    if errors.is_empty() {
        return Err(Error::InsufficientSamples { op: "free_green_check", found: 0, needed: 1 });
    }
    Ok(FreeGreenCheck {
        samples: errors.len(),
        band,
        max_rel_error: errors.iter().copied().fold(0.0, f64::max),
        mean_rel_error: errors.iter().sum::<f64>() / errors.len() as f64,
    })
}

/// Sandwich constants c₁ = min u·m̄², c₂ = max u·m̲² over the probes on two grids,
/// so that c₁m̄⁻² ≤ u ≤ c₂m̲⁻² at every probe; stable if each agrees within 25%.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LandscapeStability {
    pub coarse: Vec<Landscape>,
    pub fine: Vec<Landscape>,
    /// (coarse, fine).
    pub c1: (f64, f64),
    pub c2: (f64, f64),
    pub pass: bool,
}

pub fn sandwich_constants(rows: &[Landscape]) -> (f64, f64) {
    let c1 = rows.iter().map(|r| r.u / r.upper_inv2).fold(f64::INFINITY, f64::min);
    let c2 = rows.iter().map(|r| r.u / r.lower_inv2).fold(0.0, f64::max);
    (c1, c2)
}

/// Probes snap to the nearest node of each grid.
pub fn landscape_stability(
    w: &MatrixWeight,
    coefficient: &Coefficient,
    grids: (&Grid, &Grid),
    probes: &[Vec<f64>],
    aux: &AuxSettings,
) -> Result<LandscapeStability> {
    let run = |g: &Grid| -> Result<Vec<Landscape>> {
        let op = assemble(w, coefficient, g, &Boundary::Dirichlet)?;
        probes.iter().map(|p| landscape(&op, w, g.nearest(p), aux)).collect()
    };
    let coarse = run(grids.0)?;
    let fine = run(grids.1)?;
    let (a1, a2) = sandwich_constants(&coarse);
    let (b1, b2) = sandwich_constants(&fine);
    let close = |a: f64, b: f64| a.is_finite() && b.is_finite() && a > 0.0 && (a - b).abs() <= 0.25 * a.max(b);
    let pass = close(a1, b1) && close(a2, b2);
    Ok(LandscapeStability { coarse, fine, c1: (a1, b1), c2: (a2, b2), pass })
}

/// Γ on [−L, L]³ against Γ on [−1.5L, 1.5L]³ at equal spacing, near the pole.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncationCheck {
    pub nodes: usize,
    pub max_rel_diff: f64,
}

/// Needs (N+1) divisible by 4 so both grids share nodes.
pub fn truncation_check(w: &MatrixWeight, coefficient: &Coefficient, grid: &Grid, pole_point: &[f64]) -> Result<TruncationCheck> {
    let n = grid.npa;
    if (n + 1) % 4 != 0 {
        return Err(Error::Config(format!("truncation check needs N+1 divisible by 4, got N = {n}")));
    }
    let big = Grid::cube3(1.5 * grid.l, 3 * (n + 1) / 2 - 1)?;
    let shift = (n + 1) / 4;
    let op_s = assemble(w, coefficient, grid, &Boundary::Dirichlet)?;
    let op_b = assemble(w, coefficient, &big, &Boundary::Dirichlet)?;
    let pole = grid.nearest(pole_point);
    let to_big = |k: usize| big.index(&grid.multi(k).iter().map(|i| i + shift).collect::<Vec<_>>());
    let gs = green_field(&op_s, pole)?;
    let gb = green_field(&op_b, to_big(pole))?;
    let y = grid.point(pole);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for x in 0..grid.len() {
        let p = grid.point(x);
        let sep = p.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if sep > grid.l / 3.0 {
            continue;
        }
        let (a, b) = (gs.block(x), gb.block(to_big(x)));
        let diff: Vec<f64> = a.iter().zip(b).map(|(u, v)| u - v).collect();
        worst = worst.max(block_norm(&diff, op_s.d) / block_norm(b, op_s.d));
        count += 1;
    }
    Ok(TruncationCheck { nodes: count, max_rel_diff: worst })
}

/// One (R, q) line of the local boundedness probe.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundednessRow {
    pub r: f64,
    pub q: f64,
    pub sup: f64,
    pub bracket: f64,
    pub ratio: f64,
}

fn ball_norm(values: &[f64], d: usize, grid: &Grid, center: &[f64], r: f64, q: f64) -> f64 {
    let h3 = grid.h().powi(3);
    let mut acc = 0.0;
    for node in 0..grid.len() {
        let p = grid.point(node);
        if crate::weights::norm2(&super::sub(&p, center)) <= r {
            let v = crate::weights::norm2(&values[node * d..(node + 1) * d]);
            acc += if q.is_infinite() { 0.0 } else { h3 * v.powf(q) };
            if q.is_infinite() {
                acc = acc.max(v);
            }
        }
    }
    if q.is_infinite() {
        acc
    } else {
        acc.powf(1.0 / q)
    }
}

/// For u solving op·u = f: ‖u‖_{L∞(B_R)} against R^{−3/q}‖u‖_{L^q(B_{2R})} + R^{2−3/2}‖f‖_{L²(B_{2R})}
/// for q ∈ {1, 2}. A vanishing bracket with vanishing u reports ratio 0.
pub fn local_boundedness_probe(op: &DiscreteOperator, f: &[f64], center: &[f64], radii: &[f64]) -> Result<Vec<BoundednessRow>> {
    let u = op.cg().solve(f)?.x;
    let (g, d) = (&op.grid, op.d);
    let mut rows = Vec::new();
    for &r in radii {
        let sup = ball_norm(&u, d, g, center, r, f64::INFINITY);
        let fl = ball_norm(f, d, g, center, 2.0 * r, 2.0);
        for q in [1.0, 2.0] {
            let bracket = r.powf(-3.0 / q) * ball_norm(&u, d, g, center, 2.0 * r, q) + r.powf(0.5) * fl;
            let ratio = if sup == 0.0 { 0.0 } else { sup / bracket };
            rows.push(BoundednessRow { r, q, sup, bracket, ratio });
        }
    }
    Ok(rows)
}

/// Max ratio over R per q on two resolutions; stable if they agree within 20%.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundednessStability {
    pub coarse: Vec<BoundednessRow>,
    pub fine: Vec<BoundednessRow>,
    /// (q, max ratio coarse, max ratio fine).
    pub max_ratio: Vec<(f64, f64, f64)>,
    pub pass: bool,
}

pub fn local_boundedness_stability(
    w: &MatrixWeight,
    coefficient: &Coefficient,
    grids: (&Grid, &Grid),
    f: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    center: &[f64],
    radii: &[f64],
) -> Result<BoundednessStability> {
    let run = |g: &Grid| -> Result<Vec<BoundednessRow>> {
        let op = assemble(w, coefficient, g, &Boundary::Dirichlet)?;
        let rhs: Vec<f64> = (0..g.len()).flat_map(|k| f(&g.point(k))).collect();
        local_boundedness_probe(&op, &rhs, center, radii)
    };
    let coarse = run(grids.0)?;
    let fine = run(grids.1)?;
    let max_for = |rows: &[BoundednessRow], q: f64| rows.iter().filter(|r| r.q == q).map(|r| r.ratio).fold(0.0, f64::max);
    let max_ratio: Vec<(f64, f64, f64)> = [1.0, 2.0].iter().map(|&q| (q, max_for(&coarse, q), max_for(&fine, q))).collect();
    let pass = max_ratio.iter().all(|&(_, a, b)| {
        a.is_finite() && b.is_finite() && (a == b || (a - b).abs() <= 0.2 * a.max(b))
    });
    Ok(BoundednessStability { coarse, fine, max_ratio, pass })
}

/// sup/inf of |u| over the critical ball B(x, 1/m̲(x)) for u solving op·u = 1.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarnackRow {
    pub center: Vec<f64>,
    pub radius: f64,
    pub nodes: usize,
    pub sup: f64,
    pub inf: f64,
    pub ratio: f64,
}

/// Empirical Harnack ratios; reported without a threshold.
pub fn harnack_probe(op: &DiscreteOperator, w: &MatrixWeight, centers: &[Vec<f64>], aux: &AuxSettings) -> Result<Vec<HarnackRow>> {
    let u = op.cg().solve(&vec![1.0; op.len()])?.x;
    let (g, d) = (&op.grid, op.d);
    centers
        .iter()
        .map(|c| {
            let radius = 1.0 / aux_value(w, c, &AuxKind::Lower, aux)?;
            let (mut sup, mut inf, mut nodes) = (0.0f64, f64::INFINITY, 0);
            for k in 0..g.len() {
                if crate::weights::norm2(&super::sub(&g.point(k), c)) <= radius {
                    let v = crate::weights::norm2(&u[k * d..(k + 1) * d]);
                    sup = sup.max(v);
                    inf = inf.min(v);
                    nodes += 1;
                }
            }
            let ratio = if nodes == 0 { f64::NAN } else { sup / inf };
            Ok(HarnackRow { center: c.clone(), radius, nodes, sup, inf, ratio })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero(d: usize) -> MatrixWeight {
        MatrixWeight::constant(3, SymMat::zeros(d)).unwrap()
    }

    #[test]
    fn diagonal_potential_gives_diagonal_green() {
        let g = Grid::cube3(2.0, 10).unwrap();
        let op = assemble(&MatrixWeight::diag_x2_x4(3), &Coefficient::default(), &g, &Boundary::Dirichlet).unwrap();
        let pole = g.nearest(&[0.1, 0.1, 0.1]);
        let gf = green_field(&op, pole).unwrap();
        let scale = (0..g.len()).map(|k| gf.entry(k, 0, 0).abs().max(gf.entry(k, 1, 1).abs())).fold(0.0, f64::max);
        for k in 0..g.len() {
            assert!(gf.entry(k, 0, 1).abs() <= 1e-8 * scale && gf.entry(k, 1, 0).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn scalar_green_is_dominated_by_free_green() {
        let g = Grid::cube3(2.0, 10).unwrap();
        let pole = g.nearest(&[0.1, 0.1, 0.1]);
        let f0 = green_field(&assemble(&zero(2), &Coefficient::default(), &g, &Boundary::Dirichlet).unwrap(), pole).unwrap();
        let fv = green_field(&assemble(&MatrixWeight::diag_x2_x4(3), &Coefficient::default(), &g, &Boundary::Dirichlet).unwrap(), pole).unwrap();
        for k in 0..g.len() {
            for i in 0..2 {
                let (a, b) = (fv.entry(k, i, i), f0.entry(k, i, i));
                assert!(a >= -1e-12 * b && a <= b * (1.0 + 1e-8));
            }
        }
    }

    #[test]
    fn green_is_symmetric() {
        let g = Grid::cube3(1.5, 9).unwrap();
        let op = assemble(&MatrixWeight::appendix_a(3), &Coefficient::default(), &g, &Boundary::Dirichlet).unwrap();
        let poles = [g.index(&[4, 4, 4]), g.index(&[2, 5, 6]), g.index(&[7, 1, 3])];
        assert!(green_symmetry(&op, &poles, SolverKind::Cg).unwrap() <= 10.0 * 1e-10 * 10.0);
        assert!(green_symmetry(&op, &poles, SolverKind::Banded).unwrap() <= 1e-12);
    }

    #[test]
    fn resolvent_identity_holds_on_small_grids() {
        let g = Grid::cube3(2.0, 9).unwrap();
        let pole = g.index(&[4, 4, 4]);
        let nodes = [g.index(&[1, 2, 3]), g.index(&[6, 6, 5]), g.index(&[4, 4, 6])];
        let z = resolvent_identity_check(&zero(2), &g, pole, &nodes).unwrap();
        assert_eq!(z.max_error, 0.0);
        let c = MatrixWeight::constant(3, SymMat::scaled_identity(2, 1.7)).unwrap();
        assert!(resolvent_identity_check(&c, &g, pole, &nodes).unwrap().max_error <= 1e-8);
        assert!(resolvent_identity_check(&MatrixWeight::appendix_a(3), &g, pole, &nodes).unwrap().max_error <= 1e-7);
    }

    #[test]
    fn zero_forcing_probe_reports_zero() {
        let g = Grid::cube3(1.0, 9).unwrap();
        let op = assemble(&MatrixWeight::identity(3, 1), &Coefficient::default(), &g, &Boundary::Dirichlet).unwrap();
        let rows = local_boundedness_probe(&op, &vec![0.0; op.len()], &[0.0; 3], &[0.2, 0.3]).unwrap();
        assert!(rows.iter().all(|r| r.ratio == 0.0));
    }

    #[test]
    fn landscape_of_constant_potential() {
        // For W = cI far from the boundary, u ≈ 1/c.
        let g = Grid::cube3(6.0, 24).unwrap();
        let c = 4.0;
        let w = MatrixWeight::constant(3, SymMat::scaled_identity(2, c)).unwrap();
        let op = assemble(&w, &Coefficient::default(), &g, &Boundary::Dirichlet).unwrap();
        let l = landscape(&op, &w, g.nearest(&[0.0; 3]), &AuxSettings::default()).unwrap();
        assert!((l.u * c - 1.0).abs() < 1e-3, "{}", l.u);
        assert!((l.lower_inv2 - l.upper_inv2).abs() < 1e-9);
    }
}
