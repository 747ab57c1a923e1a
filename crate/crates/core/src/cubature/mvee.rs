//! Minimum-volume enclosing ellipsoid centered at the origin (Khachiyan iteration).

use crate::linalg::SymMat;

/// Shape matrix `A` of the smallest origin-centered ellipsoid {x : xᵀAx ≤ 1}
/// containing ±points, refined until the worst point exceeds `d` by at most `tol·d`.
///
/// The result is rescaled so every input point lies inside exactly.
pub fn mvee_centered(points: &[Vec<f64>], tol: f64) -> SymMat {
    let d = points[0].len();
    let m = points.len();
    let mut u = vec![1.0 / m as f64; m];
    let mut shape = SymMat::identity(d);
    for _ in 0..100_000 {
        let x = SymMat::from_fn(d, |i, j| points.iter().zip(&u).map(|(p, w)| w * p[i] * p[j]).sum());
        let Ok(xi) = x.inv() else { break };
        let (k, mk) = points
            .iter()
            .map(|p| xi.quad(p))
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |a, (i, v)| if v > a.1 { (i, v) } else { a });
        shape = xi.scale(1.0 / d as f64);
        if mk <= d as f64 * (1.0 + tol) {
            break;
        }
        let step = (mk - d as f64) / (d as f64 * (mk - 1.0));
        for w in u.iter_mut() {
            *w *= 1.0 - step;
        }
        u[k] += step;
    }
    let worst = points.iter().map(|p| shape.quad(p)).fold(0.0, f64::max);
    if worst > 1.0 {
        shape = shape.scale(1.0 / worst);
    }
    shape
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_points_give_unit_disk() {
        let pts: Vec<Vec<f64>> = (0..64)
            .map(|k| {
                let t = std::f64::consts::PI * k as f64 / 64.0;
                vec![t.cos(), t.sin()]
            })
            .collect();
        let a = mvee_centered(&pts, 1e-8);
        assert!(a.sub(&SymMat::identity(2)).frobenius() < 1e-6);
    }

    #[test]
    fn axis_ellipse_is_recovered() {
        let pts: Vec<Vec<f64>> = (0..128)
            .map(|k| {
                let t = std::f64::consts::PI * k as f64 / 128.0;
                vec![3.0 * t.cos(), 0.5 * t.sin()]
            })
            .collect();
        let a = mvee_centered(&pts, 1e-8);
        assert!((a.get(0, 0) - 1.0 / 9.0).abs() < 1e-6);
        assert!((a.get(1, 1) - 4.0).abs() < 1e-4);
        assert!(pts.iter().all(|p| a.quad(p) <= 1.0 + 1e-12));
    }
}
