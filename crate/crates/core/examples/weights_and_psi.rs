//! Evaluates the catalog weights and compares quadrature Ψ with the closed form
//! of the rank-one-at-infinity weight.

use agmon::cubature::{psi, QuadratureRule};
use agmon::ineqlab::appendix_a_psi;
use agmon::MatrixWeight;

fn main() -> agmon::Result<()> {
    let x = [0.4, -1.2, 0.7];
    for (name, w) in MatrixWeight::catalog(3) {
        let m = w.eval(&x)?;
        println!("{name:12} W(x) eigenvalues [{:.4e}, {:.4e}]", m.lambda_min(), m.lambda_max());
    }
    let w = MatrixWeight::appendix_a(3);
    let rule = QuadratureRule::default().quadrature_only();
    for r in [0.1, 1.0, 3.0] {
        let q = psi(&w, &x, r, &rule)?;
        let exact = appendix_a_psi(3, &x, r);
        println!("r = {r}: relative error {:.2e}", q.sub(&exact).frobenius() / exact.frobenius());
    }
    Ok(())
}
