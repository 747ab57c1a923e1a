//! The rank-one-at-infinity weight: growing lower Fefferman–Phong ratio and
//! decaying NC witness on critical cubes.

use agmon::auxmetric::AuxSettings;
use agmon::cubature::QuadratureRule;
use agmon::ineqlab::{fp_failure, nc_decay};
use agmon::MatrixWeight;

fn main() -> agmon::Result<()> {
    let radii = [10.0, 20.0, 40.0, 80.0];
    for (name, w) in [("appendix_a", MatrixWeight::appendix_a(3)), ("identity", MatrixWeight::identity(3, 2))] {
        let f = fp_failure(&w, &radii, &AuxSettings::default())?;
        println!("{name}: log-log slope {:.3}", f.slope);
    }
    for row in nc_decay(&[4.0, 9.0, 16.0, 25.0], &QuadratureRule::default())? {
        println!("m = {:2}: |x_m| = {:.3}, witness {:.3e}", row.m, row.center_norm, row.witness);
    }
    Ok(())
}
