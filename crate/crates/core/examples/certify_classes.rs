//! Runs the class certifiers and the implication cross-checks on two weights.

use agmon::classes::{certify, cross_checks, CertSettings, Class};
use agmon::cubature::CubeFamily;
use agmon::MatrixWeight;

fn main() -> agmon::Result<()> {
    let family = CubeFamily::Dyadic { half_width: 2.0, depth: 0 };
    let settings = CertSettings { refinements: 1, random_directions: 8, ..CertSettings::default() };
    for (name, w) in [("identity", MatrixWeight::identity(3, 2)), ("appendix_a", MatrixWeight::appendix_a(3))] {
        let bp = certify(&Class::Bp { p: 2.0 }, &w, &family, &settings)?;
        println!("{name}: B_2 estimate {:.4} pass {}", bp.constant_estimate, bp.pass);
        let cross = cross_checks(&w, 2.0, &family, &settings);
        for o in &cross.outcomes {
            println!("  {:12} pass {:5} estimate {:?}", o.label, o.pass, o.estimate);
        }
        println!("  disagreements: {}", cross.disagreements);
    }
    Ok(())
}
