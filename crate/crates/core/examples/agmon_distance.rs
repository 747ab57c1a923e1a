//! Samples the lower and upper auxiliary functions of diag(|x|², |x|⁴) and the
//! lattice Agmon distances from the node nearest the origin.

use agmon::auxmetric::{agmon_field, aux_fields, AuxKind, AuxSettings, PathNorm};
use agmon::grid::Grid;
use agmon::MatrixWeight;

fn main() -> agmon::Result<()> {
    let w = MatrixWeight::diag_x2_x4(3);
    let g = Grid::cube3(3.0, 24)?;
    let fields = aux_fields(&w, &g, &[AuxKind::Lower, AuxKind::Upper], &AuxSettings::default())?;
    let source = g.nearest(&[0.0; 3]);
    for f in &fields {
        let d = agmon_field(f, source, PathNorm::Linf);
        let far = g.nearest(&[2.5, 0.0, 0.0]);
        println!("{:5}: m at (2.5,0,0) = {:.4}, distance from the origin = {:.4}", f.kind.label(), f.values[far], d.values[far]);
    }
    Ok(())
}
