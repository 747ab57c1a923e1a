//! Green matrix of −Δ + V for V = diag(|x|², |x|⁴) and the W = 0 free-space check.

use agmon::grid::Grid;
use agmon::pde::{assemble, free_green_check, green_field, Boundary, Coefficient};
use agmon::MatrixWeight;

fn main() -> agmon::Result<()> {
    let g = Grid::cube3(2.0, 20)?;
    let pole = g.nearest(&[0.0; 3]);
    let op = assemble(&MatrixWeight::diag_x2_x4(3), &Coefficient::default(), &g, &Boundary::Dirichlet)?;
    let gf = green_field(&op, pole)?;
    for x in [0.5, 1.0, 1.5] {
        let k = g.nearest(&[x, 0.0, 0.0]);
        println!("|Γ(({x},0,0), 0)| = {:.4e}", gf.norm(k));
    }
    let free = Grid::cube3(1.0, 40)?;
    let c = free_green_check(&free, &Boundary::Radiation { center: free.point(free.nearest(&[0.0; 3])) })?;
    println!("free Green function: max deviation {:.2}% over {} nodes", 100.0 * c.max_rel_error, c.samples);
    Ok(())
}
