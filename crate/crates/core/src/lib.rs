//! Numerical laboratory for matrix weights and weakly coupled Schrödinger systems.
//!
//! * [`weights`]: evaluable PSD matrix fields with analytic descriptors.
//! * [`cubature`]: cube averages, the averaged matrix Ψ, reducing matrices.
//! * [`classes`]: finite-family certifiers for B_p, ND, NC, A∞, A_{2,∞}, RBM.
//! * [`auxmetric`]: auxiliary functions and lattice Agmon distances.
//! * [`pde`]: discrete operators, Green matrices, the resolvent identity, landscapes.
//! * [`ineqlab`]: Poincaré and Fefferman–Phong harnesses, decay-envelope fits.

pub mod auxmetric;
pub mod classes;
pub mod cli;
pub mod cubature;
pub mod error;
pub mod grid;
pub mod ineqlab;
pub mod linalg;
pub mod pde;
pub mod poly;
pub mod report;
pub mod suite;
pub mod weights;

pub use error::{Error, Result};
pub use linalg::SymMat;
pub use weights::{MatrixWeight, ScalarWeight};
