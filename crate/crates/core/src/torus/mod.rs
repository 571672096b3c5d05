//! The flat torus `[0, L)^2`: grid, sampled fields, spectral operators and
//! the stiff Helmholtz solve.

mod field;
mod grid;
mod helmholtz;
mod spectral;

pub use field::ScalarField;
pub use grid::GridSpec;
pub use helmholtz::{helmholtz_solve, DEFAULT_HELMHOLTZ_TOL};
pub use spectral::SpectralCoeffs;
