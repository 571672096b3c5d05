//! Solver and verification tools for the abstract Maxwell–Chern–Simons
//! vortex system on a flat periodic torus.

pub mod background;
pub mod diagnostics;
pub mod error;
pub mod krylov;
pub mod nonlinearity;
pub mod snapshot;
pub mod solver;
pub mod torus;

pub use background::{compute_u0, BackgroundData, Vortex, VortexConfig};
pub use diagnostics::{ConvergenceTable, InvariantReport, Status};
pub use error::{Error, Result};
pub use nonlinearity::NonlinearityModel;
pub use solver::{
    q_sweep, solve_coupled, solve_limit, LimitSolution, Problem, ProblemSpec, SolutionBundle,
    Tolerances,
};
pub use torus::{helmholtz_solve, GridSpec, ScalarField, SpectralCoeffs};
