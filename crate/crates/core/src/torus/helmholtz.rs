use super::field::ScalarField;
use crate::error::{Error, Result};
use crate::krylov;

pub const DEFAULT_HELMHOLTZ_TOL: f64 = 1e-10;

/// Solves `-Δu + q^2 (1 + c/q) u = q^2 rhs` on the torus.
///
/// The operator is symmetric positive definite whenever `q > sup|c|`; it is
/// solved by conjugate gradients preconditioned with the exact spectral
/// inverse of `-Δ + q^2`. The returned `u` satisfies
/// `|residual|_2 <= tol * q^2 * |rhs|_2`.
pub fn helmholtz_solve(
    c: &ScalarField,
    rhs: &ScalarField,
    q: f64,
    tol: f64,
) -> Result<ScalarField> {
    c.same_grid(rhs)?;
    let c_max = c.sup_norm();
    if !(q > c_max) || !q.is_finite() {
        return Err(Error::PreconditionViolated { q, c_max });
    }
    let grid = *rhs.grid();
    let q2 = q * q;
    // zeroth-order coefficient q^2 + q c
    let zeroth: Vec<f64> = c.values().iter().map(|&ci| q2 + q * ci).collect();
    let apply = |x: &[f64]| -> Vec<f64> {
        let u = ScalarField::from_vec(grid, x.to_vec());
        let lap = u.laplacian();
        lap.values()
            .iter()
            .zip(x)
            .zip(&zeroth)
            .map(|((l, xi), a)| -l + a * xi)
            .collect()
    };
    let precondition = |r: &[f64]| -> Vec<f64> {
        ScalarField::from_vec(grid, r.to_vec())
            .solve_diagonal(0.0, 1.0, q2)
            .into_values()
    };
    let b: Vec<f64> = rhs.values().iter().map(|v| q2 * v).collect();
    let x0 = precondition(&b);
    let max_iter = 10 * grid.n();
    let res = krylov::pcg(apply, precondition, &b, x0, tol, max_iter);
    if !res.converged {
        return Err(Error::NoConvergence {
            iterations: res.iterations,
            residual: res.relative_residual,
        });
    }
    Ok(ScalarField::from_vec(grid, res.solution))
}
