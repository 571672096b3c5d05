//! Damped Newton–Krylov iteration for the critical points of an energy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krylov::gmres;
use crate::torus::{GridSpec, ScalarField};

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 30;
const GMRES_RESTART: usize = 40;
const GMRES_MAX_ITER: usize = 400;

/// An energy with its `L^2` gradient and the linearization of the gradient.
pub(crate) trait Variational {
    fn energy(&self, u: &ScalarField) -> f64;
    fn gradient(&self, u: &ScalarField) -> ScalarField;
    /// Hessian-vector product at `u`.
    fn linearize<'a>(&'a self, u: &ScalarField) -> Box<dyn Fn(&ScalarField) -> ScalarField + 'a>;
    /// Coefficients `(a, b, c)` of the spectral preconditioner `a Δ² - b Δ + c`.
    fn preconditioner(&self, u: &ScalarField) -> (f64, f64, f64);
    /// The quantity compared against the Newton tolerance.
    fn residual_norm(&self, u: &ScalarField, gradient: &ScalarField) -> f64;
    /// Rejects iterates outside the admissible regime.
    fn admissible(&self, _u: &ScalarField) -> Result<()> {
        Ok(())
    }
}

/// Iteration record of a Newton solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NewtonStats {
    pub iterations: usize,
    pub krylov_iterations: usize,
    /// Energy at every accepted iterate, starting with the initial guess.
    pub energy_history: Vec<f64>,
    pub residual_history: Vec<f64>,
    /// Steps taken along the preconditioned gradient because the Newton
    /// direction was not a descent direction.
    pub gradient_steps: usize,
}

fn to_field(grid: GridSpec, v: Vec<f64>) -> ScalarField {
    ScalarField::from_vec(grid, v)
}

pub(crate) fn newton_solve(
    problem: &impl Variational,
    init: ScalarField,
    tol: f64,
    krylov_floor: f64,
    max_iter: usize,
) -> Result<(ScalarField, NewtonStats)> {
    let grid = *init.grid();
    let mut u = init;
    let mut stats = NewtonStats::default();
    let mut energy = problem.energy(&u);
    stats.energy_history.push(energy);
    loop {
        problem.admissible(&u)?;
        let g = problem.gradient(&u);
        let res = problem.residual_norm(&u, &g);
        stats.residual_history.push(res);
        if !res.is_finite() {
            return Err(Error::NoConvergence {
                iterations: stats.iterations,
                residual: res,
            });
        }
        if res <= tol {
            return Ok((u, stats));
        }
        if stats.iterations >= max_iter {
            return Err(Error::NoConvergence {
                iterations: stats.iterations,
                residual: res,
            });
        }
        stats.iterations += 1;

        let (a, b, c) = problem.preconditioner(&u);
        let precondition = |r: &[f64]| {
            to_field(grid, r.to_vec())
                .solve_diagonal(a, b, c)
                .into_values()
        };
        let jac = problem.linearize(&u);
        let apply = |x: &[f64]| jac(&to_field(grid, x.to_vec())).into_values();
        let rhs: Vec<f64> = g.values().iter().map(|x| -x).collect();
        // forcing term of the inexact Newton method
        let eta = if res > 1e3 * tol {
            1e-3
        } else {
            (1e-2 * tol / res).max(krylov_floor)
        };
        let kr = gmres(apply, precondition, &rhs, eta, GMRES_RESTART, GMRES_MAX_ITER);
        stats.krylov_iterations += kr.iterations;
        let mut d = to_field(grid, kr.solution);
        let mut slope = g.dot(&d);
        if !(slope < 0.0) || !d.is_finite() {
            d = to_field(grid, precondition(&rhs));
            slope = g.dot(&d);
            stats.gradient_steps += 1;
        }

        // Armijo backtracking; the slack absorbs rounding in the energy
        let slack = 1e-13 * (energy.abs() + 1.0);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = u.axpy(alpha, &d);
            if trial.is_finite() {
                let e = problem.energy(&trial);
                if e.is_finite() && e <= energy + ARMIJO_C1 * alpha * slope + slack {
                    accepted = Some((trial, e));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, e)) => {
                u = trial;
                energy = e;
                stats.energy_history.push(energy);
            }
            None => {
                // near the rounding floor of the energy: accept the full step
                // when it reduces the residual
                let trial = u.axpy(1.0, &d);
                let g1 = problem.gradient(&trial);
                if trial.is_finite() && problem.residual_norm(&trial, &g1) < res {
                    energy = problem.energy(&trial);
                    u = trial;
                    stats.energy_history.push(energy);
                } else {
                    return Err(Error::NoConvergence {
                        iterations: stats.iterations,
                        residual: res,
                    });
                }
            }
        }
    }
}
