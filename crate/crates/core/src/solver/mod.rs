//! Coupled and limit solves.
//!
//! The coupled system is solved for `u` alone: `v` is eliminated by
//! [`Problem::recover_v`] and the remaining fourth-order equation is the
//! gradient of [`Problem::energy`], minimized by a damped Newton–Krylov
//! iteration. The limit equation `-Δũ = f'(e^ũ) e^ũ (s - f(e^ũ)) - 4πρ` is
//! handled the same way with its own (second-order) energy.

mod newton;
mod problem;
mod sweep;
mod system;

use serde::{Deserialize, Serialize};

pub use newton::NewtonStats;
pub use problem::{ProblemSpec, Tolerances};
pub use sweep::{q_sweep, q_sweep_with_limit};
pub use system::{Coefficients, PointState, Problem, Residuals};

use crate::background::{BackgroundData, VortexConfig};
use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearityModel;
use crate::torus::ScalarField;
use newton::{newton_solve, Variational};

/// Fraction of `max e^{u0}` used to round off the vortex cores of the
/// initial guess `e^{ũ} = t_s e^{u0} / (e^{u0} + K)`.
const CORE_FRACTION: f64 = 0.05;

/// Samples used for the feasibility bound.
const FEASIBILITY_SAMPLES: usize = 4096;

/// A converged state of the coupled system at one coupling.
#[derive(Debug, Clone)]
pub struct SolutionBundle {
    pub problem: Problem,
    /// Regular part; the full field is `u* = u0 + u`.
    pub u: ScalarField,
    pub v: ScalarField,
    /// `w = q (v - f(e^{u*}))`
    pub w: ScalarField,
    pub residuals: Residuals,
    pub energy: f64,
    pub stats: NewtonStats,
}

impl SolutionBundle {
    /// Builds a bundle from given fields (no solve), e.g. for re-checking
    /// stored snapshots.
    pub fn assemble(problem: Problem, u: ScalarField, v: ScalarField, w: ScalarField) -> Result<Self> {
        let bg = problem.background().u0.clone();
        for f in [&u, &v, &w] {
            f.same_grid(&bg)?;
        }
        let residuals = problem.residuals(&u, &v, &w);
        let energy = problem.energy(&u);
        Ok(Self {
            problem,
            u,
            v,
            w,
            residuals,
            energy,
            stats: NewtonStats::default(),
        })
    }

    pub fn q(&self) -> f64 {
        self.problem.q()
    }

    pub fn spec(&self) -> &ProblemSpec {
        self.problem.spec()
    }

    pub fn background(&self) -> &BackgroundData {
        self.problem.background()
    }

    /// `u* = u0 + u`
    pub fn u_total(&self) -> ScalarField {
        &self.background().u0 + &self.u
    }

    /// `f(e^{u*})`
    pub fn f_of_u(&self) -> ScalarField {
        self.problem.state(&self.u).f
    }
}

/// A converged solution of the limit equation.
#[derive(Debug, Clone)]
pub struct LimitSolution {
    /// Regular part; `ũ = u0 + u_inf`.
    pub u_inf: ScalarField,
    /// `L^2` norm of the limit equation residual.
    pub residual: f64,
    pub stats: NewtonStats,
    pub vortices: VortexConfig,
}

impl LimitSolution {
    /// Pointwise limit quantities `(e^ũ, f(e^ũ), f'(e^ũ) e^ũ (s - f(e^ũ)))`.
    pub fn limit_fields(&self, problem: &Problem) -> (ScalarField, ScalarField, ScalarField) {
        let st = problem.state(&self.u_inf);
        let s = problem.model().s();
        let w = st.phi.zip_map(&st.f, |c, f| c * (s - f));
        (st.t, st.f, w)
    }
}

impl Variational for Problem {
    fn energy(&self, u: &ScalarField) -> f64 {
        Problem::energy(self, u)
    }

    fn gradient(&self, u: &ScalarField) -> ScalarField {
        self.energy_gradient(u)
    }

    fn linearize<'a>(&'a self, u: &ScalarField) -> Box<dyn Fn(&ScalarField) -> ScalarField + 'a> {
        Box::new(self.jacobian(u))
    }

    fn preconditioner(&self, u: &ScalarField) -> (f64, f64, f64) {
        let q = self.q();
        (1.0 / (q * q), 1.0, self.preconditioner_shift(u))
    }

    fn residual_norm(&self, _u: &ScalarField, gradient: &ScalarField) -> f64 {
        // the gradient is the second equation's residual divided by q
        self.q() * gradient.l2_norm()
    }

    fn admissible(&self, u: &ScalarField) -> Result<()> {
        let c_max = self.coefficient_sup(u);
        if self.q() <= c_max {
            return Err(Error::QTooSmall { q: self.q(), c_max });
        }
        Ok(())
    }
}

/// The limit equation as a variational problem:
/// `J(u) = 1/2 ∫|∇u|^2 + 1/2 ∫(f(e^{u*}) - s)^2 + 4πn/|T| ∫u`.
struct LimitProblem<'a> {
    problem: &'a Problem,
}

impl LimitProblem<'_> {
    fn residual(&self, u: &ScalarField) -> ScalarField {
        let st = self.problem.state(u);
        let s = self.problem.model().s();
        let cn = self.problem.flux_density();
        let lap = u.laplacian();
        let vals = (0..u.grid().len())
            .map(|k| -lap.values()[k] + st.phi.values()[k] * (st.f.values()[k] - s) + cn)
            .collect();
        ScalarField::from_vec(*u.grid(), vals)
    }
}

impl Variational for LimitProblem<'_> {
    fn energy(&self, u: &ScalarField) -> f64 {
        let st = self.problem.state(u);
        let s = self.problem.model().s();
        let dirichlet = 0.5 * u.grad_squared().integrate();
        let potential = 0.5 * st.f.map(|f| (f - s) * (f - s)).integrate();
        dirichlet + potential + self.problem.flux_density() * u.integrate()
    }

    fn gradient(&self, u: &ScalarField) -> ScalarField {
        self.residual(u)
    }

    fn linearize<'a>(&'a self, u: &ScalarField) -> Box<dyn Fn(&ScalarField) -> ScalarField + 'a> {
        let st = self.problem.state(u);
        let s = self.problem.model().s();
        let diag: Vec<f64> = (0..u.grid().len())
            .map(|k| {
                let phi = st.phi.values()[k];
                st.dphi.values()[k] * (st.f.values()[k] - s) + phi * phi
            })
            .collect();
        Box::new(move |d: &ScalarField| {
            let lap = d.laplacian();
            let vals = (0..d.grid().len())
                .map(|k| -lap.values()[k] + diag[k] * d.values()[k])
                .collect();
            ScalarField::from_vec(*d.grid(), vals)
        })
    }

    fn preconditioner(&self, u: &ScalarField) -> (f64, f64, f64) {
        (0.0, 1.0, self.problem.preconditioner_shift(u))
    }

    fn residual_norm(&self, _u: &ScalarField, gradient: &ScalarField) -> f64 {
        gradient.l2_norm()
    }
}

/// `t_s = f^{-1}(s)`, the value of `e^{u*}` on the trivial solution.
pub fn trivial_level(model: &NonlinearityModel) -> Result<f64> {
    model.inverse(model.s())
}

/// Initial guess `u = ln t_s - ln(e^{u0} + K)`, i.e. `e^{u*} = t_s e^{u0} / (e^{u0} + K)`,
/// with `K = 0` when there are no vortices.
pub fn default_initial_guess(problem: &Problem) -> Result<ScalarField> {
    let ts = trivial_level(problem.model())?;
    let bg = problem.background();
    let k = if bg.n() == 0 {
        0.0
    } else {
        CORE_FRACTION * bg.exp_u0.max()
    };
    Ok(bg.exp_u0.map(|e| ts.ln() - (e + k).ln()))
}

/// Upper bound on `∫ f'(e^{u*}) e^{u*} (s - v)` over states obeying the
/// pointwise bounds `f(0) <= f(e^{u*}), v <= s`; for the limit equation `v`
/// is replaced by `f(e^{u*})`.
pub fn attainable_flux(problem: &Problem, limit: bool) -> Result<f64> {
    let model = problem.model();
    let ts = trivial_level(model)?;
    let s = model.s();
    let f0 = model.f0();
    let sup = (0..=FEASIBILITY_SAMPLES)
        .map(|k| {
            let t = ts * k as f64 / FEASIBILITY_SAMPLES as f64;
            let e = model.eval_unchecked(t);
            let gap = if limit { s - e.f } else { s - f0 };
            e.df * t * gap
        })
        .fold(0.0, f64::max);
    Ok(problem.background().grid().area() * sup)
}

fn check_feasible(problem: &Problem, limit: bool) -> Result<()> {
    let n = problem.background().n();
    if n == 0 || problem.forcing().is_some() {
        return Ok(());
    }
    let required = 4.0 * std::f64::consts::PI * n as f64;
    let attainable = attainable_flux(problem, limit)?;
    if required >= attainable {
        return Err(Error::Infeasible {
            required,
            attainable,
        });
    }
    Ok(())
}

fn bound_excess(values: &ScalarField, lo: f64, hi: f64) -> f64 {
    (lo - values.min()).max(values.max() - hi).max(0.0)
}

/// Solves the limit equation on the problem's grid and vortices.
pub fn solve_limit(problem: &Problem) -> Result<LimitSolution> {
    check_feasible(problem, true)?;
    let tol = problem.spec().tolerances;
    let init = default_initial_guess(problem)?;
    let lp = LimitProblem { problem };
    let (u, stats) = newton_solve(&lp, init, tol.newton_tol, tol.krylov_tol, tol.max_newton_iters)?;
    let residual = lp.residual(&u).l2_norm();
    let f = problem.state(&u).f;
    let bound_tol = problem.spec().bound_tol();
    let excess = bound_excess(&f, problem.model().f0(), problem.model().s());
    if excess > bound_tol {
        return Err(Error::BoundsViolation {
            excess,
            tolerance: bound_tol,
        });
    }
    Ok(LimitSolution {
        u_inf: u,
        residual,
        stats,
        vortices: problem.spec().vortices.clone(),
    })
}

/// Solves the coupled system. Without `init` the limit solution is used as
/// the starting point.
pub fn solve_coupled(problem: &Problem, init: Option<ScalarField>) -> Result<SolutionBundle> {
    check_feasible(problem, false)?;
    let init = match init {
        Some(u) => {
            u.same_grid(&problem.background().u0)?;
            u
        }
        None if problem.forcing().is_some() => default_initial_guess(problem)?,
        None => solve_limit(problem)?.u_inf,
    };
    let tol = problem.spec().tolerances;
    let (u, stats) = newton_solve(problem, init, tol.newton_tol, tol.krylov_tol, tol.max_newton_iters)?;
    let v = problem.recover_v(&u);
    let f = problem.state(&u).f;
    let q = problem.q();
    let w = v.zip_map(&f, |vi, fi| q * (vi - fi));
    if problem.forcing().is_none() {
        let (lo, hi) = (problem.model().f0(), problem.model().s());
        let excess = bound_excess(&f, lo, hi).max(bound_excess(&v, lo, hi));
        let bound_tol = problem.spec().bound_tol();
        if excess > bound_tol {
            return Err(Error::BoundsViolation {
                excess,
                tolerance: bound_tol,
            });
        }
    }
    let mut bundle = SolutionBundle::assemble(problem.clone(), u, v, w)?;
    bundle.stats = stats;
    Ok(bundle)
}

/// Convenience wrapper building the background from a spec.
pub fn solve_spec(spec: ProblemSpec, init: Option<ScalarField>) -> Result<SolutionBundle> {
    solve_coupled(&Problem::new(spec)?, init)
}

/// Serializable summary of a Newton run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub q: f64,
    pub energy: f64,
    pub residuals: Residuals,
    pub stats: NewtonStats,
}

impl From<&SolutionBundle> for SolveSummary {
    fn from(b: &SolutionBundle) -> Self {
        Self {
            q: b.q(),
            energy: b.energy,
            residuals: b.residuals,
            stats: b.stats.clone(),
        }
    }
}
