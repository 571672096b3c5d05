use serde::{Deserialize, Serialize};

use crate::background::VortexConfig;
use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearityModel;
use crate::torus::{GridSpec, DEFAULT_HELMHOLTZ_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Bound on the `L^2` residual of the second equation of the system
    /// (and of the limit equation for limit solves).
    pub newton_tol: f64,
    /// Relative tolerance of Helmholtz solves.
    pub krylov_tol: f64,
    pub max_newton_iters: usize,
    /// Slack for the pointwise bounds; derived from sigma when unset.
    pub bound_tol: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            newton_tol: 1e-9,
            krylov_tol: DEFAULT_HELMHOLTZ_TOL,
            max_newton_iters: 60,
            bound_tol: None,
        }
    }
}

/// Everything that determines one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub model: NonlinearityModel,
    pub vortices: VortexConfig,
    pub q: f64,
    pub grid: GridSpec,
    pub tolerances: Tolerances,
}

impl ProblemSpec {
    pub fn new(
        model: NonlinearityModel,
        vortices: VortexConfig,
        q: f64,
        grid: GridSpec,
        tolerances: Tolerances,
    ) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::InvalidCoupling(q));
        }
        vortices.validate_for(&grid)?;
        Ok(Self {
            model,
            vortices,
            q,
            grid,
            tolerances,
        })
    }

    pub fn with_q(&self, q: f64) -> Result<Self> {
        Self::new(
            self.model.clone(),
            self.vortices.clone(),
            q,
            self.grid,
            self.tolerances,
        )
    }

    pub fn n(&self) -> u32 {
        self.vortices.total_number()
    }

    /// Slack for the pointwise bounds: `1e-6 + 10 (sigma / L)^2` unless set.
    pub fn bound_tol(&self) -> f64 {
        self.tolerances.bound_tol.unwrap_or_else(|| {
            let rel = self.vortices.sigma() / self.grid.length();
            1e-6 + 10.0 * rel * rel
        })
    }
}
