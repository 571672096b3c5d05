//! Vortex background: mollified point sources, the mean-zero Green's
//! function `u0` with `-Δu0 = 4π(n/|T| - Σ m_j δ_j)`, and the smooth weight
//! `e^{u0} |∇u0|^2`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{GridSpec, ScalarField};

/// Default mollification width in grid spacings.
pub const DEFAULT_SIGMA_CELLS: f64 = 4.0;

/// A prescribed zero of `e^{u*}` with positive multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vortex {
    pub x: f64,
    pub y: f64,
    pub multiplicity: u32,
}

impl Vortex {
    pub fn new(x: f64, y: f64, multiplicity: u32) -> Self {
        Self { x, y, multiplicity }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

/// Vortex points (physical coordinates on the torus) and the width `sigma`
/// of the Gaussians that replace the Dirac masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VortexConfig {
    vortices: Vec<Vortex>,
    sigma: f64,
}

impl VortexConfig {
    pub fn new(vortices: Vec<Vortex>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidVortices(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        for (k, v) in vortices.iter().enumerate() {
            if v.multiplicity == 0 {
                return Err(Error::InvalidVortices(format!(
                    "vortex {k} has zero multiplicity"
                )));
            }
            if !(v.x.is_finite() && v.y.is_finite()) {
                return Err(Error::InvalidVortices(format!("vortex {k} is not finite")));
            }
            for (l, w) in vortices.iter().enumerate().take(k) {
                if v.x == w.x && v.y == w.y {
                    return Err(Error::InvalidVortices(format!(
                        "vortices {l} and {k} coincide; use a multiplicity instead"
                    )));
                }
            }
        }
        Ok(Self { vortices, sigma })
    }

    /// No vortices.
    pub fn empty(sigma: f64) -> Result<Self> {
        Self::new(Vec::new(), sigma)
    }

    /// Vortices given in fractional torus coordinates `[0, 1)^2`, sigma in
    /// grid spacings.
    pub fn on_grid(grid: &GridSpec, fractional: &[(f64, f64, u32)], sigma_cells: f64) -> Result<Self> {
        let l = grid.length();
        let vortices = fractional
            .iter()
            .map(|&(x, y, m)| {
                if !((0.0..1.0).contains(&x) && (0.0..1.0).contains(&y)) {
                    return Err(Error::InvalidVortices(format!(
                        "fractional position ({x}, {y}) outside [0, 1)^2"
                    )));
                }
                Ok(Vortex::new(x * l, y * l, m))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(vortices, sigma_cells * grid.spacing())
    }

    pub fn vortices(&self) -> &[Vortex] {
        &self.vortices
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Total vortex number `n = Σ m_j`.
    pub fn total_number(&self) -> u32 {
        self.vortices.iter().map(|v| v.multiplicity).sum()
    }

    pub fn validate_for(&self, grid: &GridSpec) -> Result<()> {
        let min = 2.0 * grid.spacing();
        if self.sigma < min * (1.0 - 1e-12) {
            return Err(Error::SigmaTooSmall {
                sigma: self.sigma,
                min,
            });
        }
        let l = grid.length();
        for (k, v) in self.vortices.iter().enumerate() {
            if !((0.0..l).contains(&v.x) && (0.0..l).contains(&v.y)) {
                return Err(Error::InvalidVortices(format!(
                    "vortex {k} at ({}, {}) lies outside [0, {l})^2",
                    v.x, v.y
                )));
            }
        }
        Ok(())
    }
}

/// Periodic Gaussian of width `sigma` centred at `p`, normalized so that its
/// grid integral is exactly one.
pub fn mollified_delta(p: (f64, f64), sigma: f64, grid: &GridSpec) -> Result<ScalarField> {
    let min = 2.0 * grid.spacing();
    if sigma < min * (1.0 - 1e-12) {
        return Err(Error::SigmaTooSmall { sigma, min });
    }
    let n = grid.n();
    let h = grid.spacing();
    let l = grid.length();
    let images = (8.0 * sigma / l).ceil() as i64 + 1;
    let profile = |centre: f64| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let d = i as f64 * h - centre;
                (-images..=images)
                    .map(|m| {
                        let z = (d + m as f64 * l) / sigma;
                        (-0.5 * z * z).exp()
                    })
                    .sum()
            })
            .collect()
    };
    let gx = profile(p.0);
    let gy = profile(p.1);
    let mass = grid.cell_area() * gx.iter().sum::<f64>() * gy.iter().sum::<f64>();
    let values = (0..grid.len())
        .map(|k| gx[k / n] * gy[k % n] / mass)
        .collect();
    ScalarField::new(*grid, values)
}

/// The weight `e^{u0} |∇u0|^2` computed as `Δe^{u0} - e^{u0} Δu0`.
///
/// For a point-source `u0` the second term equals `4πn e^{u0}/|T|` because
/// `e^{u0}` vanishes on the vortices; with mollified sources it also carries
/// the source density.
pub fn background_weight(u0: &ScalarField) -> ScalarField {
    let e = u0.map(f64::exp);
    let lap_e = e.laplacian();
    let lap_u0 = u0.laplacian();
    lap_e.zip_map(&(&e * &lap_u0), |a, b| a - b)
}

/// Everything about the vortex background that the solver reuses.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundData {
    pub config: VortexConfig,
    pub u0: ScalarField,
    pub exp_u0: ScalarField,
    /// `e^{u0} |∇u0|^2`.
    pub weight: ScalarField,
    /// Mollified source density `ρ = Σ m_j δ_j`, integrating to `n`.
    pub source: ScalarField,
    pub grad_u0: (ScalarField, ScalarField),
}

impl BackgroundData {
    pub fn grid(&self) -> &GridSpec {
        self.u0.grid()
    }

    pub fn n(&self) -> u32 {
        self.config.total_number()
    }

    /// The constant `4πn / |T|` appearing in the regular-part equations.
    pub fn flux_density(&self) -> f64 {
        4.0 * PI * self.n() as f64 / self.grid().area()
    }
}

/// Solves `-Δu0 = 4π(n/|T| - ρ)` spectrally with `∫u0 = 0`.
pub fn compute_u0(config: &VortexConfig, grid: &GridSpec) -> Result<BackgroundData> {
    config.validate_for(grid)?;
    let mut source = ScalarField::zeros(*grid);
    for v in config.vortices() {
        let bump = mollified_delta(v.position(), config.sigma(), grid)?;
        source = source.axpy(v.multiplicity as f64, &bump);
    }
    let n = config.total_number() as f64;
    let density = n / grid.area();
    // zero mean up to rounding: ∫ρ = n exactly on the grid
    let rhs = source.map(|r| 4.0 * PI * (density - r));
    let u0 = rhs.inverse_laplacian();
    let exp_u0 = u0.map(f64::exp);
    let weight = background_weight(&u0);
    let grad_u0 = u0.gradient();
    Ok(BackgroundData {
        config: config.clone(),
        u0,
        exp_u0,
        weight,
        source,
        grad_u0,
    })
}
