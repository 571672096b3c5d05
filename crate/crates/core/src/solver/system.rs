//! The coupled system written for the regular part `u = u* - u0`:
//!
//! ```text
//!   -Δu = q (v - f(e^{u*})) - 4πn/|T|
//!   -Δv = q [ f'(e^{u*}) e^{u*} (s - v) - q (v - f(e^{u*})) ]
//! ```
//!
//! Eliminating `v` leaves a fourth-order equation for `u` which is the `L^2`
//! gradient of an energy functional. With mollified sources `ρ` the
//! gradient's bracket reads `ΔF + φ (Δu - 4πn/|T|)`, which equals
//! `ΔF + φ Δu*` up to the term `4πφρ` that vanishes for point sources; the
//! energy carries the matching correction `(4π/q) ∫ρ (F - f(0))`.

use std::f64::consts::PI;

use super::problem::ProblemSpec;
use crate::background::{compute_u0, BackgroundData};
use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearityModel;
use crate::torus::{ScalarField, SpectralCoeffs};

/// Pointwise quantities at `t = e^{u0 + u}`.
#[derive(Debug, Clone)]
pub struct PointState {
    /// `e^{u*}`
    pub t: ScalarField,
    /// `f(e^{u*})`
    pub f: ScalarField,
    /// `f'(e^{u*})`
    pub df: ScalarField,
    /// `φ = f'(e^{u*}) e^{u*}`, the derivative of `f(e^{u*})` in `u*`
    pub phi: ScalarField,
    /// `dφ/du* = (f''(e^{u*}) e^{u*} + f'(e^{u*})) e^{u*}`
    pub dphi: ScalarField,
}

impl PointState {
    pub fn new(model: &NonlinearityModel, exp_u0: &ScalarField, u: &ScalarField) -> Self {
        let t = exp_u0.zip_map(u, |e0, ui| e0 * ui.exp());
        let grid = *t.grid();
        let len = grid.len();
        let (mut f, mut df, mut phi, mut dphi) = (
            Vec::with_capacity(len),
            Vec::with_capacity(len),
            Vec::with_capacity(len),
            Vec::with_capacity(len),
        );
        for &ti in t.values() {
            let e = model.eval_unchecked(ti);
            f.push(e.f);
            df.push(e.df);
            phi.push(e.df * ti);
            dphi.push((e.d2f * ti + e.df) * ti);
        }
        let wrap = |v| ScalarField::new(grid, v).expect("finite nonlinearity");
        Self {
            t,
            f: wrap(f),
            df: wrap(df),
            phi: wrap(phi),
            dphi: wrap(dphi),
        }
    }
}

/// Coefficient fields of the triangular form of the system.
#[derive(Debug, Clone)]
pub struct Coefficients {
    /// `c = f'(e^{u*}) e^{u*}`
    pub c: ScalarField,
    /// `F_q = f(e^{u*}) + (s/q) c`
    pub f_q: ScalarField,
    /// The part of `G_q` that does not involve `v`:
    /// `(1/q) (f'' e^{u*} + f') e^{u*} |∇u*|^2 + (4π/q) c ρ`.
    pub g_q_partial: ScalarField,
    s: f64,
}

impl Coefficients {
    /// `G_q = c (s - v) + g_q_partial`.
    pub fn g_q(&self, v: &ScalarField) -> ScalarField {
        let s = self.s;
        let cv = self.c.zip_map(v, |c, vi| c * (s - vi));
        &cv + &self.g_q_partial
    }
}

/// Norms of the residuals of every formulation of the system at one state.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Residuals {
    /// `-Δu - q(v - F) + 4πn/|T|`
    pub first_equation: f64,
    /// `-Δv - q[φ(s - v) - q(v - F)]`
    pub second_equation: f64,
    /// `w - q(v - F)`
    pub w_definition: f64,
    /// `-Δu - w + 4πn/|T|`
    pub triangular_u: f64,
    /// `-Δv + q^2(1 + c/q) v - q^2 F_q`
    pub triangular_v: f64,
    /// `-Δw + q^2(1 + c/q) w - q^2 G_q`
    pub triangular_w: f64,
    /// Scale `q^2 |G_q|_2` of the terms in the `w` equation.
    pub triangular_w_scale: f64,
    /// `L^2` norm of the energy gradient.
    pub energy_gradient: f64,
}

/// A problem with its vortex background built.
#[derive(Debug, Clone)]
pub struct Problem {
    spec: ProblemSpec,
    background: BackgroundData,
    forcing: Option<ScalarField>,
}

impl Problem {
    pub fn new(spec: ProblemSpec) -> Result<Self> {
        let background = compute_u0(&spec.vortices, &spec.grid)?;
        Ok(Self {
            spec,
            background,
            forcing: None,
        })
    }

    /// Reuses an existing background (it must belong to the same vortices and grid).
    pub fn with_background(spec: ProblemSpec, background: BackgroundData) -> Result<Self> {
        if background.grid() != &spec.grid || background.config != spec.vortices {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            spec,
            background,
            forcing: None,
        })
    }

    /// Same problem at a different coupling, sharing the background.
    pub fn at_q(&self, q: f64) -> Result<Self> {
        Ok(Self {
            spec: self.spec.with_q(q)?,
            background: self.background.clone(),
            forcing: self.forcing.clone(),
        })
    }

    /// Adds a source `g` so that the solved equation becomes `∇I(u) = g`;
    /// used to manufacture exact solutions.
    pub fn with_forcing(mut self, forcing: ScalarField) -> Result<Self> {
        forcing.same_grid(&self.background.u0)?;
        self.forcing = Some(forcing);
        Ok(self)
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn background(&self) -> &BackgroundData {
        &self.background
    }

    pub fn forcing(&self) -> Option<&ScalarField> {
        self.forcing.as_ref()
    }

    pub fn q(&self) -> f64 {
        self.spec.q
    }

    pub fn model(&self) -> &NonlinearityModel {
        &self.spec.model
    }

    /// `4πn/|T|`
    pub fn flux_density(&self) -> f64 {
        self.background.flux_density()
    }

    pub fn state(&self, u: &ScalarField) -> PointState {
        PointState::new(&self.spec.model, &self.background.exp_u0, u)
    }

    /// `e^{u*} |∇u*|^2`, assembled from the background weight:
    /// `e^u (e^{u0}|∇u0|^2 + 2 e^{u0} ∇u0·∇u + e^{u0} |∇u|^2)`.
    pub fn exp_grad_squared(&self, u: &ScalarField) -> ScalarField {
        let bg = &self.background;
        let (ux, uy) = u.gradient();
        let (gx, gy) = (&bg.grad_u0.0, &bg.grad_u0.1);
        let vals = (0..u.grid().len())
            .map(|k| {
                let e0 = bg.exp_u0.values()[k];
                let (a, b) = (ux.values()[k], uy.values()[k]);
                let cross = gx.values()[k] * a + gy.values()[k] * b;
                u.values()[k].exp() * (bg.weight.values()[k] + e0 * (2.0 * cross + a * a + b * b))
            })
            .collect();
        ScalarField::new(*u.grid(), vals).expect("finite gradient")
    }

    /// `|∇u*|^2` on the grid.
    pub fn grad_squared_total(&self, u: &ScalarField) -> ScalarField {
        (&self.background.u0 + u).grad_squared()
    }

    pub fn coefficient_fields(&self, u: &ScalarField) -> Coefficients {
        let q = self.q();
        let s = self.model().s();
        let st = self.state(u);
        let egs = self.exp_grad_squared(u);
        let f_q = st.f.zip_map(&st.phi, |f, c| f + s / q * c);
        // (f'' t + f') t |∇u*|^2 = (dphi / t) * t|∇u*|^2
        let vals: Vec<f64> = (0..u.grid().len())
            .map(|k| {
                let t = st.t.values()[k];
                let psi = if t > 0.0 { st.dphi.values()[k] / t } else { 0.0 };
                let src = self.background.source.values()[k];
                (psi * egs.values()[k] + 4.0 * PI * st.phi.values()[k] * src) / q
            })
            .collect();
        Coefficients {
            c: st.phi,
            f_q,
            g_q_partial: ScalarField::new(*u.grid(), vals).expect("finite coefficients"),
            s,
        }
    }

    /// `v = q^{-1}(-Δu + 4πn/|T|) + f(e^{u*})`.
    pub fn recover_v(&self, u: &ScalarField) -> ScalarField {
        let q = self.q();
        let cn = self.flux_density();
        let st = self.state(u);
        let lap = u.laplacian();
        lap.zip_map(&st.f, |l, f| (-l + cn) / q + f)
    }

    /// The energy functional
    ///
    /// ```text
    /// I(u) = 1/(2q^2) ∫(Δu)^2 + 1/2 ∫|∇u|^2 + 1/q ∫ f'(e^{u*}) e^{u*} |∇u*|^2
    ///        + 1/2 ∫(f(e^{u*}) - s)^2 + 4πn/|T| ∫u + 4π/q ∫ρ (f(e^{u*}) - f(0))
    /// ```
    ///
    /// minus `∫g u` when a forcing `g` is set.
    pub fn energy(&self, u: &ScalarField) -> f64 {
        self.energy_terms(u).iter().sum()
    }

    /// The individual terms of [`energy`](Self::energy), in the order listed
    /// there, followed by the forcing term.
    pub fn energy_terms(&self, u: &ScalarField) -> [f64; 7] {
        let q = self.q();
        let s = self.model().s();
        let f0 = self.model().f0();
        let st = self.state(u);
        let coeffs = SpectralCoeffs::forward(u);
        let area = u.grid().area();
        let bilaplace = area * coeffs.weighted_energy(|k2| k2 * k2) / (2.0 * q * q);
        let dirichlet = 0.5 * area * coeffs.weighted_energy(|k2| k2);
        let egs = self.exp_grad_squared(u);
        let gauge = (&st.df * &egs).integrate() / q;
        let potential = 0.5 * st.f.map(|f| (f - s) * (f - s)).integrate();
        let linear = self.flux_density() * u.integrate();
        let source = 4.0 * PI / q
            * self
                .background
                .source
                .zip_map(&st.f, |r, f| r * (f - f0))
                .integrate();
        let forcing = self.forcing.as_ref().map_or(0.0, |g| -g.dot(u));
        [bilaplace, dirichlet, gauge, potential, linear, source, forcing]
    }

    /// `L^2` gradient of the energy:
    ///
    /// ```text
    /// q^{-2} Δ²u - Δu - q^{-1}[ΔF + φ(Δu - 4πn/|T|)] + φ(F - s) + 4πn/|T|
    /// ```
    pub fn energy_gradient(&self, u: &ScalarField) -> ScalarField {
        let st = self.state(u);
        self.gradient_with_state(u, &st)
    }

    fn gradient_with_state(&self, u: &ScalarField, st: &PointState) -> ScalarField {
        let q = self.q();
        let s = self.model().s();
        let cn = self.flux_density();
        let coeffs = SpectralCoeffs::forward(u);
        let lap = coeffs.radial(|k2| -k2).to_field();
        let bilap = coeffs.radial(|k2| k2 * k2).to_field();
        let lap_f = st.f.laplacian();
        let len = u.grid().len();
        let mut out = Vec::with_capacity(len);
        for k in 0..len {
            let l = lap.values()[k];
            let phi = st.phi.values()[k];
            let f = st.f.values()[k];
            let bracket = lap_f.values()[k] + phi * (l - cn);
            let mut r = bilap.values()[k] / (q * q) - l - bracket / q + phi * (f - s) + cn;
            if let Some(g) = &self.forcing {
                r -= g.values()[k];
            }
            out.push(r);
        }
        ScalarField::new(*u.grid(), out).expect("finite gradient")
    }

    /// Linearization of [`energy_gradient`](Self::energy_gradient) at `u`.
    pub(crate) fn jacobian(&self, u: &ScalarField) -> impl Fn(&ScalarField) -> ScalarField + '_ {
        let q = self.q();
        let s = self.model().s();
        let cn = self.flux_density();
        let st = self.state(u);
        let lap_u = u.laplacian();
        // zeroth-order coefficient and the coefficient of the first-order-in-q term
        let zeroth: Vec<f64> = (0..u.grid().len())
            .map(|k| {
                let phi = st.phi.values()[k];
                let dphi = st.dphi.values()[k];
                let f = st.f.values()[k];
                dphi * (f - s) + phi * phi - dphi * (lap_u.values()[k] - cn) / q
            })
            .collect();
        let phi = st.phi;
        move |d: &ScalarField| {
            let coeffs = SpectralCoeffs::forward(d);
            let lap = coeffs.radial(|k2| -k2).to_field();
            let bilap = coeffs.radial(|k2| k2 * k2).to_field();
            let lap_phi_d = (&phi * d).laplacian();
            let vals = (0..d.grid().len())
                .map(|k| {
                    let l = lap.values()[k];
                    bilap.values()[k] / (q * q) - l
                        - (lap_phi_d.values()[k] + phi.values()[k] * l) / q
                        + zeroth[k] * d.values()[k]
                })
                .collect();
            ScalarField::from_vec(*d.grid(), vals)
        }
    }

    /// Shift of the spectral preconditioner `q^{-2}Δ² - Δ + λ`:
    /// `λ = max(1, inf f' · inf e^{u*})`.
    pub(crate) fn preconditioner_shift(&self, u: &ScalarField) -> f64 {
        let st = self.state(u);
        (st.df.min() * st.t.min()).max(1.0)
    }

    /// Largest `|c| = |f'(e^{u*}) e^{u*}|` at `u`.
    pub fn coefficient_sup(&self, u: &ScalarField) -> f64 {
        self.state(u).phi.sup_norm()
    }

    /// Residual norms of every formulation at `(u, v, w)`.
    pub fn residuals(&self, u: &ScalarField, v: &ScalarField, w: &ScalarField) -> Residuals {
        let q = self.q();
        let s = self.model().s();
        let cn = self.flux_density();
        let st = self.state(u);
        let lap_u = u.laplacian();
        let lap_v = v.laplacian();
        let lap_w = w.laplacian();
        let coeffs = self.coefficient_fields(u);
        let g_q = coeffs.g_q(v);
        let len = u.grid().len();
        let grid = *u.grid();
        let field = |f: &dyn Fn(usize) -> f64| ScalarField::from_vec(grid, (0..len).map(f).collect());
        let first = field(&|k| {
            -lap_u.values()[k] - q * (v.values()[k] - st.f.values()[k]) + cn
        });
        let second = field(&|k| {
            let (vi, fi, phi) = (v.values()[k], st.f.values()[k], st.phi.values()[k]);
            -lap_v.values()[k] - q * (phi * (s - vi) - q * (vi - fi))
        });
        let wdef = field(&|k| w.values()[k] - q * (v.values()[k] - st.f.values()[k]));
        let tri_u = field(&|k| -lap_u.values()[k] - w.values()[k] + cn);
        let tri_v = field(&|k| {
            let c = coeffs.c.values()[k];
            -lap_v.values()[k] + q * q * (1.0 + c / q) * v.values()[k]
                - q * q * coeffs.f_q.values()[k]
        });
        let tri_w = field(&|k| {
            let c = coeffs.c.values()[k];
            -lap_w.values()[k] + q * q * (1.0 + c / q) * w.values()[k] - q * q * g_q.values()[k]
        });
        Residuals {
            first_equation: first.l2_norm(),
            second_equation: second.l2_norm(),
            w_definition: wdef.l2_norm(),
            triangular_u: tri_u.l2_norm(),
            triangular_v: tri_v.l2_norm(),
            triangular_w: tri_w.l2_norm(),
            triangular_w_scale: q * q * g_q.l2_norm(),
            energy_gradient: self.energy_gradient(u).l2_norm(),
        }
    }
}
