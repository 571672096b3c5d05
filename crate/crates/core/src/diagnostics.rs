//! Bounds, integral identities and convergence metrics evaluated on solved
//! (or stored) states.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{LimitSolution, SolutionBundle};
use crate::torus::ScalarField;

/// Tolerance of the identities involving gradients near the cores.
pub const IDENTITY_TOL: f64 = 1e-4;
/// Tolerance of the pure quadrature identities.
pub const QUADRATURE_TOL: f64 = 1e-6;
/// Agreement of the two flux integrals with each other.
pub const FLUX_AGREEMENT_TOL: f64 = 1e-8;
/// Threshold below which `v` counts as constant.
pub const CONSTANT_TOL: f64 = 1e-9;
/// Flux of a single vortex; flux discrepancies are relative to at least this.
const FLUX_UNIT: f64 = 4.0 * PI;
/// Minimum distance of `argmax v` from the vortices, in units of sigma.
pub const MAX_LOCATION_SIGMAS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

impl Status {
    pub fn is_failure(self) -> bool {
        self == Status::Fail
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotApplicable => "N/A",
        })
    }
}

/// Which discrepancy is compared with the tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Measure {
    Absolute,
    Relative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub name: String,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub abs_discrepancy: f64,
    pub rel_discrepancy: f64,
    pub measure: Measure,
    pub tolerance: f64,
    pub status: Status,
}

impl InvariantReport {
    fn new(
        name: &str,
        lhs: Vec<f64>,
        rhs: Vec<f64>,
        abs: f64,
        rel: f64,
        measure: Measure,
        tolerance: f64,
    ) -> Self {
        let d = match measure {
            Measure::Absolute => abs,
            Measure::Relative => rel,
        };
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            abs_discrepancy: abs,
            rel_discrepancy: rel,
            measure,
            tolerance,
            status: if d <= tolerance { Status::Pass } else { Status::Fail },
        }
    }

    fn not_applicable(name: &str) -> Self {
        Self {
            name: name.to_string(),
            lhs: Vec::new(),
            rhs: Vec::new(),
            abs_discrepancy: 0.0,
            rel_discrepancy: 0.0,
            measure: Measure::Absolute,
            tolerance: 0.0,
            status: Status::NotApplicable,
        }
    }

    /// The discrepancy compared against the tolerance.
    pub fn discrepancy(&self) -> f64 {
        match self.measure {
            Measure::Absolute => self.abs_discrepancy,
            Measure::Relative => self.rel_discrepancy,
        }
    }

    pub fn passed(&self) -> bool {
        !self.status.is_failure()
    }
}

impl fmt::Display for InvariantReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<20} {:<4} discrepancy {:.6e} tol {:.3e}",
            self.name,
            self.status,
            self.discrepancy(),
            self.tolerance
        )
    }
}

fn relative(abs: f64, scale: f64) -> f64 {
    // floor so that identities between vanishing quantities compare absolutely
    abs / scale.abs().max(1e-10)
}

/// `f(0) <= f(e^{u*}) <= s` and `f(0) <= v <= s`, with slack `bound_tol`.
pub fn check_bounds(b: &SolutionBundle) -> InvariantReport {
    let (lo, hi) = (b.problem.model().f0(), b.problem.model().s());
    let f = b.f_of_u();
    let vals = [f.min(), f.max(), b.v.min(), b.v.max()];
    let excess = vals
        .iter()
        .map(|&x| (lo - x).max(x - hi))
        .fold(0.0, f64::max);
    InvariantReport::new(
        "bounds",
        vals.to_vec(),
        vec![lo, hi],
        excess,
        relative(excess, hi - lo),
        Measure::Absolute,
        b.spec().bound_tol(),
    )
}

/// `∫ f'(e^{u*}) e^{u*} (s - v) = ∫ w = 4πn`.
pub fn check_flux(b: &SolutionBundle) -> InvariantReport {
    let (i1, i2) = flux_integrals(b);
    let target = 4.0 * PI * b.background().n() as f64;
    let abs = (i1 - target).abs().max((i2 - target).abs());
    InvariantReport::new(
        "flux",
        vec![i1, i2],
        vec![target],
        abs,
        relative(abs, target.max(FLUX_UNIT)),
        Measure::Relative,
        QUADRATURE_TOL,
    )
}

/// The two flux integrals against each other.
pub fn check_flux_agreement(b: &SolutionBundle) -> InvariantReport {
    let (i1, i2) = flux_integrals(b);
    let abs = (i1 - i2).abs();
    InvariantReport::new(
        "flux_agreement",
        vec![i1],
        vec![i2],
        abs,
        relative(abs, i1.abs().max(i2.abs()).max(FLUX_UNIT)),
        Measure::Relative,
        FLUX_AGREEMENT_TOL,
    )
}

fn flux_integrals(b: &SolutionBundle) -> (f64, f64) {
    let st = b.problem.state(&b.u);
    let s = b.problem.model().s();
    let i1 = st.phi.zip_map(&b.v, |c, v| c * (s - v)).integrate();
    (i1, b.w.integrate())
}

/// `∫|∇v|^2 + q^2 ∫(v - f)^2 = ∫(s - v)(f'' t + f') t |∇u*|^2 + 4π ∫(s - v) f'(t) t ρ`
/// with `t = e^{u*}`; the last term is the contribution of the mollified sources.
pub fn check_identity(b: &SolutionBundle) -> InvariantReport {
    let (lhs, rhs) = identity_sides(b);
    let abs = (lhs - rhs).abs();
    InvariantReport::new(
        "identity",
        vec![lhs],
        vec![rhs],
        abs,
        relative(abs, lhs.abs().max(rhs.abs())),
        Measure::Relative,
        IDENTITY_TOL,
    )
}

/// Both sides of the identity checked by [`check_identity`].
pub fn identity_sides(b: &SolutionBundle) -> (f64, f64) {
    let p = &b.problem;
    let s = p.model().s();
    let st = p.state(&b.u);
    let egs = p.exp_grad_squared(&b.u);
    let rho = &p.background().source;
    let lhs = b.v.grad_squared().integrate() + b.w.dot(&b.w);
    let integrand: Vec<f64> = (0..b.u.grid().len())
        .map(|k| {
            let t = st.t.values()[k];
            let gap = s - b.v.values()[k];
            let psi = if t > 0.0 { st.dphi.values()[k] / t } else { 0.0 };
            gap * (psi * egs.values()[k] + 4.0 * PI * st.phi.values()[k] * rho.values()[k])
        })
        .collect();
    let rhs = ScalarField::from_vec(*b.u.grid(), integrand).integrate();
    (lhs, rhs)
}

/// `∫ e^{u*}|∇u*|^2 = q ∫ e^{u*}(v - f(e^{u*})) - 4π ∫ρ e^{u*}`.
/// The reported value (`lhs[0]`) is the quantity bounded uniformly in `q`.
pub fn check_gradu(b: &SolutionBundle) -> InvariantReport {
    let (lhs, rhs) = gradu_sides(b);
    let abs = (lhs - rhs).abs();
    InvariantReport::new(
        "gradu",
        vec![lhs],
        vec![rhs],
        abs,
        relative(abs, lhs.abs().max(rhs.abs())),
        Measure::Relative,
        QUADRATURE_TOL,
    )
}

pub fn gradu_sides(b: &SolutionBundle) -> (f64, f64) {
    let p = &b.problem;
    let st = p.state(&b.u);
    let lhs = p.exp_grad_squared(&b.u).integrate();
    let rhs = st.t.dot(&b.w) - 4.0 * PI * st.t.dot(&p.background().source);
    (lhs, rhs)
}

/// `argmax v` lies at least `5 sigma` from every vortex.
pub fn check_max_location(b: &SolutionBundle) -> InvariantReport {
    let cfg = &b.background().config;
    if cfg.vortices().is_empty() {
        return InvariantReport::not_applicable("max_location");
    }
    let grid = b.v.grid();
    let p = grid.coords(b.v.argmax());
    let d = cfg
        .vortices()
        .iter()
        .map(|v| grid.distance(p, v.position()))
        .fold(f64::INFINITY, f64::min);
    let need = MAX_LOCATION_SIGMAS * cfg.sigma();
    let short = (need - d).max(0.0);
    InvariantReport::new(
        "max_location",
        vec![d],
        vec![need],
        short,
        relative(short, need),
        Measure::Absolute,
        0.0,
    )
}

/// Without vortices `v` is constant; with vortices it is not.
pub fn check_v_constancy(b: &SolutionBundle) -> InvariantReport {
    let osc = b.v.max() - b.v.min();
    let n = b.background().n();
    let miss = if n == 0 {
        osc
    } else {
        (CONSTANT_TOL - osc).max(0.0)
    };
    InvariantReport::new(
        "v_constancy",
        vec![osc],
        vec![CONSTANT_TOL],
        miss,
        miss,
        Measure::Absolute,
        if n == 0 { CONSTANT_TOL } else { 0.0 },
    )
}

/// Residuals of the two equations of the system and of the definition of `w`.
pub fn check_residuals(b: &SolutionBundle) -> InvariantReport {
    let r = &b.residuals;
    let tol = 10.0 * b.spec().tolerances.newton_tol;
    let abs = r.first_equation.max(r.second_equation).max(r.w_definition);
    InvariantReport::new(
        "residuals",
        vec![r.first_equation, r.second_equation, r.w_definition],
        vec![0.0],
        abs,
        abs,
        Measure::Absolute,
        tol,
    )
}

/// Every report, in a fixed order.
pub fn all_reports(b: &SolutionBundle) -> Vec<InvariantReport> {
    vec![
        check_residuals(b),
        check_bounds(b),
        check_flux(b),
        check_flux_agreement(b),
        check_identity(b),
        check_gradu(b),
        check_max_location(b),
        check_v_constancy(b),
    ]
}

/// Distances between a coupled solution and the limit solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `|e^{u*} - e^{ũ}|_∞`
    pub d_eu: f64,
    /// `|v - f(e^{ũ})|_∞`
    pub d_v: f64,
    /// `|w - f'(e^{ũ}) e^{ũ} (s - f(e^{ũ}))|_∞`
    pub d_w: f64,
    /// `H^k` norms of `u - u_inf`, `k = 0, 1, 2`.
    pub hk_diff: [f64; 3],
}

pub fn convergence_metrics(b: &SolutionBundle, limit: &LimitSolution) -> Result<Metrics> {
    if b.u.grid() != limit.u_inf.grid() || b.background().config != limit.vortices {
        return Err(Error::GridMismatch);
    }
    let (eu, fu, wu) = limit.limit_fields(&b.problem);
    let st = b.problem.state(&b.u);
    let diff = &b.u - &limit.u_inf;
    Ok(Metrics {
        d_eu: (&st.t - &eu).sup_norm(),
        d_v: (&b.v - &fu).sup_norm(),
        d_w: (&b.w - &wu).sup_norm(),
        hk_diff: [0, 1, 2].map(|k| diff.sobolev_norm(k)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RowStatus {
    Converged,
    Failed(String),
}

/// One coupling of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub q: f64,
    pub status: RowStatus,
    pub newton_iterations: usize,
    pub metrics: Option<Metrics>,
    /// `H^k` norms of `u` and `v`, `k = 0, 1, 2`.
    pub hk_u: [f64; 3],
    pub hk_v: [f64; 3],
    /// `∫ e^{u*}|∇u*|^2`
    pub gradu: f64,
    /// `∫ w`
    pub flux: f64,
}

impl ConvergenceRow {
    pub fn from_bundle(b: &SolutionBundle, limit: &LimitSolution) -> Result<Self> {
        Ok(Self {
            q: b.q(),
            status: RowStatus::Converged,
            newton_iterations: b.stats.iterations,
            metrics: Some(convergence_metrics(b, limit)?),
            hk_u: [0, 1, 2].map(|k| b.u.sobolev_norm(k)),
            hk_v: [0, 1, 2].map(|k| b.v.sobolev_norm(k)),
            gradu: gradu_sides(b).0,
            flux: b.w.integrate(),
        })
    }

    pub fn failed(q: f64, err: &Error) -> Self {
        Self {
            q,
            status: RowStatus::Failed(err.to_string()),
            newton_iterations: 0,
            metrics: None,
            hk_u: [f64::NAN; 3],
            hk_v: [f64::NAN; 3],
            gradu: f64::NAN,
            flux: f64::NAN,
        }
    }

    pub fn converged(&self) -> bool {
        self.status == RowStatus::Converged
    }
}

const COLUMNS: [&str; 18] = [
    "q", "status", "newton_iters", "d_eu", "d_v", "d_w", "h0_diff", "h1_diff", "h2_diff", "h0_u",
    "h1_u", "h2_u", "h0_v", "h1_v", "h2_v", "gradu", "flux", "error",
];

/// Rows ordered by `q`, plus `#` metadata lines written ahead of the header.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub metadata: Vec<(String, String)>,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn column(&self, f: impl Fn(&ConvergenceRow) -> Option<f64>) -> Vec<Option<f64>> {
        self.rows.iter().map(f).collect()
    }

    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(ConvergenceRow::converged)
    }

    /// Tab-separated values, every number in full precision.
    pub fn write_tsv(&self, mut out: impl Write) -> io::Result<()> {
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}: {v}")?;
        }
        writeln!(out, "{}", COLUMNS.join("\t"))?;
        for r in &self.rows {
            let m = r.metrics;
            let num = |x: Option<f64>| x.map_or("nan".to_string(), |x| format!("{x:.17e}"));
            let mut cells = vec![
                format!("{:.17e}", r.q),
                match &r.status {
                    RowStatus::Converged => "ok".to_string(),
                    RowStatus::Failed(_) => "failed".to_string(),
                },
                r.newton_iterations.to_string(),
                num(m.map(|m| m.d_eu)),
                num(m.map(|m| m.d_v)),
                num(m.map(|m| m.d_w)),
            ];
            for k in 0..3 {
                cells.push(num(m.map(|m| m.hk_diff[k])));
            }
            for k in 0..3 {
                cells.push(num(Some(r.hk_u[k])));
            }
            for k in 0..3 {
                cells.push(num(Some(r.hk_v[k])));
            }
            cells.push(num(Some(r.gradu)));
            cells.push(num(Some(r.flux)));
            cells.push(match &r.status {
                RowStatus::Converged => "-".to_string(),
                RowStatus::Failed(e) => e.replace(['\t', '\n'], " "),
            });
            writeln!(out, "{}", cells.join("\t"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::VortexConfig;
    use crate::nonlinearity::NonlinearityModel;
    use crate::solver::{solve_coupled, solve_limit, Problem, ProblemSpec, Tolerances};
    use crate::torus::GridSpec;

    fn problem(grid: GridSpec, pts: &[(f64, f64, u32)], q: f64) -> Problem {
        let vc = VortexConfig::on_grid(&grid, pts, 4.0).unwrap();
        let m = NonlinearityModel::u1(1.0).unwrap();
        Problem::new(ProblemSpec::new(m, vc, q, grid, Tolerances::default()).unwrap()).unwrap()
    }

    #[test]
    fn trivial_bundle_reports() {
        let g = GridSpec::unit(16).unwrap();
        let b = solve_coupled(&problem(g, &[], 5.0), None).unwrap();
        let bounds = check_bounds(&b);
        assert_eq!(bounds.status, Status::Pass);
        assert!((bounds.lhs[1] - 1.0).abs() < 1e-12);
        assert_eq!(check_max_location(&b).status, Status::NotApplicable);
        assert_eq!(check_v_constancy(&b).status, Status::Pass);
        for r in [check_flux(&b), check_identity(&b), check_gradu(&b)] {
            assert_eq!(r.status, Status::Pass, "{r}");
            assert!(r.lhs.iter().chain(&r.rhs).all(|x| x.abs() < 1e-12), "{r:?}");
        }
    }

    #[test]
    fn bounds_negative_control() {
        // bound_tol = 1e-6 + 10 (4/64)^2 < 0.1
        let g = GridSpec::unit(64).unwrap();
        let p = problem(g, &[], 5.0);
        let b = solve_coupled(&p, None).unwrap();
        let v = b.v.map(|x| x + 0.1);
        let bad = SolutionBundle::assemble(p, b.u.clone(), v, b.w.clone()).unwrap();
        let r = check_bounds(&bad);
        assert_eq!(r.status, Status::Fail);
        assert!((r.abs_discrepancy - 0.1).abs() < 1e-9);
        assert_eq!(check_residuals(&bad).status, Status::Fail);
    }

    #[test]
    fn limit_against_itself_has_zero_metrics() {
        let g = GridSpec::new(32, 20.0).unwrap();
        let p = problem(g, &[(0.5, 0.5, 1)], 20.0);
        let lim = solve_limit(&p).unwrap();
        let (_, f, w) = lim.limit_fields(&p);
        let b = SolutionBundle::assemble(p, lim.u_inf.clone(), f, w).unwrap();
        let m = convergence_metrics(&b, &lim).unwrap();
        assert_eq!((m.d_eu, m.d_v, m.d_w), (0.0, 0.0, 0.0));
        assert_eq!(m.hk_diff, [0.0; 3]);
    }

    #[test]
    fn metrics_reject_other_grids() {
        let g = GridSpec::new(32, 20.0).unwrap();
        let lim = solve_limit(&problem(g, &[(0.5, 0.5, 1)], 20.0)).unwrap();
        let g2 = GridSpec::new(16, 20.0).unwrap();
        let p2 = problem(g2, &[], 20.0);
        let b = solve_coupled(&p2, None).unwrap();
        assert_eq!(convergence_metrics(&b, &lim), Err(Error::GridMismatch));
    }

    #[test]
    fn table_has_header_and_metadata() {
        let mut t = ConvergenceTable::default();
        t.metadata.push(("model".into(), "u1".into()));
        t.rows.push(ConvergenceRow::failed(3.0, &Error::NotAscending));
        let mut out = Vec::new();
        t.write_tsv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "# model: u1");
        assert!(lines[1].starts_with("q\tstatus\tnewton_iters\td_eu\td_v\td_w"));
        assert!(lines[2].contains("failed"));
        assert_eq!(lines[2].split('\t').count(), COLUMNS.len());
    }
}
