//! Shared fixtures for the benchmarks.

use mcs_core::solver::{Problem, ProblemSpec, Tolerances};
use mcs_core::{GridSpec, NonlinearityModel, ScalarField, VortexConfig};

/// One U(1) vortex in the middle of a torus of side 20.
pub fn one_vortex(n: usize, q: f64) -> Problem {
    let grid = GridSpec::new(n, 20.0).expect("valid grid");
    let vc = VortexConfig::on_grid(&grid, &[(0.5, 0.5, 1)], 4.0).expect("valid vortex");
    let model = NonlinearityModel::u1(1.0).expect("valid model");
    Problem::new(ProblemSpec::new(model, vc, q, grid, Tolerances::default()).expect("valid spec"))
        .expect("background builds")
}

pub fn wave(grid: GridSpec) -> ScalarField {
    let k = 2.0 * std::f64::consts::PI / grid.length();
    ScalarField::from_fn(grid, |x, y| (k * x).sin() * (2.0 * k * y).cos() + 0.3 * (3.0 * k * (x + y)).sin())
}
