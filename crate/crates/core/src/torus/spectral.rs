//! Fourier transforms on the periodic grid and the diagonal operators they
//! induce: Laplacian, first derivatives, Sobolev norms and inverses of
//! constant-coefficient elliptic operators.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::field::ScalarField;
use super::grid::GridSpec;

/// Rows shorter than this are transformed on the calling thread.
const PARALLEL_MIN_N: usize = 128;

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("fft plan cache poisoned");
    map.entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

fn transform_rows(fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64], n: usize) {
    if n >= PARALLEL_MIN_N {
        let scratch_len = fft.get_inplace_scratch_len();
        data.par_chunks_mut(n).for_each_init(
            || vec![Complex64::new(0.0, 0.0); scratch_len],
            |scratch, row| fft.process_with_scratch(row, scratch),
        );
    } else {
        fft.process(data);
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

fn fft2(data: &mut [Complex64], n: usize, fft: &Arc<dyn Fft<f64>>) {
    transform_rows(fft, data, n);
    transpose(data, n);
    transform_rows(fft, data, n);
    transpose(data, n);
}

/// Fourier coefficients of a real field, normalized so that
/// `u(x) = sum_k c_k exp(i xi_k . x)` with `xi_k = 2 pi k / L`.
///
/// Slot `(a, b)` holds wave vector `(k_a, k_b)` where `k` runs over
/// `{-n/2, ..., n/2 - 1}` in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoeffs {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl SpectralCoeffs {
    pub fn forward(field: &ScalarField) -> Self {
        let grid = *field.grid();
        let n = grid.n();
        let mut data: Vec<Complex64> = field
            .values()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fft2(&mut data, n, &plans(n).forward);
        let norm = 1.0 / grid.len() as f64;
        data.iter_mut().for_each(|c| *c *= norm);
        Self { grid, coeffs: data }
    }

    /// Inverse transform, keeping the real part.
    pub fn to_field(&self) -> ScalarField {
        let n = self.grid.n();
        let mut data = self.coeffs.clone();
        fft2(&mut data, n, &plans(n).inverse);
        ScalarField::from_vec(self.grid, data.into_iter().map(|c| c.re).collect())
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient of the integer wave vector `(kx, ky)`.
    pub fn get(&self, kx: i64, ky: i64) -> Complex64 {
        let n = self.grid.n() as i64;
        let a = kx.rem_euclid(n) as usize;
        let b = ky.rem_euclid(n) as usize;
        self.coeffs[self.grid.index(a, b)]
    }

    /// Integer wave vector stored at linear slot `index`.
    pub fn wave_vector(&self, index: usize) -> (i64, i64) {
        let n = self.grid.n();
        (
            self.grid.wave_number(index / n),
            self.grid.wave_number(index % n),
        )
    }

    /// Multiplies every coefficient by `m(xi_x, xi_y, nyquist)` where the
    /// flag marks slots whose x or y index is the Nyquist frequency.
    pub fn multiplied(&self, m: impl Fn(f64, f64, bool) -> Complex64) -> Self {
        let n = self.grid.n();
        let xi: Vec<f64> = (0..n).map(|a| self.grid.angular(a)).collect();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let (a, b) = (k / n, k % n);
                c * m(xi[a], xi[b], a == n / 2 || b == n / 2)
            })
            .collect();
        Self {
            grid: self.grid,
            coeffs,
        }
    }

    /// Multiplies every coefficient by a real function of `|xi|^2`.
    pub fn radial(&self, m: impl Fn(f64) -> f64) -> Self {
        self.multiplied(|x, y, _| Complex64::new(m(x * x + y * y), 0.0))
    }

    /// `sum_k w(|xi_k|^2) |c_k|^2`.
    pub fn weighted_energy(&self, w: impl Fn(f64) -> f64) -> f64 {
        let n = self.grid.n();
        let xi: Vec<f64> = (0..n).map(|a| self.grid.angular(a)).collect();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let (a, b) = (k / n, k % n);
                w(xi[a] * xi[a] + xi[b] * xi[b]) * c.norm_sqr()
            })
            .sum()
    }
}

impl ScalarField {
    /// Spectral Laplacian, multiplier `-|xi|^2`.
    pub fn laplacian(&self) -> ScalarField {
        SpectralCoeffs::forward(self).radial(|k2| -k2).to_field()
    }

    /// `(d/dx, d/dy)` by spectral differentiation. The Nyquist row and column
    /// are dropped so that derivatives of real fields stay real.
    pub fn gradient(&self) -> (ScalarField, ScalarField) {
        let c = SpectralCoeffs::forward(self);
        let dx = c
            .multiplied(|x, _, nyq| {
                if nyq {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, x)
                }
            })
            .to_field();
        let dy = c
            .multiplied(|_, y, nyq| {
                if nyq {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, y)
                }
            })
            .to_field();
        (dx, dy)
    }

    /// Pointwise `|grad u|^2`.
    pub fn grad_squared(&self) -> ScalarField {
        let (dx, dy) = self.gradient();
        dx.zip_map(&dy, |a, b| a * a + b * b)
    }

    /// `H^k` norm: `(|T| sum_k (1 + |xi_k|^2)^k |c_k|^2)^(1/2)`, where `|T|`
    /// is the torus area. For `k = 0` this is the `L^2` norm.
    pub fn sobolev_norm(&self, k: u32) -> f64 {
        let area = self.grid().area();
        (area * SpectralCoeffs::forward(self).weighted_energy(|k2| (1.0 + k2).powi(k as i32)))
            .sqrt()
    }

    /// Solves `(a |xi|^4 + b |xi|^2 + c) u_hat = f_hat` mode by mode. The zero
    /// mode is set to zero when `c == 0`.
    pub fn solve_diagonal(&self, a: f64, b: f64, c: f64) -> ScalarField {
        SpectralCoeffs::forward(self)
            .radial(|k2| {
                let d = a * k2 * k2 + b * k2 + c;
                if d == 0.0 {
                    0.0
                } else {
                    1.0 / d
                }
            })
            .to_field()
    }

    /// Mean-zero solution of `-Δ u = self - mean(self)`.
    pub fn inverse_laplacian(&self) -> ScalarField {
        self.solve_diagonal(0.0, 1.0, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit(n: usize) -> GridSpec {
        GridSpec::unit(n).unwrap()
    }

    fn smooth(g: GridSpec) -> ScalarField {
        ScalarField::from_fn(g, |x, y| {
            (2.0 * PI * x).sin() * (4.0 * PI * y).cos()
                + 0.3 * (2.0 * PI * (x + 2.0 * y)).cos()
                + 0.7
        })
    }

    #[test]
    fn round_trip() {
        let f = smooth(unit(32));
        let back = SpectralCoeffs::forward(&f).to_field();
        let err = (&back - &f).sup_norm();
        assert!(err <= 1e-12 * f.sup_norm(), "{err}");
    }

    #[test]
    fn coefficients_of_sine() {
        let f = ScalarField::from_fn(unit(16), |x, _| (2.0 * PI * x).sin());
        let c = SpectralCoeffs::forward(&f);
        assert!((c.get(1, 0) - Complex64::new(0.0, -0.5)).norm() < 1e-14);
        assert!((c.get(-1, 0) - Complex64::new(0.0, 0.5)).norm() < 1e-14);
        assert!(c.get(0, 1).norm() < 1e-14);
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let f = ScalarField::constant(unit(16), 3.5);
        assert!(f.laplacian().sup_norm() < 1e-13);
    }

    #[test]
    fn laplacian_of_eigenfunction() {
        let g = unit(32);
        let f = ScalarField::from_fn(g, |x, _| (2.0 * PI * x).sin());
        let expected = f.scale(-4.0 * PI * PI);
        let err = (&f.laplacian() - &expected).sup_norm();
        assert!(err <= 1e-12 * expected.sup_norm(), "{err}");
    }

    #[test]
    fn laplacian_respects_side_length() {
        let g = GridSpec::new(32, 3.0).unwrap();
        let f = ScalarField::from_fn(g, |_, y| (2.0 * PI * y / 3.0).cos());
        let expected = f.scale(-(2.0 * PI / 3.0).powi(2));
        assert!((&f.laplacian() - &expected).sup_norm() < 1e-12);
    }

    #[test]
    fn laplacian_integrates_to_zero() {
        let f = smooth(unit(32));
        assert!(f.laplacian().integrate().abs() < 1e-12);
        assert!(f.laplacian().mean().abs() < 1e-12);
    }

    #[test]
    fn grad_squared_of_sine() {
        let g = unit(32);
        let f = ScalarField::from_fn(g, |x, _| (2.0 * PI * x).sin());
        let expected = ScalarField::from_fn(g, |x, _| 4.0 * PI * PI * (2.0 * PI * x).cos().powi(2));
        let err = (&f.grad_squared() - &expected).sup_norm();
        assert!(err <= 1e-12 * expected.sup_norm(), "{err}");
        assert!(ScalarField::constant(g, 2.0).grad_squared().sup_norm() < 1e-20);
    }

    #[test]
    fn grad_squared_integration_by_parts() {
        let f = smooth(unit(32));
        let lhs = f.grad_squared().integrate();
        let rhs = -f.dot(&f.laplacian());
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs());
    }

    #[test]
    fn sobolev_norm_examples() {
        let g = unit(32);
        assert!((ScalarField::constant(g, -2.5).sobolev_norm(3) - 2.5).abs() < 1e-13);
        let f = ScalarField::from_fn(g, |x, _| (2.0 * PI * x).sin());
        let expected = (0.5 + 4.0 * PI * PI * 0.5).sqrt();
        assert!((f.sobolev_norm(1) - expected).abs() <= 1e-12 * expected);
        let f = smooth(g);
        assert!((f.sobolev_norm(0) - f.l2_norm()).abs() <= 1e-12 * f.l2_norm());
    }

    #[test]
    fn inverse_laplacian_inverts() {
        let f = smooth(unit(32));
        let u = f.inverse_laplacian();
        let back = u.laplacian().scale(-1.0);
        let target = f.map(|v| v - f.mean());
        assert!((&back - &target).sup_norm() < 1e-12);
        assert!(u.mean().abs() < 1e-14);
    }
}
