use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic `n x n` grid on the flat torus `[0, L)^2`.
///
/// Grid point `(i, j)` sits at `(i h, j h)` with `h = L / n` and is stored at
/// linear index `i * n + j`. With the default side length `L = 1` the torus
/// has unit area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    length: f64,
}

impl GridSpec {
    pub const MIN_POINTS: usize = 8;

    /// Grid on the unit torus.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, 1.0)
    }

    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < Self::MIN_POINTS || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and >= {}, got {n}",
                Self::MIN_POINTS
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "side length must be positive, got {length}"
            )));
        }
        Ok(Self { n, length })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.length
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Total measure of the torus, `L^2`.
    #[inline]
    pub fn area(&self) -> f64 {
        self.length * self.length
    }

    /// Quadrature weight of a single grid cell.
    #[inline]
    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    /// Number of grid points, `n^2`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (f64, f64) {
        let h = self.spacing();
        ((index / self.n) as f64 * h, (index % self.n) as f64 * h)
    }

    /// Signed integer wave number for FFT slot `m`, in `[-n/2, n/2)`.
    #[inline]
    pub fn wave_number(&self, m: usize) -> i64 {
        let n = self.n as i64;
        let m = m as i64;
        if m < n / 2 {
            m
        } else {
            m - n
        }
    }

    /// Angular wave number `2 pi k / L` for FFT slot `m`.
    #[inline]
    pub fn angular(&self, m: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.wave_number(m) as f64 / self.length
    }

    /// Periodic distance between two points of the torus.
    pub fn distance(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        let wrap = |d: f64| {
            let d = d.rem_euclid(self.length);
            d.min(self.length - d)
        };
        wrap(a.0 - b.0).hypot(wrap(a.1 - b.1))
    }
}
