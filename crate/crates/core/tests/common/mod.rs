#![allow(dead_code)]

use std::f64::consts::PI;

use mcs_core::{GridSpec, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random trigonometric polynomial with wave numbers `|k| <= kmax`.
pub fn smooth_field(grid: GridSpec, rng: &mut impl Rng, kmax: i64, amplitude: f64) -> ScalarField {
    let l = grid.length();
    let mut modes = Vec::new();
    for kx in -kmax..=kmax {
        for ky in 0..=kmax {
            let a: f64 = rng.gen_range(-1.0..1.0) / (1.0 + (kx * kx + ky * ky) as f64);
            let phase: f64 = rng.gen_range(0.0..2.0 * PI);
            modes.push((kx as f64, ky as f64, a, phase));
        }
    }
    ScalarField::from_fn(grid, |x, y| {
        amplitude
            * modes
                .iter()
                .map(|&(kx, ky, a, ph)| a * (2.0 * PI * (kx * x + ky * y) / l + ph).cos())
                .sum::<f64>()
    })
}

/// Independent uniform random values.
pub fn rough_field(grid: GridSpec, rng: &mut impl Rng, lo: f64, hi: f64) -> ScalarField {
    let v = (0..grid.len()).map(|_| rng.gen_range(lo..hi)).collect();
    ScalarField::new(grid, v).unwrap()
}

/// Error-free transformation `a + b = s + e`.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Sum in double-double arithmetic.
pub fn dd_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut hi, mut lo) = (0.0, 0.0);
    for v in values {
        let (s, e) = two_sum(hi, v);
        hi = s;
        lo += e;
    }
    hi + lo
}

/// Naive `O(N^4)` discrete Fourier differentiation with multiplier `m(ξx, ξy)`,
/// independent of the FFT code. The Nyquist row and column are dropped.
pub fn naive_multiplier(u: &ScalarField, m: impl Fn(f64, f64) -> (f64, f64)) -> ScalarField {
    let g = *u.grid();
    let n = g.n();
    let l = g.length();
    let wave = |k: usize| -> Option<f64> {
        let k = k as i64;
        let n = n as i64;
        let k = if k < n / 2 { k } else { k - n };
        if k == -n / 2 {
            None
        } else {
            Some(2.0 * PI * k as f64 / l)
        }
    };
    let mut coeffs = vec![(0.0, 0.0); n * n];
    for a in 0..n {
        for b in 0..n {
            let (mut re, mut im) = (0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    let th = -2.0 * PI * ((a * i + b * j) % n) as f64 / n as f64;
                    let v = u.get(i, j);
                    re += v * th.cos();
                    im += v * th.sin();
                }
            }
            coeffs[a * n + b] = (re / (n * n) as f64, im / (n * n) as f64);
        }
    }
    let mut out = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            let (Some(xa), Some(xb)) = (wave(a), wave(b)) else { continue };
            let (mr, mi) = m(xa, xb);
            let (cr, ci) = coeffs[a * n + b];
            let (pr, pi) = (cr * mr - ci * mi, cr * mi + ci * mr);
            for i in 0..n {
                for j in 0..n {
                    let th = 2.0 * PI * ((a * i + b * j) % n) as f64 / n as f64;
                    out[i * n + j] += pr * th.cos() - pi * th.sin();
                }
            }
        }
    }
    ScalarField::new(g, out).unwrap()
}
