//! The monotone nonlinearity `f(t)`, `t >= 0`, with its first two
//! derivatives, its inverse, the level `s`, and a smooth flattening beyond a
//! threshold `T` that keeps `|f| + |f'| + |f''|` bounded.
//!
//! Beyond `T` the derivative is replaced by its first-order Taylor extension
//! times `1 - S((t - T) / T)`, where `S` is the quintic smoothstep; `f` is its
//! exact antiderivative, so `f` is `C^2` across `T` and constant after `2T`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::ScalarField;

/// `f`, `f'` and `f''` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eval {
    pub f: f64,
    pub df: f64,
    pub d2f: f64,
}

/// Monotone cubic Hermite interpolant (Fritsch-Carlson slopes) through
/// tabulated `(t, f)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCubic {
    ts: Vec<f64>,
    fs: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(ts: Vec<f64>, fs: Vec<f64>) -> Result<Self> {
        if ts.len() != fs.len() || ts.len() < 2 {
            return Err(Error::InvalidModel(
                "table needs at least two (t, f) pairs".into(),
            ));
        }
        if ts[0] != 0.0 {
            return Err(Error::InvalidModel("table must start at t = 0".into()));
        }
        for k in 1..ts.len() {
            if !(ts[k] > ts[k - 1]) {
                return Err(Error::InvalidModel(format!(
                    "table abscissae must increase strictly (row {k})"
                )));
            }
            if !(fs[k] > fs[k - 1]) {
                return Err(Error::InvalidModel(format!(
                    "table values must increase strictly (row {k})"
                )));
            }
        }
        let m = ts.len();
        let secants: Vec<f64> = (0..m - 1)
            .map(|k| (fs[k + 1] - fs[k]) / (ts[k + 1] - ts[k]))
            .collect();
        let mut slopes = vec![0.0; m];
        slopes[0] = secants[0];
        slopes[m - 1] = secants[m - 2];
        for k in 1..m - 1 {
            slopes[k] = 0.5 * (secants[k - 1] + secants[k]);
        }
        for k in 0..m - 1 {
            let a = slopes[k] / secants[k];
            let b = slopes[k + 1] / secants[k];
            let r = a.hypot(b);
            if r > 3.0 {
                slopes[k] = 3.0 * a / r * secants[k];
                slopes[k + 1] = 3.0 * b / r * secants[k];
            }
        }
        Ok(Self { ts, fs, slopes })
    }

    pub fn last_abscissa(&self) -> f64 {
        *self.ts.last().expect("non-empty table")
    }

    fn eval(&self, t: f64) -> Eval {
        let m = self.ts.len();
        let k = match self.ts.partition_point(|&x| x <= t) {
            0 => 0,
            p => (p - 1).min(m - 2),
        };
        let (t0, t1) = (self.ts[k], self.ts[k + 1]);
        let h = t1 - t0;
        let x = (t - t0) / h;
        let (y0, y1) = (self.fs[k], self.fs[k + 1]);
        let (m0, m1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let x2 = x * x;
        let x3 = x2 * x;
        let f = (2.0 * x3 - 3.0 * x2 + 1.0) * y0
            + (x3 - 2.0 * x2 + x) * m0
            + (-2.0 * x3 + 3.0 * x2) * y1
            + (x3 - x2) * m1;
        let df = ((6.0 * x2 - 6.0 * x) * y0
            + (3.0 * x2 - 4.0 * x + 1.0) * m0
            + (-6.0 * x2 + 6.0 * x) * y1
            + (3.0 * x2 - 2.0 * x) * m1)
            / h;
        let d2f = ((12.0 * x - 6.0) * y0
            + (6.0 * x - 4.0) * m0
            + (-12.0 * x + 6.0) * y1
            + (6.0 * x - 2.0) * m1)
            / (h * h);
        Eval { f, df, d2f }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelKind {
    /// `f(t) = t`.
    U1,
    /// `f(t) = (t - 1) / (t + 1)`.
    Cp1,
    Custom(MonotoneCubic),
}

impl ModelKind {
    fn raw(&self, t: f64) -> Eval {
        match self {
            ModelKind::U1 => Eval {
                f: t,
                df: 1.0,
                d2f: 0.0,
            },
            ModelKind::Cp1 => {
                let p = 1.0 + t;
                Eval {
                    f: (t - 1.0) / p,
                    df: 2.0 / (p * p),
                    d2f: -4.0 / (p * p * p),
                }
            }
            ModelKind::Custom(table) => table.eval(t),
        }
    }

    /// Supremum of the raw (untruncated) `f` on `t >= 0`.
    fn raw_sup(&self) -> f64 {
        match self {
            ModelKind::U1 => f64::INFINITY,
            ModelKind::Cp1 => 1.0,
            ModelKind::Custom(_) => f64::INFINITY,
        }
    }
}

fn smoothstep(x: f64) -> (f64, f64) {
    let x2 = x * x;
    (
        x2 * x * (10.0 - 15.0 * x + 6.0 * x2),
        30.0 * x2 * (1.0 - 2.0 * x + x2),
    )
}

/// `int_0^x (1 - S)` and `int_0^x y (1 - S(y)) dy`.
fn smoothstep_moments(x: f64) -> (f64, f64) {
    let x2 = x * x;
    let x4 = x2 * x2;
    let a1 = x - (x4 * x2 - 3.0 * x4 * x + 2.5 * x4);
    let a2 = 0.5 * x2 - (6.0 / 7.0 * x4 * x2 * x - 2.5 * x4 * x2 + 2.0 * x4 * x);
    (a1, a2)
}

/// A nonlinearity together with its level `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityModel {
    name: String,
    kind: ModelKind,
    s: f64,
    /// Truncation threshold `T`; `+inf` when no truncation is applied.
    #[serde(with = "unbounded", default = "unbounded::none")]
    threshold: f64,
}

/// Stores `+inf` as an absent value so that formats without infinities
/// (JSON) round-trip.
mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if t.is_finite() {
            ser.serialize_some(t)
        } else {
            ser.serialize_none()
        }
    }

    pub fn none() -> f64 {
        f64::INFINITY
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(de)?.unwrap_or(f64::INFINITY))
    }
}

impl NonlinearityModel {
    /// `f(t) = t`, truncated at `T = 2 f^{-1}(s) = 2 s`.
    pub fn u1(s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "U(1) requires f(0) = 0 < s, got s = {s}"
            )));
        }
        Self::build("u1".into(), ModelKind::U1, s, 2.0 * s)
    }

    /// `f(t) = (t - 1)/(t + 1)`; already bounded with bounded derivatives.
    pub fn cp1(s: f64) -> Result<Self> {
        Self::build("cp1".into(), ModelKind::Cp1, s, f64::INFINITY)
    }

    /// CP(1) instance in physical variables: the level `s = -S`.
    pub fn cp1_from_physical(big_s: f64) -> Result<Self> {
        Self::cp1(-big_s)
    }

    /// Tabulated `f` with monotone cubic interpolation, truncated at the last
    /// table abscissa.
    pub fn custom(ts: Vec<f64>, fs: Vec<f64>, s: f64) -> Result<Self> {
        let table = MonotoneCubic::new(ts, fs)?;
        let threshold = table.last_abscissa();
        Self::build("custom".into(), ModelKind::Custom(table), s, threshold)
    }

    /// Same model with a different truncation threshold.
    pub fn with_threshold(&self, threshold: f64) -> Result<Self> {
        if let ModelKind::Custom(table) = &self.kind {
            if threshold > table.last_abscissa() {
                return Err(Error::InvalidModel(
                    "threshold of a tabulated model cannot exceed its table".into(),
                ));
            }
        }
        Self::build(self.name.clone(), self.kind.clone(), self.s, threshold)
    }

    fn build(name: String, kind: ModelKind, s: f64, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0) {
            return Err(Error::InvalidModel(format!(
                "truncation threshold must be positive, got {threshold}"
            )));
        }
        let model = Self {
            name,
            kind,
            s,
            threshold,
        };
        let f0 = model.f0();
        let sup = model.sup_value();
        if !(f0 < s && s < sup) {
            return Err(Error::InvalidModel(format!(
                "level s = {s} must satisfy f(0) = {f0} < s < sup f = {sup}"
            )));
        }
        let t_s = model.inverse(s)?;
        if model.eval_unchecked(t_s).df <= 0.0 {
            return Err(Error::InvalidModel("f' must be positive at f^-1(s)".into()));
        }
        Ok(model)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn f0(&self) -> f64 {
        self.kind.raw(0.0).f
    }

    /// Supremum of the truncated `f`.
    pub fn sup_value(&self) -> f64 {
        if self.threshold.is_finite() {
            self.eval_unchecked(2.0 * self.threshold).f
        } else {
            self.kind.raw_sup()
        }
    }

    /// Truncated `(f, f', f'')` at `t >= 0`.
    pub fn eval(&self, t: f64) -> Result<Eval> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::NegativeArgument {
                value: t,
                index: None,
            });
        }
        Ok(self.eval_unchecked(t))
    }

    /// As [`eval`](Self::eval) without the sign check.
    #[inline]
    pub fn eval_unchecked(&self, t: f64) -> Eval {
        let cap = self.threshold;
        if t <= cap {
            return self.kind.raw(t);
        }
        let at = self.kind.raw(cap);
        let x = ((t - cap) / cap).min(1.0);
        let (step, dstep) = smoothstep(x);
        let (a1, a2) = smoothstep_moments(x);
        let f = at.f + cap * at.df * a1 + cap * cap * at.d2f * a2;
        if x >= 1.0 {
            return Eval {
                f,
                df: 0.0,
                d2f: 0.0,
            };
        }
        let lin = at.df + at.d2f * (t - cap);
        Eval {
            f,
            df: lin * (1.0 - step),
            d2f: at.d2f * (1.0 - step) - lin * dstep / cap,
        }
    }

    /// Pointwise evaluation on a field of nonnegative values.
    pub fn eval_field(
        &self,
        t: &ScalarField,
    ) -> Result<(ScalarField, ScalarField, ScalarField)> {
        if let Some((index, &value)) = t
            .values()
            .iter()
            .enumerate()
            .find(|(_, &v)| v < 0.0 || v.is_nan())
        {
            return Err(Error::NegativeArgument {
                value,
                index: Some(index),
            });
        }
        let evals: Vec<Eval> = t.values().iter().map(|&v| self.eval_unchecked(v)).collect();
        let grid = *t.grid();
        let pick = |g: fn(&Eval) -> f64| {
            ScalarField::new(grid, evals.iter().map(g).collect()).expect("finite evaluation")
        };
        Ok((pick(|e| e.f), pick(|e| e.df), pick(|e| e.d2f)))
    }

    /// `t` with `f(t) = y`, for `f(0) <= y < f(T)`; safeguarded Newton on a
    /// bisection bracket.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        let lo_val = self.f0();
        let hi_val = if self.threshold.is_finite() {
            self.eval_unchecked(self.threshold).f
        } else {
            self.kind.raw_sup()
        };
        if !(y >= lo_val && y < hi_val) {
            return Err(Error::OutOfRange {
                value: y,
                lo: lo_val,
                hi: hi_val,
            });
        }
        let mut lo = 0.0;
        let mut hi = if self.threshold.is_finite() {
            self.threshold
        } else {
            let mut b = 1.0;
            while self.eval_unchecked(b).f <= y {
                b *= 2.0;
            }
            b
        };
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            let e = self.eval_unchecked(t);
            let r = e.f - y;
            if r == 0.0 {
                return Ok(t);
            }
            if r > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let newton = t - r / e.df;
            t = if e.df > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 4.0 * f64::EPSILON * hi.max(1.0) {
                break;
            }
            if (self.eval_unchecked(t).f - y).abs() <= 1e-15 * y.abs().max(1.0) {
                break;
            }
        }
        Ok(t)
    }
}
