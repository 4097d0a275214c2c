//! Bézier curves of arbitrary order over a time interval `[0, T]`.
//!
//! A [`ControlPolygon`] stores its control points flat (`(order + 1) * dim`
//! reals) so that scalar, planar and spatial curves share one code path.
//! Evaluation never extrapolates: times outside `[0, T]` are rejected.

use thiserror::Error;

/// Largest order accepted by [`binomial`] without loss of exactness.
pub const MAX_ORDER: usize = 30;

/// Slack allowed on the time domain to absorb accumulated rounding in callers.
const TIME_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BezierError {
    #[error("basis index {index} out of range for order {order}")]
    BasisIndex { index: usize, order: usize },
    #[error("order {0} exceeds the supported maximum of {MAX_ORDER}")]
    OrderTooLarge(usize),
    #[error("parameter u = {0} outside [0, 1]")]
    ParameterOutOfRange(f64),
    #[error("time t = {t} outside [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error("dimension must be 1, 2 or 3, got {0}")]
    Dimension(usize),
    #[error("expected {expected} coordinates, got {actual}")]
    PointCount { expected: usize, actual: usize },
    #[error("duration must be finite and strictly positive, got {0}")]
    Duration(f64),
    #[error("control points must be finite")]
    NonFinite,
    #[error("explicit cubic form requires order 3, got order {0}")]
    NotCubic(usize),
}

/// Binomial coefficient C(n, i) via the multiplicative recurrence.
pub fn binomial(n: usize, i: usize) -> f64 {
    if i > n {
        return 0.0;
    }
    let k = i.min(n - i);
    let mut c = 1.0_f64;
    for j in 0..k {
        // C(n, j+1) = C(n, j) * (n - j) / (j + 1); every intermediate is an integer.
        c = c * (n - j) as f64 / (j + 1) as f64;
    }
    c.round()
}

/// Bernstein basis polynomial `b_i^n(u) = C(n,i) u^i (1-u)^(n-i)`.
pub fn bernstein(i: usize, n: usize, u: f64) -> Result<f64, BezierError> {
    if n > MAX_ORDER {
        return Err(BezierError::OrderTooLarge(n));
    }
    if i > n {
        return Err(BezierError::BasisIndex { index: i, order: n });
    }
    if !(-TIME_EPS..=1.0 + TIME_EPS).contains(&u) {
        return Err(BezierError::ParameterOutOfRange(u));
    }
    let u = u.clamp(0.0, 1.0);
    Ok(binomial(n, i) * u.powi(i as i32) * (1.0 - u).powi((n - i) as i32))
}

/// Control points, dimension and duration of a single Bézier segment.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPolygon {
    dim: usize,
    points: Vec<f64>,
    duration: f64,
}

impl ControlPolygon {
    /// Builds a polygon from flat coordinates, `dim` reals per control point.
    pub fn new(dim: usize, points: Vec<f64>, duration: f64) -> Result<Self, BezierError> {
        if !(1..=3).contains(&dim) {
            return Err(BezierError::Dimension(dim));
        }
        if points.is_empty() || points.len() % dim != 0 {
            return Err(BezierError::PointCount {
                expected: dim * (points.len() / dim).max(1),
                actual: points.len(),
            });
        }
        if points.len() / dim > MAX_ORDER + 1 {
            return Err(BezierError::OrderTooLarge(points.len() / dim - 1));
        }
        if !(duration.is_finite() && duration > 0.0) {
            return Err(BezierError::Duration(duration));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(BezierError::NonFinite);
        }
        Ok(Self {
            dim,
            points,
            duration,
        })
    }

    /// Builds a 3-D polygon from a list of points.
    pub fn from_points3(points: &[[f64; 3]], duration: f64) -> Result<Self, BezierError> {
        Self::new(3, points.iter().flatten().copied().collect(), duration)
    }

    pub fn order(&self) -> usize {
        self.points.len() / self.dim - 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    fn check_time(&self, t: f64) -> Result<f64, BezierError> {
        if t.is_nan() || t < -TIME_EPS || t > self.duration + TIME_EPS {
            return Err(BezierError::TimeOutOfRange {
                t,
                duration: self.duration,
            });
        }
        Ok((t / self.duration).clamp(0.0, 1.0))
    }

    /// Curve value at time `t`, written into `out` (length `dim`).
    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), BezierError> {
        let u = self.check_time(t)?;
        let n = self.order();
        out[..self.dim].fill(0.0);
        // Endpoints are returned verbatim so interpolation is exact.
        if u == 0.0 {
            out[..self.dim].copy_from_slice(self.point(0));
            return Ok(());
        }
        if u == 1.0 {
            out[..self.dim].copy_from_slice(self.point(n));
            return Ok(());
        }
        for (i, p) in self.points().enumerate() {
            let b = binomial(n, i) * u.powi(i as i32) * (1.0 - u).powi((n - i) as i32);
            for (o, c) in out.iter_mut().zip(p) {
                *o += b * c;
            }
        }
        Ok(())
    }

    /// Curve value at time `t`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>, BezierError> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    /// Derivative curve: order `n - 1`, points `(n / T) (P_{i+1} - P_i)`, same duration.
    ///
    /// The derivative of an order-0 (constant) polygon is the zero polygon of order 0.
    pub fn derivative(&self) -> ControlPolygon {
        let n = self.order();
        if n == 0 {
            return ControlPolygon {
                dim: self.dim,
                points: vec![0.0; self.dim],
                duration: self.duration,
            };
        }
        let scale = n as f64 / self.duration;
        let mut points = Vec::with_capacity(n * self.dim);
        for i in 0..n {
            let (a, b) = (self.point(i), self.point(i + 1));
            points.extend(a.iter().zip(b).map(|(a, b)| scale * (b - a)));
        }
        ControlPolygon {
            dim: self.dim,
            points,
            duration: self.duration,
        }
    }

    /// Closed-form cubic and its quadratic derivative at time `t`.
    pub fn eval_cubic_explicit(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>), BezierError> {
        if self.order() != 3 {
            return Err(BezierError::NotCubic(self.order()));
        }
        let s = self.check_time(t)?;
        let r = 1.0 - s;
        let inv_t = 1.0 / self.duration;
        let (p0, p1, p2, p3) = (self.point(0), self.point(1), self.point(2), self.point(3));
        let mut value = vec![0.0; self.dim];
        let mut velocity = vec![0.0; self.dim];
        for k in 0..self.dim {
            value[k] = r * r * r * p0[k]
                + 3.0 * r * r * s * p1[k]
                + 3.0 * r * s * s * p2[k]
                + s * s * s * p3[k];
            velocity[k] = 3.0 * inv_t * r * r * (p1[k] - p0[k])
                + 6.0 * inv_t * r * s * (p2[k] - p1[k])
                + 3.0 * inv_t * s * s * (p3[k] - p2[k]);
        }
        Ok((value, velocity))
    }
}
