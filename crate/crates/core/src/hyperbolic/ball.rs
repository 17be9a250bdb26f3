//! Poincaré ball of curvature `-c`: the open ball of radius `1/sqrt(c)`.

use crate::error::{Error, Result};

/// Points are kept at `sqrt(c) * |x| <= 1 - BALL_EPS`.
pub const BALL_EPS: f64 = 1e-5;
/// Upper clamp for `atanh` arguments.
pub const ATANH_CLAMP: f64 = 1.0 - 1e-7;

/// A point strictly inside the Poincaré ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPoint {
    coords: Vec<f64>,
    c: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Rescales `x` in place so that `sqrt(c) * |x| <= 1 - BALL_EPS`.
pub(crate) fn clip_to_ball(x: &mut [f64], c: f64) {
    let max_norm = (1.0 - BALL_EPS) / c.sqrt();
    let n = norm(x);
    if n > max_norm {
        let s = max_norm / n;
        x.iter_mut().for_each(|v| *v *= s);
    }
}

fn check_curvature(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("curvature must be positive, got {c}")))
    }
}

impl BallPoint {
    /// Wraps `coords`, clipping into the ball.
    pub fn new(mut coords: Vec<f64>, c: f64) -> Result<Self> {
        check_curvature(c)?;
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite ball coordinate".into()));
        }
        clip_to_ball(&mut coords, c);
        Ok(Self { coords, c })
    }

    pub fn origin(dim: usize, c: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], c)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn curvature(&self) -> f64 {
        self.c
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coords)
    }

    pub fn neg(&self) -> Self {
        Self { coords: self.coords.iter().map(|v| -v).collect(), c: self.c }
    }
}

fn same_space(x: &BallPoint, y: &BallPoint) -> Result<()> {
    if x.c != y.c {
        return Err(Error::Config(format!("curvature mismatch: {} vs {}", x.c, y.c)));
    }
    if x.dim() != y.dim() {
        return Err(Error::dim(x.dim(), y.dim()));
    }
    Ok(())
}

fn mobius_add_raw(x: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let xy = dot(x, y);
    let x2 = dot(x, x);
    let y2 = dot(y, y);
    let a = 1.0 + 2.0 * c * xy + c * y2;
    let b = 1.0 - c * x2;
    let den = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
    x.iter().zip(y).map(|(xi, yi)| (a * xi + b * yi) / den).collect()
}

/// Möbius addition `x (+)_c y`.
pub fn mobius_add(x: &BallPoint, y: &BallPoint) -> Result<BallPoint> {
    same_space(x, y)?;
    let mut out = mobius_add_raw(&x.coords, &y.coords, x.c);
    clip_to_ball(&mut out, x.c);
    Ok(BallPoint { coords: out, c: x.c })
}

/// Exponential map at the origin: `tanh(sqrt(c)|v|) v / (sqrt(c)|v|)`.
pub fn exp_map0(v: &[f64], c: f64) -> Result<BallPoint> {
    check_curvature(c)?;
    let n = norm(v);
    if n == 0.0 {
        return BallPoint::origin(v.len(), c);
    }
    let sc = c.sqrt() * n;
    let scale = sc.tanh() / sc;
    BallPoint::new(v.iter().map(|x| x * scale).collect(), c)
}

/// Logarithmic map at the origin, inverse of [`exp_map0`].
pub fn log_map0(x: &BallPoint) -> Vec<f64> {
    let n = x.norm();
    if n == 0.0 {
        return vec![0.0; x.dim()];
    }
    let sc = x.c.sqrt() * n;
    let scale = sc.min(ATANH_CLAMP).atanh() / sc;
    x.coords.iter().map(|v| v * scale).collect()
}

/// Geodesic distance `(2/sqrt(c)) atanh(sqrt(c) |(-x) (+)_c y|)`.
pub fn poincare_distance(x: &BallPoint, y: &BallPoint) -> Result<f64> {
    same_space(x, y)?;
    Ok(distance_unchecked(&x.coords, &y.coords, x.c))
}

pub(crate) fn distance_unchecked(x: &[f64], y: &[f64], c: f64) -> f64 {
    let neg_x: Vec<f64> = x.iter().map(|v| -v).collect();
    let diff = mobius_add_raw(&neg_x, y, c);
    let sc = c.sqrt();
    2.0 / sc * (sc * norm(&diff)).min(ATANH_CLAMP).atanh()
}
