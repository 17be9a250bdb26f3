use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ball::{exp_map0, log_map0, BallPoint};
use crate::error::{Error, Result};
use crate::projections::l2_normalize;

/// Learnable linear map into the tangent space at the origin, followed by
/// the exponential map onto the ball.
#[derive(Debug, Clone, PartialEq)]
pub struct HypProjParams {
    /// `p x d`.
    pub a: DMatrix<f64>,
    pub curvature: f64,
    pub temperature: f64,
    /// l2-normalize embeddings before the linear map.
    pub normalize_input: bool,
}

impl HypProjParams {
    /// Entries of `A` drawn `N(0, 1/d)`.
    pub fn init(input_dim: usize, ball_dim: usize, curvature: f64, temperature: f64, normalize_input: bool, seed: u64) -> Result<Self> {
        if input_dim == 0 || ball_dim == 0 {
            return Err(Error::Config("hyperbolic projection dimensions must be >= 1".into()));
        }
        let normal = Normal::new(0.0, (1.0 / input_dim as f64).sqrt()).expect("positive std");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_row_iterator(ball_dim, input_dim, (0..ball_dim * input_dim).map(|_| normal.sample(&mut rng)));
        let p = Self { a, curvature, temperature, normalize_input };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.curvature > 0.0) || !(self.temperature > 0.0) {
            return Err(Error::Config("curvature and temperature must be positive".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn ball_dim(&self) -> usize {
        self.a.nrows()
    }

    /// Input as fed to the linear map (normalized when configured).
    pub(crate) fn prepare(&self, z: &[f64]) -> Result<DVector<f64>> {
        if z.len() != self.input_dim() {
            return Err(Error::dim(self.input_dim(), z.len()));
        }
        Ok(if self.normalize_input {
            DVector::from_vec(l2_normalize(z)?)
        } else {
            DVector::from_column_slice(z)
        })
    }
}

/// `exp_map0(A z, c)`, clipped into the ball.
pub fn hyp_project(params: &HypProjParams, z: &[f64]) -> Result<BallPoint> {
    let v = &params.a * params.prepare(z)?;
    exp_map0(v.as_slice(), params.curvature)
}

/// Tangent-space mean: `exp_map0(mean_i log_map0(x_i))`.
pub fn hyp_prototype(points: &[BallPoint]) -> Result<BallPoint> {
    let first = points.first().ok_or_else(|| Error::Argument("no points to average".into()))?;
    let c = first.curvature();
    let dim = first.dim();
    let mut acc = vec![0.0; dim];
    for p in points {
        if p.curvature() != c {
            return Err(Error::Config("points have different curvatures".into()));
        }
        if p.dim() != dim {
            return Err(Error::dim(dim, p.dim()));
        }
        for (a, v) in acc.iter_mut().zip(log_map0(p)) {
            *a += v;
        }
    }
    let n = points.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    exp_map0(&acc, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolic::BALL_EPS;

    #[test]
    fn zero_map_sends_everything_to_origin() {
        let mut p = HypProjParams::init(3, 2, 1.0, 0.1, false, 0).unwrap();
        p.a.fill(0.0);
        let x = hyp_project(&p, &[5.0, -1.0, 2.0]).unwrap();
        assert_eq!(x.coords(), &[0.0, 0.0]);
    }

    #[test]
    fn manual_composition() {
        let a = DMatrix::from_row_slice(2, 3, &[0.1, 0.0, -0.2, 0.3, 0.1, 0.0]);
        let p = HypProjParams { a, curvature: 1.0, temperature: 0.1, normalize_input: false };
        let z = [1.0, 2.0, 0.5];
        let v: [f64; 2] = [0.1 - 0.1, 0.3 + 0.2];
        let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
        let want = [v[0] * n.tanh() / n, v[1] * n.tanh() / n];
        let got = hyp_project(&p, &z).unwrap();
        for (g, w) in got.coords().iter().zip(want) {
            assert!((g - w).abs() < 1e-9);
        }
    }

    #[test]
    fn output_always_inside_clip_radius() {
        let mut p = HypProjParams::init(4, 3, 1.0, 0.1, false, 1).unwrap();
        p.a *= 1000.0;
        let x = hyp_project(&p, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(x.norm() <= 1.0 - BALL_EPS + 1e-15);
        assert!(matches!(hyp_project(&p, &[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn prototype_of_one_and_of_opposites() {
        let p = BallPoint::new(vec![0.2, -0.5], 1.0).unwrap();
        let one = hyp_prototype(std::slice::from_ref(&p)).unwrap();
        for (a, b) in one.coords().iter().zip(p.coords()) {
            assert!((a - b).abs() < 1e-12);
        }
        let mid = hyp_prototype(&[p.clone(), p.neg()]).unwrap();
        assert!(mid.norm() < 1e-15);
        assert!(matches!(hyp_prototype(&[]), Err(Error::Argument(_))));
    }
}
