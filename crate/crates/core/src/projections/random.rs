use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Frozen Gaussian random projection into `m` dimensions, entries
/// `N(0, 1/m)`, optionally followed by ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomProj {
    weights: DMatrix<f64>,
    seed: u64,
    relu: bool,
}

impl RandomProj {
    pub fn new(input_dim: usize, output_dim: usize, seed: u64, relu: bool) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::Config("random projection dimensions must be >= 1".into()));
        }
        let normal = Normal::new(0.0, (1.0 / output_dim as f64).sqrt()).expect("positive std");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // row-major draw order keeps W independent of the storage layout
        let weights = DMatrix::from_row_iterator(
            output_dim,
            input_dim,
            (0..output_dim * input_dim).map(|_| normal.sample(&mut rng)),
        );
        Ok(Self { weights, seed, relu })
    }

    /// Rebuilds a projection from stored weights (`m x d`).
    pub fn from_weights(weights: DMatrix<f64>, seed: u64, relu: bool) -> Self {
        Self { weights, seed, relu }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn relu(&self) -> bool {
        self.relu
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.input_dim() {
            return Err(Error::dim(self.input_dim(), z.len()));
        }
        let out = &self.weights * DVector::from_column_slice(z);
        Ok(if self.relu { out.iter().map(|x| x.max(0.0)).collect() } else { out.as_slice().to_vec() })
    }
}

/// Builds a seeded projection.
pub fn init_random_projection(input_dim: usize, output_dim: usize, seed: u64, relu: bool) -> Result<RandomProj> {
    RandomProj::new(input_dim, output_dim, seed, relu)
}

/// `max(0, Wz)` with ReLU, `Wz` without.
pub fn apply_random_projection(proj: &RandomProj, z: &[f64]) -> Result<Vec<f64>> {
    proj.apply(z)
}
