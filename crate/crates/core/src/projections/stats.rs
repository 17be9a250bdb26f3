use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Per-class count and coordinate sum.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub count: u64,
    pub sum: DVector<f64>,
}

impl ClassStats {
    pub fn mean(&self) -> DVector<f64> {
        &self.sum / self.count as f64
    }
}

/// Additive first and second moments of everything seen so far.
///
/// Only aggregates are kept, so PCA and LDA can be refit after each task
/// without retaining any sample.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamStats {
    dim: usize,
    n: u64,
    sum: DVector<f64>,
    outer_sum: DMatrix<f64>,
    per_class: BTreeMap<usize, ClassStats>,
}

impl StreamStats {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            n: 0,
            sum: DVector::zeros(dim),
            outer_sum: DMatrix::zeros(dim, dim),
            per_class: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn sum(&self) -> &DVector<f64> {
        &self.sum
    }

    pub fn outer_sum(&self) -> &DMatrix<f64> {
        &self.outer_sum
    }

    pub fn per_class(&self) -> &BTreeMap<usize, ClassStats> {
        &self.per_class
    }

    pub fn class_mean(&self, class: usize) -> Option<DVector<f64>> {
        self.per_class.get(&class).map(ClassStats::mean)
    }

    pub fn mean(&self) -> Result<DVector<f64>> {
        if self.n == 0 {
            return Err(Error::Data("no samples accumulated".into()));
        }
        Ok(&self.sum / self.n as f64)
    }

    /// Population covariance `outer_sum / n - mean mean^T`.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        let mean = self.mean()?;
        let mut cov = &self.outer_sum / self.n as f64 - &mean * mean.transpose();
        // exact symmetry for the eigen-solvers
        cov = (&cov + cov.transpose()) * 0.5;
        Ok(cov)
    }

    /// Accumulates `d x B` column samples with their labels.
    pub fn update(&mut self, samples: &DMatrix<f64>, labels: &[usize]) -> Result<()> {
        if samples.nrows() != self.dim {
            return Err(Error::dim(self.dim, samples.nrows()));
        }
        if samples.ncols() != labels.len() {
            return Err(Error::Argument(format!(
                "{} samples but {} labels",
                samples.ncols(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Ok(());
        }
        self.n += labels.len() as u64;
        self.sum += samples.column_sum();
        self.outer_sum.gemm(1.0, samples, &samples.transpose(), 1.0);
        for (col, &label) in samples.column_iter().zip(labels) {
            let entry = self
                .per_class
                .entry(label)
                .or_insert_with(|| ClassStats { count: 0, sum: DVector::zeros(self.dim) });
            entry.count += 1;
            entry.sum += col;
        }
        Ok(())
    }

    /// Accumulates a single labeled sample.
    pub fn push(&mut self, x: &[f64], label: usize) -> Result<()> {
        self.update(&DMatrix::from_column_slice(x.len(), 1, x), &[label])
    }

    /// Merges another accumulator.
    pub fn merge(&mut self, other: &StreamStats) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::dim(self.dim, other.dim));
        }
        self.n += other.n;
        self.sum += &other.sum;
        self.outer_sum += &other.outer_sum;
        for (&c, cs) in &other.per_class {
            let entry = self
                .per_class
                .entry(c)
                .or_insert_with(|| ClassStats { count: 0, sum: DVector::zeros(self.dim) });
            entry.count += cs.count;
            entry.sum += &cs.sum;
        }
        Ok(())
    }

    /// SHA-256 over the per-class aggregates of `classes`.
    pub fn class_digest(&self, classes: &[usize]) -> [u8; 32] {
        let mut h = Sha256::new();
        for c in classes {
            h.update((*c as u64).to_le_bytes());
            if let Some(cs) = self.per_class.get(c) {
                h.update(cs.count.to_le_bytes());
                for v in cs.sum.iter() {
                    h.update(v.to_bits().to_le_bytes());
                }
            }
        }
        h.finalize().into()
    }
}

/// Adds a batch to `stats`; see [`StreamStats::update`].
pub fn update_stats(stats: &mut StreamStats, samples: &DMatrix<f64>, labels: &[usize]) -> Result<()> {
    stats.update(samples, labels)
}
