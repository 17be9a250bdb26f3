use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::stats::StreamStats;
use crate::error::{Error, Result};

/// Top-`k` principal axes of the accumulated covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// `k x d`, orthonormal rows, eigenvalue-descending.
    pub components: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

/// Flips `v` so its largest-magnitude coordinate is positive.
pub(crate) fn fix_sign(mut v: DVector<f64>) -> DVector<f64> {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
    v
}

/// Eigenpairs of a symmetric matrix sorted by descending eigenvalue.
pub(crate) fn sorted_eigen(m: DMatrix<f64>) -> Vec<(f64, DVector<f64>)> {
    let eig = SymmetricEigen::new(m);
    let mut pairs: Vec<(f64, DVector<f64>)> = eig
        .eigenvalues
        .iter()
        .zip(eig.eigenvectors.column_iter())
        .map(|(&l, v)| (l, v.into_owned()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

pub fn pca_fit(stats: &StreamStats, k: usize) -> Result<PcaModel> {
    let d = stats.dim();
    if k == 0 || k > d {
        return Err(Error::Config(format!("PCA needs 1 <= k <= {d}, got {k}")));
    }
    if stats.count() < 2 {
        return Err(Error::Data(format!("PCA needs at least 2 samples, have {}", stats.count())));
    }
    let cov = stats.covariance()?;
    if cov.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite covariance".into()));
    }
    let pairs = sorted_eigen(cov);
    let mut components = DMatrix::zeros(k, d);
    let mut eigenvalues = Vec::with_capacity(k);
    for (i, (l, v)) in pairs.into_iter().take(k).enumerate() {
        components.row_mut(i).copy_from(&fix_sign(v).transpose());
        eigenvalues.push(l.max(0.0));
    }
    Ok(PcaModel { mean: stats.mean()?, components, eigenvalues })
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.input_dim() {
            return Err(Error::dim(self.input_dim(), z.len()));
        }
        let centered = DVector::from_column_slice(z) - &self.mean;
        Ok((&self.components * centered).as_slice().to_vec())
    }
}

pub fn pca_apply(model: &PcaModel, z: &[f64]) -> Result<Vec<f64>> {
    model.apply(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_two_data_concentrates_variance() {
        let mut s = StreamStats::new(5);
        let u = [1.0, 2.0, 0.0, -1.0, 0.5];
        let v = [0.0, 1.0, 1.0, 1.0, -2.0];
        for i in 0..50 {
            let (a, b) = ((i as f64 * 0.7).sin() * 3.0, (i as f64 * 1.9).cos());
            let x: Vec<f64> = (0..5).map(|j| a * u[j] + b * v[j]).collect();
            s.push(&x, 0).unwrap();
        }
        let m = pca_fit(&s, 5).unwrap();
        let total: f64 = m.eigenvalues.iter().sum();
        assert!((m.eigenvalues[0] + m.eigenvalues[1]) / total >= 0.999);
        assert!(m.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        let gram = &m.components * m.components.transpose();
        assert!((gram - DMatrix::identity(5, 5)).amax() < 1e-6);
    }

    #[test]
    fn errors() {
        let mut s = StreamStats::new(3);
        s.push(&[1.0, 2.0, 3.0], 0).unwrap();
        assert!(matches!(pca_fit(&s, 2), Err(Error::Data(_))));
        s.push(&[0.0, 2.0, 1.0], 0).unwrap();
        assert!(matches!(pca_fit(&s, 4), Err(Error::Config(_))));
        assert!(matches!(pca_fit(&s, 0), Err(Error::Config(_))));
        assert!(pca_fit(&s, 3).is_ok());
    }

    #[test]
    fn sign_fix_makes_largest_coordinate_positive() {
        let v = fix_sign(DVector::from_column_slice(&[0.1, -0.9, 0.3]));
        assert_eq!(v.as_slice(), &[-0.1, 0.9, -0.3]);
    }
}
