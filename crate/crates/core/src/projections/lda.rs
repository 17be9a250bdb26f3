use nalgebra::{Cholesky, DMatrix, DVector};

use super::pca::{fix_sign, sorted_eigen};
use super::stats::StreamStats;
use crate::error::{Error, Result};

/// Fisher discriminant directions fitted from streaming statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    pub mean: DVector<f64>,
    /// `r x d` with `r <= C - 1`.
    pub directions: DMatrix<f64>,
    pub ridge: f64,
}

/// Within- and between-class scatter matrices.
pub fn scatter_matrices(stats: &StreamStats) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let mean = stats.mean()?;
    let d = stats.dim();
    let mut within = stats.outer_sum().clone();
    let mut between = DMatrix::zeros(d, d);
    for cs in stats.per_class().values() {
        let mu = cs.mean();
        let n = cs.count as f64;
        within -= (&mu * mu.transpose()) * n;
        let diff = &mu - &mean;
        between += (&diff * diff.transpose()) * n;
    }
    within = (&within + within.transpose()) * 0.5;
    Ok((within, between))
}

/// Ridge used when none is configured: `1e-4 * trace(S_W) / d`, floored at
/// `1e-10` so zero-scatter data still factorizes.
pub fn default_ridge(within: &DMatrix<f64>) -> f64 {
    (1e-4 * within.trace() / within.nrows() as f64).max(1e-10)
}

/// Top eigenvectors of `(S_W + ridge I)^-1 S_B`, computed through the
/// Cholesky-whitened symmetric problem. Each direction `w` satisfies
/// `w^T (S_W + ridge I) w = 1`.
pub fn lda_fit(stats: &StreamStats, ridge: Option<f64>) -> Result<LdaModel> {
    let num_classes = stats.per_class().len();
    if num_classes < 2 {
        return Err(Error::Data(format!("LDA needs at least 2 classes, have {num_classes}")));
    }
    let d = stats.dim();
    let (within, between) = scatter_matrices(stats)?;
    let ridge = ridge.unwrap_or_else(|| default_ridge(&within));
    if ridge < 0.0 {
        return Err(Error::Config("LDA ridge must be >= 0".into()));
    }
    let regularized = &within + DMatrix::identity(d, d) * ridge;
    let chol = Cholesky::new(regularized).ok_or_else(|| {
        Error::Numerical(format!(
            "within-class scatter is singular with ridge {ridge:e}; use a positive ridge"
        ))
    })?;
    let l = chol.l();
    let l_inv_sb = l
        .solve_lower_triangular(&between)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let whitened = l
        .solve_lower_triangular(&l_inv_sb.transpose())
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let whitened = (&whitened + whitened.transpose()) * 0.5;

    let pairs = sorted_eigen(whitened);
    let top = pairs.first().map(|p| p.0).unwrap_or(0.0);
    if !(top > 0.0) {
        return Err(Error::Data("class means coincide; no discriminant direction".into()));
    }
    let rank = pairs.iter().filter(|(l, _)| *l > top * 1e-10).count();
    let r = rank.min(num_classes - 1);
    let lt = l.transpose();
    let mut directions = DMatrix::zeros(r, d);
    for (i, (_, u)) in pairs.into_iter().take(r).enumerate() {
        let w = lt
            .solve_upper_triangular(&u)
            .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
        directions.row_mut(i).copy_from(&fix_sign(w).transpose());
    }
    Ok(LdaModel { mean: stats.mean()?, directions, ridge })
}

impl LdaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.directions.nrows()
    }

    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.input_dim() {
            return Err(Error::dim(self.input_dim(), z.len()));
        }
        let centered = DVector::from_column_slice(z) - &self.mean;
        Ok((&self.directions * centered).as_slice().to_vec())
    }
}

pub fn lda_apply(model: &LdaModel, z: &[f64]) -> Result<Vec<f64>> {
    model.apply(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two classes with within-class scatter 2I each, means (0,0) and (1,0).
    fn two_class_stats() -> StreamStats {
        let mut s = StreamStats::new(2);
        for (c, mx) in [(0usize, 0.0), (1, 1.0)] {
            for (dx, dy) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
                s.push(&[mx + dx, dy], c).unwrap();
            }
        }
        s
    }

    #[test]
    fn two_class_direction_along_mean_difference() {
        let m = lda_fit(&two_class_stats(), None).unwrap();
        assert_eq!(m.output_dim(), 1);
        let w = m.directions.row(0);
        let cos = w[0].abs() / w.norm();
        assert!(cos >= 0.999, "cos = {cos}");
    }

    #[test]
    fn single_class_is_data_error() {
        let mut s = StreamStats::new(2);
        s.push(&[1.0, 0.0], 0).unwrap();
        s.push(&[0.0, 1.0], 0).unwrap();
        assert!(matches!(lda_fit(&s, None), Err(Error::Data(_))));
    }

    #[test]
    fn singular_scatter_without_ridge_is_numerical_error() {
        // all samples sit on their class means -> S_W = 0
        let mut s = StreamStats::new(3);
        s.push(&[1.0, 0.0, 0.0], 0).unwrap();
        s.push(&[0.0, 1.0, 0.0], 1).unwrap();
        assert!(matches!(lda_fit(&s, Some(0.0)), Err(Error::Numerical(_))));
        assert_eq!(lda_fit(&s, None).unwrap().output_dim(), 1);
    }

    #[test]
    fn at_most_c_minus_one_directions() {
        let mut s = StreamStats::new(4);
        for c in 0..3usize {
            for i in 0..10 {
                let mut x = vec![(i as f64 * 0.91).sin(), (i as f64 * 0.37).cos(), (i as f64).sin() * 0.5, 0.1 * i as f64];
                x[c] += 5.0;
                s.push(&x, c).unwrap();
            }
        }
        let m = lda_fit(&s, None).unwrap();
        assert!(m.output_dim() <= 2);
        assert_eq!(m.output_dim(), 2);
    }
}
