use crate::error::{Error, Result};

/// Scales `z` to unit Euclidean norm.
pub fn l2_normalize(z: &[f64]) -> Result<Vec<f64>> {
    let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Degenerate(format!("cannot normalize a vector of norm {norm}")));
    }
    Ok(z.iter().map(|x| x / norm).collect())
}
