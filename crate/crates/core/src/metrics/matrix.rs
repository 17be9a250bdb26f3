use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower-triangular `a[k][i]`: accuracy on task `i` after training through
/// task `k`, both 1-based. Serializes as a square nested array with `null`
/// for undefined or missing cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<Option<f64>>>", into = "Vec<Vec<Option<f64>>>")]
pub struct AccuracyMatrix {
    rows: Vec<Vec<Option<f64>>>,
}

impl AccuracyMatrix {
    pub fn new(num_tasks: usize) -> Self {
        Self { rows: (1..=num_tasks).map(|k| vec![None; k]).collect() }
    }

    /// Builds a matrix from rows `k = 1..=T`, each holding `a[k][1..=k]`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut m = Self::new(rows.len());
        for (k, row) in rows.iter().enumerate() {
            if row.len() != k + 1 {
                return Err(Error::Argument(format!("row {} must have {} entries", k + 1, k + 1)));
            }
            for (i, &v) in row.iter().enumerate() {
                m.set(k + 1, i + 1, v)?;
            }
        }
        Ok(m)
    }

    pub fn num_tasks(&self) -> usize {
        self.rows.len()
    }

    pub fn set(&mut self, k: usize, i: usize, value: f64) -> Result<()> {
        let t = self.num_tasks();
        if k == 0 || k > t {
            return Err(Error::Index { index: k, max: t });
        }
        if i == 0 {
            return Err(Error::Index { index: i, max: t });
        }
        if i > k {
            return Err(Error::Protocol(format!("a[{k}][{i}] is undefined: task {i} comes after task {k}")));
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Argument(format!("accuracy {value} outside [0, 1]")));
        }
        self.rows[k - 1][i - 1] = Some(value);
        Ok(())
    }

    /// `None` for undefined (`i > k`), out-of-range or unset cells.
    pub fn get(&self, k: usize, i: usize) -> Option<f64> {
        if k == 0 || i == 0 || i > k {
            return None;
        }
        self.rows.get(k - 1)?.get(i - 1).copied().flatten()
    }

    pub fn is_complete(&self) -> bool {
        self.rows.iter().flatten().all(Option::is_some)
    }

    /// `T x T` view with `None` above the diagonal.
    pub fn to_square(&self) -> Vec<Vec<Option<f64>>> {
        let t = self.num_tasks();
        self.rows
            .iter()
            .map(|row| {
                let mut r = row.clone();
                r.resize(t, None);
                r
            })
            .collect()
    }
}

impl From<AccuracyMatrix> for Vec<Vec<Option<f64>>> {
    fn from(m: AccuracyMatrix) -> Self {
        m.to_square()
    }
}

impl TryFrom<Vec<Vec<Option<f64>>>> for AccuracyMatrix {
    type Error = Error;

    fn try_from(square: Vec<Vec<Option<f64>>>) -> Result<Self> {
        let t = square.len();
        let mut m = Self::new(t);
        for (k, row) in square.into_iter().enumerate() {
            if row.len() != t {
                return Err(Error::Format(format!("accuracy matrix row {} has {} cells, expected {t}", k + 1, row.len())));
            }
            for (i, cell) in row.into_iter().enumerate() {
                match cell {
                    Some(v) if i > k => {
                        return Err(Error::Format(format!("a[{}][{}] = {v} lies above the diagonal", k + 1, i + 1)))
                    }
                    Some(v) => m.set(k + 1, i + 1, v)?,
                    None => {}
                }
            }
        }
        Ok(m)
    }
}

/// `F = 1/(T-1) * sum_{i<T} [max_{i<=k<T} a[k][i] - a[T][i]]`.
///
/// Signed: negative values mean later tasks improved earlier ones. `None`
/// when `T < 2` or a needed cell is missing.
pub fn forgetting(matrix: &AccuracyMatrix) -> Option<f64> {
    let t = matrix.num_tasks();
    if t < 2 {
        return None;
    }
    let mut total = 0.0;
    for i in 1..t {
        let mut best = f64::NEG_INFINITY;
        for k in i..t {
            best = best.max(matrix.get(k, i)?);
        }
        total += best - matrix.get(t, i)?;
    }
    Some(total / (t - 1) as f64)
}

/// [`forgetting`] clamped at zero, for display next to tables that only
/// report non-negative forgetting.
pub fn forgetting_clamped(matrix: &AccuracyMatrix) -> Option<f64> {
    forgetting(matrix).map(|f| f.max(0.0))
}
