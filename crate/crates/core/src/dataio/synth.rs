use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{EmbeddingDataset, EmbeddingRecord, Split};
use crate::error::{Error, Result};

/// Gaussian clusters centred on scaled standard basis vectors.
///
/// Class `c` has centre `mean_scale * e_c`, so any two centres are
/// `mean_scale * sqrt(2)` apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_classes: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    pub mean_scale: f64,
    pub noise_std: f64,
    pub split_fractions: (f64, f64, f64),
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_classes: 4,
            dim: 8,
            samples_per_class: 100,
            mean_scale: 10.0,
            noise_std: 0.5,
            split_fractions: (0.6, 0.2, 0.2),
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes == 0 || self.dim == 0 || self.samples_per_class == 0 {
            return Err(Error::Config("n_classes, dim and samples_per_class must be positive".into()));
        }
        if self.n_classes > self.dim {
            return Err(Error::Config(format!(
                "{} classes cannot be placed on distinct basis vectors of R^{}",
                self.n_classes, self.dim
            )));
        }
        if !(self.mean_scale > 0.0) || !(self.noise_std >= 0.0) {
            return Err(Error::Config("mean_scale must be > 0 and noise_std >= 0".into()));
        }
        let (a, b, c) = self.split_fractions;
        if a < 0.0 || b < 0.0 || c < 0.0 || ((a + b + c) - 1.0).abs() > 1e-9 {
            return Err(Error::Config("split fractions must be non-negative and sum to 1".into()));
        }
        Ok(())
    }

    /// Per-class (train, val, test) counts by largest-remainder rounding;
    /// ties in the fractional part go to the earlier split.
    pub fn split_counts(&self) -> [usize; 3] {
        let n = self.samples_per_class as f64;
        let fr = [self.split_fractions.0, self.split_fractions.1, self.split_fractions.2];
        let exact = fr.map(|f| f * n);
        let mut counts = exact.map(|x| x.floor() as usize);
        let assigned: usize = counts.iter().sum();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| {
            let (ri, rj) = (exact[i] - exact[i].floor(), exact[j] - exact[j].floor());
            rj.partial_cmp(&ri).unwrap().then(i.cmp(&j))
        });
        for &i in order.iter().take(self.samples_per_class.saturating_sub(assigned)) {
            counts[i] += 1;
        }
        counts
    }
}

/// Draws the dataset described by `spec`. Records are grouped by class;
/// within a class the first samples are train, then val, then test.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<EmbeddingDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::Config(e.to_string()))?;
    let [n_train, n_val, _] = spec.split_counts();

    let mut records = Vec::with_capacity(spec.n_classes * spec.samples_per_class);
    let mut next_id = 0u64;
    for class in 0..spec.n_classes {
        for i in 0..spec.samples_per_class {
            let split = if i < n_train {
                Split::Train
            } else if i < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
            let embedding = (0..spec.dim)
                .map(|j| {
                    let center = if j == class { spec.mean_scale } else { 0.0 };
                    (center + noise.sample(&mut rng)) as f32
                })
                .collect();
            records.push(EmbeddingRecord { sample_id: next_id, embedding, label: class, split });
            next_id += 1;
        }
    }
    let names = (0..spec.n_classes).map(|c| format!("class_{c}")).collect();
    EmbeddingDataset::new(spec.dim, names, records)
}
