use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::method::Method;
use crate::dataio::{make_task_schedule, DataFormat, ScheduleOrder, TaskSchedule};
use crate::error::{Error, Result};
use crate::hyperbolic::HypTrainConfig;
use crate::metrics::AccuracyMetric;
use crate::mlp::TrainConfig;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderKind {
    #[default]
    Contiguous,
    Shuffled,
}

/// Either a task count with a class order, or explicit per-task classes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub tasks: Option<usize>,
    pub order: OrderKind,
    pub shuffle_seed: u64,
    pub classes: Option<Vec<Vec<usize>>>,
}

impl ScheduleConfig {
    pub fn contiguous(tasks: usize) -> Self {
        Self { tasks: Some(tasks), ..Self::default() }
    }

    pub fn build(&self, num_classes: usize) -> Result<TaskSchedule> {
        match (&self.classes, self.tasks) {
            (Some(classes), None) => TaskSchedule::new(classes.clone(), num_classes),
            (None, Some(t)) => {
                let order = match self.order {
                    OrderKind::Contiguous => ScheduleOrder::Contiguous,
                    OrderKind::Shuffled => ScheduleOrder::Shuffled(self.shuffle_seed),
                };
                make_task_schedule(num_classes, t, order)
            }
            (Some(_), Some(_)) => Err(Error::Config("schedule sets both 'tasks' and 'classes'".into())),
            (None, None) => Err(Error::Config("schedule needs 'tasks' or 'classes'".into())),
        }
    }
}

/// One method name or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MethodList {
    One(Method),
    Many(Vec<Method>),
}

impl MethodList {
    pub fn to_vec(&self) -> Vec<Method> {
        match self {
            MethodList::One(m) => vec![*m],
            MethodList::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RpParams {
    pub dim: usize,
    pub relu: bool,
}

impl Default for RpParams {
    fn default() -> Self {
        Self { dim: 4096, relu: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaParams {
    /// Defaults to `min(d, 256)`.
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaParams {
    /// Defaults to `1e-4 * trace(S_W) / d`.
    pub ridge: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HypParams {
    pub ball_dim: usize,
    pub curvature: f64,
    pub temperature: f64,
    pub train: HypTrainConfig,
}

impl Default for HypParams {
    fn default() -> Self {
        Self { ball_dim: 128, curvature: 1.0, temperature: 0.1, train: HypTrainConfig::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariantParams {
    pub rp: RpParams,
    pub pca: PcaParams,
    pub lda: LdaParams,
    pub hyp: HypParams,
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

/// Full description of an experiment. The JSON config file uses exactly
/// these field names.
///
/// Seed fields inside `train` and `variants.hyp.train` are overridden per
/// run with seeds derived from `seeds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset_path: PathBuf,
    #[serde(default)]
    pub dataset_format: Option<DataFormat>,
    pub schedule: ScheduleConfig,
    pub method: MethodList,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub variants: VariantParams,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub accuracy_metric: AccuracyMetric,
    #[serde(default)]
    pub dump_predictions: bool,
}

impl ExperimentConfig {
    pub fn new(dataset_path: impl Into<PathBuf>, schedule: ScheduleConfig, methods: Vec<Method>) -> Self {
        Self {
            dataset_path: dataset_path.into(),
            dataset_format: None,
            schedule,
            method: MethodList::Many(methods),
            train: TrainConfig::default(),
            variants: VariantParams::default(),
            seeds: default_seeds(),
            accuracy_metric: AccuracyMetric::default(),
            dump_predictions: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn methods(&self) -> Vec<Method> {
        self.method.to_vec()
    }

    pub fn format(&self) -> DataFormat {
        self.dataset_format.unwrap_or_else(|| DataFormat::from_path(&self.dataset_path))
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods().is_empty() {
            return Err(Error::Config("no method given".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::Config("seed list has duplicates".into()));
        }
        if self.schedule.tasks == Some(0) {
            return Err(Error::Config("schedule needs at least one task".into()));
        }
        self.train.validate()?;
        let v = &self.variants;
        if v.rp.dim == 0 || v.hyp.ball_dim == 0 || v.pca.k == Some(0) {
            return Err(Error::Config("projection dimensions must be >= 1".into()));
        }
        if !(v.hyp.curvature > 0.0) || !(v.hyp.temperature > 0.0) {
            return Err(Error::Config("hyperbolic curvature and temperature must be positive".into()));
        }
        if matches!(v.lda.ridge, Some(r) if !(r >= 0.0)) {
            return Err(Error::Config("LDA ridge must be >= 0".into()));
        }
        Ok(())
    }

    /// SHA-256 (hex) of the config's canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config always serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
