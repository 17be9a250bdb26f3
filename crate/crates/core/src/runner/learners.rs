use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::access::TaskData;
use super::config::VariantParams;
use super::method::NmcVariant;
use crate::dataio::{DatasetView, Split};
use crate::error::{Error, Result};
use crate::hyperbolic::{train_hyp_projection, HypHistory, HypProjParams};
use crate::metrics::Predictor;
use crate::mlp::{predict_global_batch, train_head, MlpHead, TrainConfig, TrainHistory};
use crate::projections::{l2_normalize, lda_fit, pca_fit, RandomProj, StreamStats};
use crate::prototypes::{fit_prototypes, FeatureTransform, PrototypeBank, PrototypeEntry};

/// Per-run seed for one purpose (`stream`), so that adding a stream never
/// shifts the others.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const RP_STREAM: u64 = 0x5250_0000;
const HYP_INIT_STREAM: u64 = 0x4859_0000;
const HYP_TRAIN_STREAM: u64 = 0x4859_0001;

/// Seed for the MLP head of task `t`.
pub fn head_seed(seed: u64, t: usize) -> u64 {
    derive_seed(seed, t as u64)
}

/// What fitting one task produced besides the model itself.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskHistory {
    pub task: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mlp: Option<TrainHistory>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hyperbolic: Option<HypHistory>,
}

/// A model that learns one task at a time and predicts over every class
/// seen so far.
pub trait IncrementalLearner: Predictor + Send {
    /// Fits task `t`, reading data only through `data`.
    fn fit_task(&mut self, t: usize, data: &dyn TaskData) -> Result<TaskHistory>;

    /// Digest of the state owned by an already-fitted task `t`. It must not
    /// change once later tasks are fitted.
    fn task_digest(&self, t: usize) -> Option<[u8; 32]>;

    /// Predictor for task `task` alone when evaluation routes samples by
    /// task (the SINGLE reference); `None` for class-incremental learners.
    fn oracle_predictor(&self, _task: usize) -> Option<&dyn Predictor> {
        None
    }

    /// Serialized state as `(file extension, bytes)` pairs.
    fn checkpoint(&self) -> Vec<(String, Vec<u8>)> {
        Vec::new()
    }
}

fn to_f64(e: &[f32]) -> Vec<f64> {
    e.iter().map(|&x| f64::from(x)).collect()
}

fn hash_f64s<'a>(h: &mut Sha256, values: impl IntoIterator<Item = &'a f64>) {
    for v in values {
        h.update(v.to_bits().to_le_bytes());
    }
}

fn nonempty_train<'a>(data: &'a dyn TaskData, t: usize) -> Result<DatasetView<'a>> {
    let train = data.view(t, Split::Train)?;
    if train.is_empty() {
        return Err(Error::Data(format!("task {t} has no training samples")));
    }
    Ok(train)
}

fn sorted_classes(data: &dyn TaskData, t: usize) -> Result<Vec<usize>> {
    let mut c = data.task_classes(t)?;
    c.sort_unstable();
    Ok(c)
}

/// One MLP head per task; prediction is the argmax of the concatenated
/// head outputs.
pub struct MlpLearner {
    cfg: TrainConfig,
    seed: u64,
    heads: Vec<MlpHead>,
}

impl MlpLearner {
    pub fn new(cfg: TrainConfig, seed: u64) -> Self {
        Self { cfg, seed, heads: Vec::new() }
    }

    pub fn heads(&self) -> &[MlpHead] {
        &self.heads
    }
}

impl Predictor for MlpLearner {
    fn candidate_classes(&self) -> Vec<usize> {
        self.heads.iter().flat_map(|h| h.class_ids().iter().copied()).collect()
    }

    fn predict_batch(&self, inputs: &DMatrix<f64>) -> Result<Vec<usize>> {
        predict_global_batch(&self.heads, inputs)
    }
}

impl IncrementalLearner for MlpLearner {
    fn fit_task(&mut self, t: usize, data: &dyn TaskData) -> Result<TaskHistory> {
        if t != self.heads.len() + 1 {
            return Err(Error::Protocol(format!("expected task {}, got {t}", self.heads.len() + 1)));
        }
        let classes = sorted_classes(data, t)?;
        let train = nonempty_train(data, t)?;
        let val = data.view(t, Split::Val)?;
        let cfg = TrainConfig { seed: head_seed(self.seed, t), ..self.cfg.clone() };
        let (head, hist) = train_head(data.dim(), &classes, &train, &val, &cfg)?;
        self.heads.push(head);
        Ok(TaskHistory { task: t, mlp: Some(hist), hyperbolic: None })
    }

    fn task_digest(&self, t: usize) -> Option<[u8; 32]> {
        self.heads.get(t.checked_sub(1)?).map(MlpHead::digest)
    }

    fn checkpoint(&self) -> Vec<(String, Vec<u8>)> {
        vec![("mlph".into(), super::checkpoint::encode_heads(&self.heads))]
    }
}

/// Nearest-prototype classifier in one of the [`NmcVariant`] spaces.
///
/// Normalized, random-projection and hyperbolic spaces freeze their map at
/// task 1. PCA and LDA refit their map from accumulated class statistics at
/// every task and re-project all prototypes from stored class means.
pub struct NmcLearner {
    variant: NmcVariant,
    params: VariantParams,
    seed: u64,
    transform: Option<FeatureTransform>,
    bank: Option<PrototypeBank>,
    stats: Option<StreamStats>,
    task_classes: Vec<Vec<usize>>,
}

impl NmcLearner {
    pub fn new(variant: NmcVariant, params: VariantParams, seed: u64) -> Self {
        Self { variant, params, seed, transform: None, bank: None, stats: None, task_classes: Vec::new() }
    }

    pub fn bank(&self) -> Option<&PrototypeBank> {
        self.bank.as_ref()
    }

    pub fn transform(&self) -> Option<&FeatureTransform> {
        self.transform.as_ref()
    }

    pub fn stats(&self) -> Option<&StreamStats> {
        self.stats.as_ref()
    }

    fn refits(&self) -> bool {
        matches!(self.variant, NmcVariant::Pca | NmcVariant::PcaNorm | NmcVariant::Lda)
    }

    /// Builds the frozen map of non-refitting variants from task-1 data.
    fn frozen_transform(&self, train: &DatasetView<'_>, val: &DatasetView<'_>) -> Result<(FeatureTransform, Option<HypHistory>)> {
        let d = train.dim();
        let normalize = self.variant.normalizes();
        Ok(match self.variant {
            NmcVariant::Base | NmcVariant::Norm => (FeatureTransform::Identity { normalize }, None),
            NmcVariant::Rp | NmcVariant::RpNorm => {
                let rp = &self.params.rp;
                let proj = RandomProj::new(d, rp.dim, derive_seed(self.seed, RP_STREAM), rp.relu)?;
                (FeatureTransform::RandomProjection { proj, normalize }, None)
            }
            NmcVariant::Hyp | NmcVariant::HypNorm => {
                let hp = &self.params.hyp;
                let init = HypProjParams::init(
                    d,
                    hp.ball_dim,
                    hp.curvature,
                    hp.temperature,
                    normalize,
                    derive_seed(self.seed, HYP_INIT_STREAM),
                )?;
                let cfg = crate::hyperbolic::HypTrainConfig {
                    seed: derive_seed(self.seed, HYP_TRAIN_STREAM),
                    ..hp.train.clone()
                };
                let (params, hist) = train_hyp_projection(init, train, val, &cfg)?;
                (FeatureTransform::Hyperbolic(params), Some(hist))
            }
            NmcVariant::Pca | NmcVariant::PcaNorm | NmcVariant::Lda => unreachable!("refitting variant"),
        })
    }

    /// Adds task data to the statistics and refits the PCA/LDA map.
    fn refit(&mut self, train: &DatasetView<'_>) -> Result<FeatureTransform> {
        let d = train.dim();
        let normalize = self.variant.normalizes();
        let mut cols = Vec::with_capacity(train.len() * d);
        let mut labels = Vec::with_capacity(train.len());
        for r in train.iter() {
            let z = to_f64(&r.embedding);
            cols.extend(if normalize { l2_normalize(&z)? } else { z });
            labels.push(r.label);
        }
        let stats = self.stats.get_or_insert_with(|| StreamStats::new(d));
        stats.update(&DMatrix::from_vec(d, labels.len(), cols), &labels)?;
        Ok(match self.variant {
            NmcVariant::Pca | NmcVariant::PcaNorm => {
                let k = self.params.pca.k.unwrap_or(d.min(256));
                FeatureTransform::Pca { model: pca_fit(stats, k)?, normalize }
            }
            NmcVariant::Lda => FeatureTransform::Lda { model: lda_fit(stats, self.params.lda.ridge)?, normalize },
            _ => unreachable!("frozen variant"),
        })
    }
}

impl Predictor for NmcLearner {
    fn candidate_classes(&self) -> Vec<usize> {
        self.bank.as_ref().map(PrototypeBank::classes).unwrap_or_default()
    }

    fn predict_batch(&self, inputs: &DMatrix<f64>) -> Result<Vec<usize>> {
        let (Some(bank), Some(transform)) = (&self.bank, &self.transform) else {
            return Err(Error::State("prototype classifier has not been fitted".into()));
        };
        inputs
            .column_iter()
            .map(|col| {
                let feature = transform.apply(col.as_slice())?;
                bank.nearest(transform, &feature)
            })
            .collect()
    }
}

impl IncrementalLearner for NmcLearner {
    fn fit_task(&mut self, t: usize, data: &dyn TaskData) -> Result<TaskHistory> {
        if t != self.task_classes.len() + 1 {
            return Err(Error::Protocol(format!("expected task {}, got {t}", self.task_classes.len() + 1)));
        }
        let classes = sorted_classes(data, t)?;
        let train = nonempty_train(data, t)?;
        let mut history = TaskHistory { task: t, ..TaskHistory::default() };

        let transform = if self.refits() {
            self.refit(&train)?
        } else if let Some(tr) = &self.transform {
            tr.clone()
        } else {
            let val = data.view(t, Split::Val)?;
            let (tr, hyp) = self.frozen_transform(&train, &val)?;
            history.hyperbolic = hyp;
            tr
        };

        let set = fit_prototypes(&train, &transform)?;
        let mut bank = self.bank.clone().unwrap_or_else(|| PrototypeBank::new(transform.space_id()));
        match self.stats.as_ref().filter(|_| self.refits()) {
            Some(stats) => {
                // the map's output dimension can change (LDA grows with the
                // class count), so bring stored prototypes into the new
                // space before adding, then project every class the same way
                let project = |e: &PrototypeEntry| transform.apply_prepared(reproject_mean(stats, e.class)?.as_slice());
                bank.reproject(project)?;
                bank.add_task(set)?;
                bank.reproject(project)?;
            }
            None => bank.add_task(set)?,
        }
        self.bank = Some(bank);
        self.transform = Some(transform);
        self.task_classes.push(classes);
        Ok(history)
    }

    fn task_digest(&self, t: usize) -> Option<[u8; 32]> {
        let classes = self.task_classes.get(t.checked_sub(1)?)?;
        let bank = self.bank.as_ref()?;
        let mut h = Sha256::new();
        if self.refits() {
            // the shared map is refit by design; the frozen part is the
            // per-class aggregates it is refit from
            h.update(bank.aggregate_digest(classes));
            h.update(self.stats.as_ref()?.class_digest(classes));
        } else {
            h.update(bank.digest(classes));
            if t == 1 {
                match self.transform.as_ref()? {
                    FeatureTransform::RandomProjection { proj, .. } => hash_f64s(&mut h, proj.weights().iter()),
                    FeatureTransform::Hyperbolic(p) => hash_f64s(&mut h, p.a.iter()),
                    _ => {}
                }
            }
        }
        Some(h.finalize().into())
    }

    fn checkpoint(&self) -> Vec<(String, Vec<u8>)> {
        use super::checkpoint as ck;
        let mut out = Vec::new();
        if let Some(bank) = &self.bank {
            out.push(("pbnk".into(), ck::encode_bank(bank)));
        }
        match &self.transform {
            Some(FeatureTransform::RandomProjection { proj, .. }) => out.push(("rprj".into(), ck::encode_random_projection(proj))),
            Some(FeatureTransform::Pca { model, .. }) => out.push(("pcam".into(), ck::encode_pca(model))),
            Some(FeatureTransform::Lda { model, .. }) => out.push(("ldam".into(), ck::encode_lda(model))),
            Some(FeatureTransform::Hyperbolic(p)) => out.push(("hypp".into(), ck::encode_hyperbolic(p))),
            _ => {}
        }
        out
    }
}

fn reproject_mean(stats: &StreamStats, class: usize) -> Result<DVector<f64>> {
    stats
        .class_mean(class)
        .ok_or_else(|| Error::State(format!("no statistics stored for class {class}")))
}
