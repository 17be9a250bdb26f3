use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::access::{AccessTracker, TaskData, TaskScope};
use super::checkpoint::CHECKPOINT_VERSION;
use super::config::ExperimentConfig;
use super::learners::{head_seed, IncrementalLearner, MlpLearner, NmcLearner, TaskHistory};
use super::method::Method;
use crate::dataio::{load_dataset, DatasetView, EmbeddingDataset, Split, TaskSchedule, EMBD_VERSION};
use crate::error::{Error, Result};
use crate::metrics::{
    balanced_accuracy, evaluate_task, forgetting, forgetting_clamped, score_view, AccuracyMatrix, AccuracyMetric,
    PredictionLog, Predictor, TaskEvaluation,
};
use crate::mlp::{predict_global_batch, train_head, MlpHead, TrainConfig};

pub const BUNDLE_SCHEMA_VERSION: u32 = 1;

/// Env var capping the number of worker threads.
pub const THREADS_ENV: &str = "FROZENCIL_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub bundle_schema: u32,
    pub embd_version: u32,
    pub checkpoint_version: u32,
    pub engine_version: String,
}

/// Predictions behind one accuracy-matrix cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellPredictions {
    pub k: usize,
    pub i: usize,
    pub log: Vec<PredictionLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub method: String,
    pub seed: u64,
    /// Balanced accuracy over the union of every task's test split.
    pub baac: f64,
    /// `None` for single-task runs and the reference methods.
    pub forgetting: Option<f64>,
    pub forgetting_clamped: Option<f64>,
    pub accuracy_matrix: AccuracyMatrix,
    /// Earlier tasks' state was bit-identical after each later fit. `None`
    /// when the method has no incremental state.
    pub frozen_past_verified: Option<bool>,
    pub histories: Vec<TaskHistory>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub predictions: Option<Vec<CellPredictions>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: String,
    pub seeds: usize,
    pub baac_mean: f64,
    /// Sample standard deviation; `None` for a single seed.
    pub baac_std: Option<f64>,
    pub forgetting_mean: Option<f64>,
    pub forgetting_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsBundle {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub dataset: String,
    pub num_tasks: usize,
    pub accuracy_metric: AccuracyMetric,
    pub methods: Vec<String>,
    pub runs: Vec<SeedRun>,
    pub aggregate: Vec<AggregateRow>,
}

impl ResultsBundle {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle always serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let b: Self = serde_json::from_str(text)?;
        if b.schema_version != BUNDLE_SCHEMA_VERSION {
            return Err(Error::Format(format!("unsupported bundle schema {}", b.schema_version)));
        }
        Ok(b)
    }
}

/// Mean and sample standard deviation (`None` below two values).
pub fn mean_and_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

/// Per-method statistics over `runs`, methods in first-appearance order.
pub fn aggregate(runs: &[SeedRun]) -> Vec<AggregateRow> {
    let mut methods: Vec<&str> = Vec::new();
    for r in runs {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    methods
        .into_iter()
        .map(|m| {
            let rs: Vec<&SeedRun> = runs.iter().filter(|r| r.method == m).collect();
            let baac: Vec<f64> = rs.iter().map(|r| r.baac).collect();
            let (baac_mean, baac_std) = mean_and_std(&baac);
            let f: Option<Vec<f64>> = rs.iter().map(|r| r.forgetting).collect();
            let (forgetting_mean, forgetting_std) = match f {
                Some(f) if !f.is_empty() => {
                    let (m, s) = mean_and_std(&f);
                    (Some(m), s)
                }
                _ => (None, None),
            };
            AggregateRow { method: m.to_string(), seeds: rs.len(), baac_mean, baac_std, forgetting_mean, forgetting_std }
        })
        .collect()
}

/// Outcome of running one learner through every task.
#[derive(Debug, Clone)]
pub struct LearnerRun {
    pub matrix: AccuracyMatrix,
    pub histories: Vec<TaskHistory>,
    pub frozen_past_verified: bool,
    pub cells: Vec<CellPredictions>,
    /// Balanced accuracy over every test sample after the last task.
    pub final_baac: f64,
}

fn final_baac(last_row: &[&[PredictionLog]]) -> Result<f64> {
    let (preds, labels): (Vec<usize>, Vec<usize>) =
        last_row.iter().flat_map(|l| l.iter()).map(|p| (p.prediction, p.label)).unzip();
    balanced_accuracy(&preds, &labels)
}

/// SINGLE reference: the same per-task heads as [`MlpLearner`], but a task
/// oracle routes each test sample to its own task's head.
pub struct SingleLearner(MlpLearner);

impl SingleLearner {
    pub fn new(cfg: TrainConfig, seed: u64) -> Self {
        Self(MlpLearner::new(cfg, seed))
    }

    pub fn heads(&self) -> &[MlpHead] {
        self.0.heads()
    }
}

impl Predictor for MlpHead {
    fn candidate_classes(&self) -> Vec<usize> {
        self.class_ids().to_vec()
    }

    fn predict_batch(&self, inputs: &DMatrix<f64>) -> Result<Vec<usize>> {
        predict_global_batch(std::slice::from_ref(self), inputs)
    }
}

impl Predictor for SingleLearner {
    fn candidate_classes(&self) -> Vec<usize> {
        self.0.candidate_classes()
    }

    fn predict_batch(&self, _inputs: &DMatrix<f64>) -> Result<Vec<usize>> {
        Err(Error::Protocol("the task-oracle reference predicts only through a task's own head".into()))
    }
}

impl IncrementalLearner for SingleLearner {
    fn fit_task(&mut self, t: usize, data: &dyn TaskData) -> Result<TaskHistory> {
        self.0.fit_task(t, data)
    }

    fn task_digest(&self, t: usize) -> Option<[u8; 32]> {
        self.0.task_digest(t)
    }

    fn oracle_predictor(&self, task: usize) -> Option<&dyn Predictor> {
        self.heads().get(task.checked_sub(1)?).map(|h| h as &dyn Predictor)
    }

    fn checkpoint(&self) -> Vec<(String, Vec<u8>)> {
        self.0.checkpoint()
    }
}

/// Runs `learner` through every task of `schedule`, filling the accuracy
/// matrix after each task and checking that earlier tasks' state is left
/// untouched.
pub fn run_learner(
    learner: &mut dyn IncrementalLearner,
    dataset: &EmbeddingDataset,
    schedule: &TaskSchedule,
    metric: AccuracyMetric,
    tracker: Option<&AccessTracker>,
    run_label: &str,
) -> Result<LearnerRun> {
    let num_tasks = schedule.num_tasks();
    let mut matrix = AccuracyMatrix::new(num_tasks);
    let mut histories = Vec::with_capacity(num_tasks);
    let mut frozen = true;
    let mut cells = Vec::new();
    for t in 1..=num_tasks {
        let before: Vec<Option<[u8; 32]>> = (1..t).map(|s| learner.task_digest(s)).collect();
        let scope = TaskScope::fit(dataset, schedule, t).tracked(tracker, run_label);
        histories.push(learner.fit_task(t, &scope)?);
        let after: Vec<Option<[u8; 32]>> = (1..t).map(|s| learner.task_digest(s)).collect();
        frozen &= before == after && before.iter().all(Option::is_some);

        for i in 1..=t {
            let eval = evaluate_cell(learner, dataset, schedule, i, t, metric)?;
            matrix.set(t, i, eval.accuracy)?;
            cells.push(CellPredictions { k: t, i, log: eval.log });
        }
    }
    let last: Vec<&[PredictionLog]> = cells.iter().filter(|c| c.k == num_tasks).map(|c| c.log.as_slice()).collect();
    let final_baac = final_baac(&last)?;
    Ok(LearnerRun { matrix, histories, frozen_past_verified: frozen, cells, final_baac })
}

fn evaluate_cell(
    learner: &dyn IncrementalLearner,
    dataset: &EmbeddingDataset,
    schedule: &TaskSchedule,
    i: usize,
    k: usize,
    metric: AccuracyMetric,
) -> Result<TaskEvaluation> {
    match learner.oracle_predictor(i) {
        Some(p) => {
            let view = dataset.select_task(schedule, i, Split::Test)?;
            if view.is_empty() {
                return Err(Error::Data(format!("task {i} has no test samples")));
            }
            score_view(p, &view, metric)
        }
        None => evaluate_task(learner, dataset, schedule, i, k, metric),
    }
}

/// Output of the pooled reference.
pub struct JointRun {
    pub head: MlpHead,
    pub run: LearnerRun,
}

/// JOINT reference: one head over all classes trained on every task's
/// train and val data. Only the last row of the matrix is filled.
pub fn run_joint(
    dataset: &EmbeddingDataset,
    schedule: &TaskSchedule,
    cfg: &TrainConfig,
    seed: u64,
    metric: AccuracyMetric,
    tracker: Option<&AccessTracker>,
    run_label: &str,
) -> Result<JointRun> {
    let scope = TaskScope::joint(dataset, schedule).tracked(tracker, run_label);
    let num_tasks = schedule.num_tasks();
    let collect = |split| -> Result<DatasetView<'_>> {
        let views = (1..=num_tasks).map(|t| scope.view(t, split)).collect::<Result<Vec<_>>>()?;
        DatasetView::concat(&views)
    };
    let (train, val) = (collect(Split::Train)?, collect(Split::Val)?);
    if train.is_empty() {
        return Err(Error::Data("no training samples".into()));
    }
    let mut classes = schedule.all_classes();
    classes.sort_unstable();
    // the task-1 head seed, so a one-task JOINT run equals SINGLE
    let cfg = TrainConfig { seed: head_seed(seed, 1), ..cfg.clone() };
    let (head, hist) = train_head(dataset.dim(), &classes, &train, &val, &cfg)?;

    let mut matrix = AccuracyMatrix::new(num_tasks);
    let mut cells = Vec::new();
    for i in 1..=num_tasks {
        let eval = evaluate_task(&head, dataset, schedule, i, num_tasks, metric)?;
        matrix.set(num_tasks, i, eval.accuracy)?;
        cells.push(CellPredictions { k: num_tasks, i, log: eval.log });
    }
    let last: Vec<&[PredictionLog]> = cells.iter().map(|c| c.log.as_slice()).collect();
    let final_baac = final_baac(&last)?;
    let histories = vec![TaskHistory { task: num_tasks, mlp: Some(hist), hyperbolic: None }];
    Ok(JointRun { head, run: LearnerRun { matrix, histories, frozen_past_verified: true, cells, final_baac } })
}

/// Builds the learner for an incremental method.
pub fn make_learner(method: Method, config: &ExperimentConfig, seed: u64) -> Result<Box<dyn IncrementalLearner>> {
    Ok(match method {
        Method::Mlp => Box::new(MlpLearner::new(config.train.clone(), seed)),
        Method::Nmc(v) => Box::new(NmcLearner::new(v, config.variants.clone(), seed)),
        Method::Single => Box::new(SingleLearner::new(config.train.clone(), seed)),
        Method::Joint => return Err(Error::Config("joint is not an incremental learner".into())),
    })
}

/// Everything produced by one (method, seed) pair.
pub struct MethodRun {
    pub record: SeedRun,
    /// Serialized final state as `(file extension, bytes)`.
    pub checkpoint: Vec<(String, Vec<u8>)>,
}

/// Runs one method with one seed.
pub fn run_method(
    method: Method,
    config: &ExperimentConfig,
    dataset: &EmbeddingDataset,
    schedule: &TaskSchedule,
    seed: u64,
    tracker: Option<&AccessTracker>,
) -> Result<MethodRun> {
    let label = format!("{method}@{seed}");
    let metric = config.accuracy_metric;
    let (run, incremental, checkpoint) = match method {
        Method::Joint => {
            let j = run_joint(dataset, schedule, &config.train, seed, metric, tracker, &label)?;
            let ck = vec![("mlph".to_string(), super::checkpoint::encode_heads(std::slice::from_ref(&j.head)))];
            (j.run, false, ck)
        }
        _ => {
            let mut learner = make_learner(method, config, seed)?;
            let run = run_learner(learner.as_mut(), dataset, schedule, metric, tracker, &label)?;
            (run, true, learner.checkpoint())
        }
    };
    let (f, fc) = if method.is_reference() {
        (None, None)
    } else {
        (forgetting(&run.matrix), forgetting_clamped(&run.matrix))
    };
    let record = SeedRun {
        method: method.to_string(),
        seed,
        baac: run.final_baac,
        forgetting: f,
        forgetting_clamped: fc,
        accuracy_matrix: run.matrix,
        frozen_past_verified: incremental.then_some(run.frozen_past_verified),
        histories: run.histories,
        predictions: config.dump_predictions.then_some(run.cells),
    };
    Ok(MethodRun { record, checkpoint })
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Runs every (method, seed) pair on an already loaded dataset. Pairs run
/// in parallel; results are ordered by method (config order) then seed.
pub fn run_experiment_on(
    config: &ExperimentConfig,
    dataset: &EmbeddingDataset,
    tracker: Option<&AccessTracker>,
    checkpoint_dir: Option<&Path>,
) -> Result<ResultsBundle> {
    config.validate()?;
    let schedule = config.schedule.build(dataset.num_classes())?;
    let methods = config.methods();
    let mut seeds = config.seeds.clone();
    seeds.sort_unstable();
    let jobs: Vec<(Method, u64)> = methods.iter().flat_map(|&m| seeds.iter().map(move |&s| (m, s))).collect();

    let results = thread_pool()?.install(|| {
        jobs.par_iter()
            .map(|&(m, s)| run_method(m, config, dataset, &schedule, s, tracker))
            .collect::<Result<Vec<_>>>()
    })?;

    if let Some(dir) = checkpoint_dir {
        std::fs::create_dir_all(dir)?;
        for r in &results {
            for (ext, bytes) in &r.checkpoint {
                let name = format!("{}-seed{}.{ext}", r.record.method.replace(':', "-"), r.record.seed);
                std::fs::write(dir.join(name), bytes)?;
            }
        }
    }

    let runs: Vec<SeedRun> = results.into_iter().map(|r| r.record).collect();
    let dataset_name = config
        .dataset_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Ok(ResultsBundle {
        schema_version: BUNDLE_SCHEMA_VERSION,
        provenance: Provenance {
            config_sha256: config.hash(),
            bundle_schema: BUNDLE_SCHEMA_VERSION,
            embd_version: EMBD_VERSION,
            checkpoint_version: CHECKPOINT_VERSION,
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
        },
        dataset: dataset_name,
        num_tasks: schedule.num_tasks(),
        accuracy_metric: config.accuracy_metric,
        methods: methods.iter().map(Method::to_string).collect(),
        aggregate: aggregate(&runs),
        runs,
    })
}

/// Loads the configured dataset and runs the experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultsBundle> {
    let dataset = load_dataset(&config.dataset_path, config.format())?;
    run_experiment_on(config, &dataset, None, None)
}
