//! Balanced accuracy, the task-wise accuracy matrix and forgetting.

mod matrix;

use std::collections::BTreeMap;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataio::{DatasetView, EmbeddingDataset, Split, TaskSchedule};
use crate::error::{Error, Result};

pub use matrix::{forgetting, forgetting_clamped, AccuracyMatrix};

/// Mean per-class recall over the classes present in `labels`.
pub fn balanced_accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    check_lengths(preds, labels)?;
    let mut per_class: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (&p, &y) in preds.iter().zip(labels) {
        let e = per_class.entry(y).or_default();
        e.1 += 1;
        if p == y {
            e.0 += 1;
        }
    }
    let sum: f64 = per_class.values().map(|&(hit, n)| hit as f64 / n as f64).sum();
    Ok(sum / per_class.len() as f64)
}

/// Fraction of exact matches.
pub fn plain_accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    check_lengths(preds, labels)?;
    let hits = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / labels.len() as f64)
}

fn check_lengths(preds: &[usize], labels: &[usize]) -> Result<()> {
    if preds.len() != labels.len() {
        return Err(Error::Argument(format!("{} predictions for {} labels", preds.len(), labels.len())));
    }
    if labels.is_empty() {
        return Err(Error::Argument("no samples to score".into()));
    }
    Ok(())
}

/// Which accuracy fills the cells of the accuracy matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccuracyMetric {
    #[default]
    Balanced,
    Plain,
}

impl AccuracyMetric {
    pub fn score(self, preds: &[usize], labels: &[usize]) -> Result<f64> {
        match self {
            AccuracyMetric::Balanced => balanced_accuracy(preds, labels),
            AccuracyMetric::Plain => plain_accuracy(preds, labels),
        }
    }
}

impl FromStr for AccuracyMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(AccuracyMetric::Balanced),
            "plain" => Ok(AccuracyMetric::Plain),
            other => Err(Error::Config(format!("unknown accuracy metric '{other}'"))),
        }
    }
}

/// A trained model that labels embeddings with global class indices.
pub trait Predictor {
    /// Every class the predictor can output.
    fn candidate_classes(&self) -> Vec<usize>;

    /// Predicts each column of a `d x N` matrix.
    fn predict_batch(&self, inputs: &DMatrix<f64>) -> Result<Vec<usize>>;
}

/// Per-sample record of one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionLog {
    pub sample_id: u64,
    pub label: usize,
    pub prediction: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskEvaluation {
    pub accuracy: f64,
    pub log: Vec<PredictionLog>,
}

/// Scores `predictor` on task `i`'s test split after training through
/// task `k`. The predictor must choose among exactly the classes of
/// tasks `1..=k`.
pub fn evaluate_task(
    predictor: &dyn Predictor,
    dataset: &EmbeddingDataset,
    schedule: &TaskSchedule,
    i: usize,
    k: usize,
    metric: AccuracyMetric,
) -> Result<TaskEvaluation> {
    if i > k {
        return Err(Error::Protocol(format!("cannot score task {i} after training only through task {k}")));
    }
    let mut seen = schedule.seen_through(k)?;
    seen.sort_unstable();
    let mut candidates = predictor.candidate_classes();
    candidates.sort_unstable();
    if candidates != seen {
        return Err(Error::Protocol(format!(
            "predictor covers classes {candidates:?} but tasks 1..={k} cover {seen:?}"
        )));
    }
    let view = dataset.select_task(schedule, i, Split::Test)?;
    if view.is_empty() {
        return Err(Error::Data(format!("task {i} has no test samples")));
    }
    score_view(predictor, &view, metric)
}

/// Predicts every record of `view` and scores the predictions.
pub fn score_view(predictor: &dyn Predictor, view: &DatasetView<'_>, metric: AccuracyMetric) -> Result<TaskEvaluation> {
    let inputs = DMatrix::from_iterator(
        view.dim(),
        view.len(),
        view.iter().flat_map(|r| r.embedding.iter().map(|&x| f64::from(x))),
    );
    let preds = predictor.predict_batch(&inputs)?;
    let labels: Vec<usize> = view.iter().map(|r| r.label).collect();
    let accuracy = metric.score(&preds, &labels)?;
    let log = view
        .iter()
        .zip(&preds)
        .map(|(r, &p)| PredictionLog { sample_id: r.sample_id, label: r.label, prediction: p })
        .collect();
    Ok(TaskEvaluation { accuracy, log })
}
