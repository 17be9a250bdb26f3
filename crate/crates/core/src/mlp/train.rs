use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::head::MlpHead;
use crate::dataio::DatasetView;
use crate::error::{Error, Result};

/// Optimizer and early-stopping settings for one head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub hidden_dims: (usize, usize),
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lr: 0.001, batch_size: 200, max_epochs: 200, patience: 20, hidden_dims: (256, 128), seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config("batch_size, max_epochs and patience must be >= 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.hidden_dims.0 == 0 || self.hidden_dims.1 == 0 {
            return Err(Error::Config("hidden sizes must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: Option<f64>,
    pub best_val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch (1-based) whose weights were returned.
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub warnings: Vec<String>,
}

/// Packs view embeddings into `d x N` columns and maps labels to positions
/// in `class_ids`.
pub(crate) fn pack(view: &DatasetView<'_>, class_ids: &[usize]) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let d = view.dim();
    let mut x = DMatrix::zeros(d, view.len());
    let mut y = Vec::with_capacity(view.len());
    for (j, rec) in view.iter().enumerate() {
        let local = class_ids
            .iter()
            .position(|&c| c == rec.label)
            .ok_or_else(|| Error::Data(format!("label {} not covered by this head", rec.label)))?;
        for (dst, &src) in x.column_mut(j).iter_mut().zip(&rec.embedding) {
            *dst = f64::from(src);
        }
        y.push(local);
    }
    Ok((x, y))
}

/// Index of the largest probability; ties go to the lowest class id.
pub(crate) fn argmax_by_class(probs: impl Iterator<Item = f64>, class_ids: &[usize]) -> usize {
    let mut best: Option<(f64, usize, usize)> = None;
    for (i, p) in probs.enumerate() {
        let c = class_ids[i];
        best = match best {
            Some((bp, bc, _)) if p < bp || (p == bp && c > bc) => best,
            _ => Some((p, c, i)),
        };
    }
    best.map(|(_, _, i)| i).unwrap_or(0)
}

fn accuracy(head: &MlpHead, x: &DMatrix<f64>, y: &[usize]) -> f64 {
    let probs = head.forward_batch(x).expect("packed with the head's input dimension");
    let correct = probs
        .column_iter()
        .zip(y)
        .filter(|(col, &label)| argmax_by_class(col.iter().copied(), head.class_ids()) == label)
        .count();
    correct as f64 / y.len() as f64
}

/// Trains a fresh head on `train`, early-stopping on plain validation
/// accuracy. Returns the weights of the best validation epoch.
pub fn train_head(
    dim: usize,
    class_ids: &[usize],
    train: &DatasetView<'_>,
    val: &DatasetView<'_>,
    cfg: &TrainConfig,
) -> Result<(MlpHead, TrainHistory)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Data("empty training view".into()));
    }
    if train.dim() != dim {
        return Err(Error::dim(dim, train.dim()));
    }
    let (x_train, y_train) = pack(train, class_ids)?;
    let (x_val, y_val) = pack(val, class_ids)?;

    let mut head = MlpHead::init(dim, cfg.hidden_dims, class_ids.to_vec(), cfg.seed)?;
    let mut adam = AdamState::new(head.params().len(), cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let mut history = TrainHistory::default();
    let early_stopping = !y_val.is_empty();
    if !early_stopping {
        history.warnings.push("validation view is empty; early stopping disabled".into());
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut since_improvement = 0;
    let mut order: Vec<usize> = (0..y_train.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let xb = x_train.select_columns(chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| y_train[i]).collect();
            let lg = head.loss_and_grad_matrix(&xb, &yb);
            loss_sum += lg.loss * chunk.len() as f64;
            adam_step(head.params_mut(), &lg.grads, &mut adam)?;
        }
        let train_loss = loss_sum / y_train.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Numerical(format!("training loss diverged at epoch {epoch}")));
        }

        if !early_stopping {
            history.epochs.push(EpochRecord { epoch, train_loss, val_accuracy: None, best_val_accuracy: None });
            history.best_epoch = epoch;
            continue;
        }
        let val_acc = accuracy(&head, &x_val, &y_val);
        if best.as_ref().is_none_or(|(b, _)| val_acc > *b) {
            best = Some((val_acc, head.params().to_vec()));
            history.best_epoch = epoch;
            since_improvement = 0;
        } else {
            since_improvement += 1;
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_accuracy: Some(val_acc),
            best_val_accuracy: best.as_ref().map(|(b, _)| *b),
        });
        if since_improvement >= cfg.patience {
            history.stopped_early = epoch < cfg.max_epochs;
            break;
        }
    }

    if let Some((_, params)) = best {
        head.params_mut().copy_from_slice(&params);
    }
    Ok((head, history))
}
