//! Per-task MLP heads: forward pass, backprop, Adam, early-stopped
//! training and concatenated-head global prediction.

mod adam;
mod global;
mod head;
mod train;

pub use adam::{adam_step, AdamState};
pub use global::{predict_global, predict_global_batch};
pub use head::{HeadShape, LossGrad, MlpHead};
pub use train::{train_head, EpochRecord, TrainConfig, TrainHistory};
