//! Replay-free class-incremental learning on frozen embedding vectors.
//!
//! Each task introduces a disjoint set of classes. Learners see only the
//! current task's data and must classify across every class seen so far.
//! Two learner families are provided: per-task MLP heads whose softmax
//! outputs are concatenated, and nearest-prototype classifiers in a choice
//! of feature spaces.

pub mod dataio;
pub mod error;
pub mod hyperbolic;
pub mod metrics;
pub mod mlp;
pub mod projections;
pub mod prototypes;
pub mod runner;

pub use error::{Error, Result};
