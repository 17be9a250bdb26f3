//! Experiment orchestration: config, the incremental task loop, the SINGLE
//! and JOINT references, result bundles, reports and checkpoints.

pub mod access;
pub mod checkpoint;
mod config;
mod experiment;
mod learners;
mod method;
mod report;

pub use access::{AccessEvent, AccessTracker, Phase, TaskData, TaskScope};
pub use config::{
    ExperimentConfig, HypParams, LdaParams, MethodList, OrderKind, PcaParams, RpParams, ScheduleConfig, VariantParams,
};
pub use experiment::{
    aggregate, make_learner, mean_and_std, run_experiment, run_experiment_on, run_joint, run_learner, run_method,
    AggregateRow, CellPredictions, JointRun, LearnerRun, MethodRun, Provenance, ResultsBundle, SeedRun, SingleLearner,
    BUNDLE_SCHEMA_VERSION, THREADS_ENV,
};
pub use learners::{derive_seed, head_seed, IncrementalLearner, MlpLearner, NmcLearner, TaskHistory};
pub use method::{Method, NmcVariant};
pub use report::{render_report, render_reports, ReportFormat};
