//! Gated access to task data during fitting.
//!
//! Learners never touch the dataset directly: each fit receives a
//! [`TaskScope`] that hands out only the current task's views. Every
//! request, allowed or refused, can be logged to an [`AccessTracker`].

use std::sync::Mutex;

use serde::Serialize;

use crate::dataio::{DatasetView, EmbeddingDataset, Split, TaskSchedule};
use crate::error::{Error, Result};

/// What the runner was doing when data was requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Incremental fitting of one task.
    Fit,
    /// The pooled reference method, which by definition sees every task.
    Joint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AccessEvent {
    pub run: String,
    pub phase: Phase,
    /// Task being fitted (the last task for [`Phase::Joint`]).
    pub fitting_task: usize,
    pub requested_task: usize,
    pub split: Split,
    pub granted: bool,
}

/// Thread-safe log of data requests.
#[derive(Debug, Default)]
pub struct AccessTracker {
    events: Mutex<Vec<AccessEvent>>,
}

impl AccessTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, event: AccessEvent) {
        self.events.lock().expect("tracker lock").push(event);
    }

    pub fn events(&self) -> Vec<AccessEvent> {
        self.events.lock().expect("tracker lock").clone()
    }

    /// Requests for an earlier task's training data made while fitting a
    /// later task.
    pub fn prior_task_train_reads(&self) -> Vec<AccessEvent> {
        self.events()
            .into_iter()
            .filter(|e| e.phase == Phase::Fit && e.split == Split::Train && e.requested_task < e.fitting_task)
            .collect()
    }
}

/// Data a learner may read while fitting.
pub trait TaskData {
    fn dim(&self) -> usize;

    /// Classes introduced by task `t`.
    fn task_classes(&self, t: usize) -> Result<Vec<usize>>;

    fn view(&self, t: usize, split: Split) -> Result<DatasetView<'_>>;
}

/// The runner's [`TaskData`]: during [`Phase::Fit`] only the current task
/// is readable; other requests get a protocol error.
pub struct TaskScope<'a> {
    dataset: &'a EmbeddingDataset,
    schedule: &'a TaskSchedule,
    current: usize,
    phase: Phase,
    tracker: Option<&'a AccessTracker>,
    run: String,
}

impl<'a> TaskScope<'a> {
    pub fn fit(dataset: &'a EmbeddingDataset, schedule: &'a TaskSchedule, t: usize) -> Self {
        Self { dataset, schedule, current: t, phase: Phase::Fit, tracker: None, run: String::new() }
    }

    pub fn joint(dataset: &'a EmbeddingDataset, schedule: &'a TaskSchedule) -> Self {
        Self {
            dataset,
            schedule,
            current: schedule.num_tasks(),
            phase: Phase::Joint,
            tracker: None,
            run: String::new(),
        }
    }

    pub fn tracked(mut self, tracker: Option<&'a AccessTracker>, run: &str) -> Self {
        self.tracker = tracker;
        self.run = run.to_string();
        self
    }
}

impl TaskData for TaskScope<'_> {
    fn dim(&self) -> usize {
        self.dataset.dim()
    }

    fn task_classes(&self, t: usize) -> Result<Vec<usize>> {
        Ok(self.schedule.task(t)?.to_vec())
    }

    fn view(&self, t: usize, split: Split) -> Result<DatasetView<'_>> {
        let granted = self.phase == Phase::Joint || t == self.current;
        if let Some(tracker) = self.tracker {
            tracker.record(AccessEvent {
                run: self.run.clone(),
                phase: self.phase,
                fitting_task: self.current,
                requested_task: t,
                split,
                granted,
            });
        }
        if !granted {
            return Err(Error::Protocol(format!(
                "task {t} {} data requested while fitting task {}",
                split.as_str(),
                self.current
            )));
        }
        self.dataset.select_task(self.schedule, t, split)
    }
}
