use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered, pairwise-disjoint class sets; task `t` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRepr", into = "ScheduleRepr")]
pub struct TaskSchedule {
    tasks: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct ScheduleRepr {
    tasks: Vec<Vec<usize>>,
}

impl TryFrom<ScheduleRepr> for TaskSchedule {
    type Error = Error;

    fn try_from(r: ScheduleRepr) -> Result<Self> {
        TaskSchedule::from_tasks(r.tasks)
    }
}

impl From<TaskSchedule> for ScheduleRepr {
    fn from(s: TaskSchedule) -> Self {
        ScheduleRepr { tasks: s.tasks }
    }
}

/// How classes are assigned to tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleOrder {
    Contiguous,
    Shuffled(u64),
}

impl TaskSchedule {
    /// Validates the task sets against a dataset with `num_classes` classes.
    pub fn new(tasks: Vec<Vec<usize>>, num_classes: usize) -> Result<Self> {
        let s = Self::from_tasks(tasks)?;
        s.check_classes(num_classes)?;
        Ok(s)
    }

    /// Validates disjointness only; class bounds are checked against a
    /// dataset with [`TaskSchedule::check_classes`].
    pub fn from_tasks(tasks: Vec<Vec<usize>>) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::Config("schedule has no tasks".into()));
        }
        let mut seen = BTreeSet::new();
        for (i, task) in tasks.iter().enumerate() {
            if task.is_empty() {
                return Err(Error::Config(format!("task {} has no classes", i + 1)));
            }
            for &c in task {
                if !seen.insert(c) {
                    return Err(Error::Config(format!("class {c} appears in more than one task")));
                }
            }
        }
        Ok(Self { tasks })
    }

    pub fn check_classes(&self, num_classes: usize) -> Result<()> {
        match self.all_classes().into_iter().find(|&c| c >= num_classes) {
            Some(c) => Err(Error::Config(format!(
                "schedule references class {c} but the dataset has {num_classes} classes"
            ))),
            None => Ok(()),
        }
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn tasks(&self) -> &[Vec<usize>] {
        &self.tasks
    }

    /// Classes of task `t` (1-based).
    pub fn task(&self, t: usize) -> Result<&[usize]> {
        if t == 0 || t > self.tasks.len() {
            return Err(Error::Index { index: t, max: self.tasks.len() });
        }
        Ok(&self.tasks[t - 1])
    }

    /// Classes of tasks `1..=t`, in schedule order.
    pub fn seen_through(&self, t: usize) -> Result<Vec<usize>> {
        self.task(t)?;
        Ok(self.tasks[..t].iter().flatten().copied().collect())
    }

    pub fn all_classes(&self) -> Vec<usize> {
        self.tasks.iter().flatten().copied().collect()
    }

    /// 1-based task index containing `class`, if any.
    pub fn task_of(&self, class: usize) -> Option<usize> {
        self.tasks.iter().position(|t| t.contains(&class)).map(|i| i + 1)
    }
}

/// Splits `n_classes` into `num_tasks` tasks as evenly as possible; when
/// the split is uneven the earlier tasks receive one extra class. Each task
/// lists its classes in ascending order.
pub fn make_task_schedule(n_classes: usize, num_tasks: usize, order: ScheduleOrder) -> Result<TaskSchedule> {
    if num_tasks == 0 || n_classes == 0 {
        return Err(Error::Config("need at least one class and one task".into()));
    }
    if num_tasks > n_classes {
        return Err(Error::Config(format!("{num_tasks} tasks requested for only {n_classes} classes")));
    }
    let mut classes: Vec<usize> = (0..n_classes).collect();
    if let ScheduleOrder::Shuffled(seed) = order {
        classes.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let base = n_classes / num_tasks;
    let extra = n_classes % num_tasks;
    let mut tasks = Vec::with_capacity(num_tasks);
    let mut start = 0;
    for t in 0..num_tasks {
        let size = base + usize::from(t < extra);
        let mut task = classes[start..start + size].to_vec();
        task.sort_unstable();
        tasks.push(task);
        start += size;
    }
    TaskSchedule::new(tasks, n_classes)
}
