//! Embedding datasets, their on-disk formats, task schedules and the
//! synthetic Gaussian-cluster generator.

mod csv_format;
mod embd;
mod schedule;
mod synth;

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_format::{class_names_sidecar, read_csv, read_csv_with_names, write_csv};
pub use embd::{read_embd, write_embd, EMBD_MAGIC, EMBD_VERSION};
pub use schedule::{make_task_schedule, ScheduleOrder, TaskSchedule};
pub use synth::{generate_synthetic, SynthSpec};

/// Which partition of the data a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn code(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Split::Train),
            1 => Ok(Split::Val),
            2 => Ok(Split::Test),
            other => Err(Error::Format(format!("unknown split code {other}"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Format(format!("unknown split '{other}'"))),
        }
    }
}

/// One frozen-backbone embedding with its label and split tag.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub sample_id: u64,
    pub embedding: Vec<f32>,
    pub label: usize,
    pub split: Split,
}

/// A labeled, split-tagged collection of embeddings sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    dim: usize,
    class_names: Vec<String>,
    records: Vec<EmbeddingRecord>,
}

impl EmbeddingDataset {
    /// Builds a dataset, checking every invariant.
    pub fn new(dim: usize, class_names: Vec<String>, records: Vec<EmbeddingRecord>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Format("dataset dimension must be positive".into()));
        }
        let mut seen = HashSet::new();
        for name in &class_names {
            if name.is_empty() {
                return Err(Error::Format("empty class name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Format(format!("duplicate class name '{name}'")));
            }
        }
        for r in &records {
            if r.embedding.len() != dim {
                return Err(Error::dim(dim, r.embedding.len()));
            }
            if r.label >= class_names.len() {
                return Err(Error::Label { label: r.label, num_classes: class_names.len() });
            }
        }
        Ok(Self { dim, class_names, records })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// All records whose label is in `classes` and whose split is `split`,
    /// in file order.
    pub fn view_of(&self, classes: &[usize], split: Split) -> DatasetView<'_> {
        let records = self
            .records
            .iter()
            .filter(|r| r.split == split && classes.contains(&r.label))
            .collect();
        DatasetView { dim: self.dim, records }
    }

    /// The records of task `t` (1-based) in the given split.
    pub fn select_task(&self, schedule: &TaskSchedule, t: usize, split: Split) -> Result<DatasetView<'_>> {
        let classes = schedule.task(t)?;
        Ok(self.view_of(classes, split))
    }
}

/// Borrowed subset of a dataset. Original class indices are preserved.
#[derive(Debug, Clone)]
pub struct DatasetView<'a> {
    dim: usize,
    records: Vec<&'a EmbeddingRecord>,
}

impl<'a> DatasetView<'a> {
    pub fn new(dim: usize, records: Vec<&'a EmbeddingRecord>) -> Self {
        Self { dim, records }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[&'a EmbeddingRecord] {
        &self.records
    }

    pub fn iter(&self) -> impl Iterator<Item = &'a EmbeddingRecord> + '_ {
        self.records.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Concatenates views in order; used by the pooled reference method.
    pub fn concat(views: &[DatasetView<'a>]) -> Result<DatasetView<'a>> {
        let dim = views.first().map(|v| v.dim).unwrap_or(0);
        let mut records = Vec::new();
        for v in views {
            if v.dim != dim {
                return Err(Error::dim(dim, v.dim));
            }
            records.extend_from_slice(&v.records);
        }
        Ok(DatasetView { dim, records })
    }
}

/// On-disk dataset encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Embd,
    Csv,
}

impl DataFormat {
    /// `.csv` selects CSV, anything else EMBD.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DataFormat::Csv,
            _ => DataFormat::Embd,
        }
    }
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "embd" => Ok(DataFormat::Embd),
            "csv" => Ok(DataFormat::Csv),
            other => Err(Error::Config(format!("unknown data format '{other}'"))),
        }
    }
}

/// Loads a dataset. CSV class names come from the `<path>.classes` sidecar.
pub fn load_dataset(path: &Path, format: DataFormat) -> Result<EmbeddingDataset> {
    match format {
        DataFormat::Embd => {
            let file = std::fs::File::open(path)?;
            read_embd(std::io::BufReader::new(file))
        }
        DataFormat::Csv => read_csv(path),
    }
}

/// Saves a dataset. CSV output also writes the `<path>.classes` sidecar.
pub fn save_dataset(dataset: &EmbeddingDataset, path: &Path, format: DataFormat) -> Result<()> {
    match format {
        DataFormat::Embd => {
            let file = std::fs::File::create(path)?;
            let mut w = std::io::BufWriter::new(file);
            write_embd(dataset, &mut w)?;
            std::io::Write::flush(&mut w)?;
            Ok(())
        }
        DataFormat::Csv => write_csv(dataset, path),
    }
}
