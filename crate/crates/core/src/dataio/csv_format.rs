//! CSV dataset format: header `sample_id,label,split,e0,...,e{d-1}`, split
//! written as `train`/`val`/`test`. Class names live in a sidecar text file,
//! one name per line.

use std::fs;
use std::path::{Path, PathBuf};

use super::{EmbeddingDataset, EmbeddingRecord, Split};
use crate::error::{Error, Result};

/// Sidecar path holding class names for a CSV dataset: `<path>.classes`.
pub fn class_names_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".classes");
    PathBuf::from(s)
}

pub fn read_csv(path: &Path) -> Result<EmbeddingDataset> {
    read_csv_with_names(path, &class_names_sidecar(path))
}

pub fn read_csv_with_names(path: &Path, names_path: &Path) -> Result<EmbeddingDataset> {
    let names_text = fs::read_to_string(names_path)?;
    let class_names: Vec<String> = names_text
        .lines()
        .map(|l| l.trim_end_matches('\r').to_string())
        .filter(|l| !l.is_empty())
        .collect();

    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header = reader.headers()?.clone();
    if header.len() < 4
        || &header[0] != "sample_id"
        || &header[1] != "label"
        || &header[2] != "split"
    {
        return Err(Error::Format("CSV header must start with sample_id,label,split,e0".into()));
    }
    let dim = header.len() - 3;
    for (j, col) in header.iter().skip(3).enumerate() {
        if col != format!("e{j}") {
            return Err(Error::Format(format!("unexpected CSV column '{col}', expected 'e{j}'")));
        }
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        if row.len() != dim + 3 {
            return Err(Error::dim(dim, row.len().saturating_sub(3)));
        }
        let parse_err = |what: &str, v: &str| Error::Format(format!("bad {what} '{v}'"));
        let sample_id = row[0].parse::<u64>().map_err(|_| parse_err("sample_id", &row[0]))?;
        let label = row[1].parse::<usize>().map_err(|_| parse_err("label", &row[1]))?;
        if label >= class_names.len() {
            return Err(Error::Label { label, num_classes: class_names.len() });
        }
        let split: Split = row[2].parse()?;
        let embedding = row
            .iter()
            .skip(3)
            .map(|v| v.trim().parse::<f32>().map_err(|_| parse_err("embedding value", v)))
            .collect::<Result<Vec<f32>>>()?;
        records.push(EmbeddingRecord { sample_id, embedding, label, split });
    }
    EmbeddingDataset::new(dim, class_names, records)
}

pub fn write_csv(ds: &EmbeddingDataset, path: &Path) -> Result<()> {
    let mut names = ds.class_names().join("\n");
    names.push('\n');
    fs::write(class_names_sidecar(path), names)?;

    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["sample_id".to_string(), "label".into(), "split".into()];
    header.extend((0..ds.dim()).map(|j| format!("e{j}")));
    w.write_record(&header)?;
    for rec in ds.records() {
        let mut row = Vec::with_capacity(ds.dim() + 3);
        row.push(rec.sample_id.to_string());
        row.push(rec.label.to_string());
        row.push(rec.split.as_str().to_string());
        // f32 Display is the shortest string that parses back to the same bits
        row.extend(rec.embedding.iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
