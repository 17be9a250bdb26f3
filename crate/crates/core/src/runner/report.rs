use std::fmt::Write as _;
use std::str::FromStr;

use super::experiment::ResultsBundle;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(Error::Config(format!("unknown report format '{other}' (json, csv or md)"))),
        }
    }
}

/// Renders one bundle.
pub fn render_report(bundle: &ResultsBundle, format: ReportFormat) -> Result<String> {
    render_reports(std::slice::from_ref(bundle), format)
}

/// Renders several bundles: JSON as an array (a bare object for one
/// bundle), CSV with one row per (bundle, run), markdown as one table with
/// a BAAC and an F column per dataset.
pub fn render_reports(bundles: &[ResultsBundle], format: ReportFormat) -> Result<String> {
    if bundles.is_empty() {
        return Err(Error::Argument("no bundles to report".into()));
    }
    Ok(match format {
        ReportFormat::Json if bundles.len() == 1 => bundles[0].to_json(),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(bundles)?;
            s.push('\n');
            s
        }
        ReportFormat::Csv => csv_report(bundles)?,
        ReportFormat::Markdown => markdown_report(bundles),
    })
}

fn csv_report(bundles: &[ResultsBundle]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "dataset", "seed", "baac", "forgetting"])?;
    for b in bundles {
        for r in &b.runs {
            // Display for f64 is the shortest representation that parses back exactly
            let f = r.forgetting.map(|f| f.to_string()).unwrap_or_default();
            w.write_record([r.method.as_str(), &b.dataset, &r.seed.to_string(), &r.baac.to_string(), &f])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

fn cell(mean: Option<f64>, std: Option<f64>) -> String {
    match (mean, std) {
        (None, _) => "-".to_string(),
        (Some(m), None) => format!("{:.2}", 100.0 * m),
        (Some(m), Some(s)) => format!("{:.2} ± {:.2}", 100.0 * m, 100.0 * s),
    }
}

fn markdown_report(bundles: &[ResultsBundle]) -> String {
    let mut methods: Vec<&str> = Vec::new();
    for b in bundles {
        for m in &b.methods {
            if !methods.contains(&m.as_str()) {
                methods.push(m);
            }
        }
    }
    let mut out = String::from("| Method |");
    for b in bundles {
        let _ = write!(out, " {} BAAC (%) | {} F (%) |", b.dataset, b.dataset);
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|---:|".repeat(bundles.len()));
    out.push('\n');
    for m in methods {
        let _ = write!(out, "| {m} |");
        for b in bundles {
            match b.aggregate.iter().find(|a| a.method == m) {
                Some(a) => {
                    let _ = write!(
                        out,
                        " {} | {} |",
                        cell(Some(a.baac_mean), a.baac_std),
                        cell(a.forgetting_mean, a.forgetting_std)
                    );
                }
                None => out.push_str(" - | - |"),
            }
        }
        out.push('\n');
    }
    out
}
