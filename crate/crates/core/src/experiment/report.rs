use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub nu: usize,
    pub repetition: usize,
    pub seed: u64,
    pub train_time_s: f64,
    /// `None` for a skipped cell.
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: String,
    pub nu: usize,
    pub mean_accuracy: f64,
    /// Sample standard deviation over the runs (0 for a single run).
    pub std_accuracy: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<Aggregate>,
}

impl ExperimentReport {
    /// Sorts rows by (method, ν, repetition) and derives the aggregates.
    pub fn from_rows(mut rows: Vec<ReportRow>) -> Self {
        rows.sort_by(|a, b| (&a.method, a.nu, a.repetition).cmp(&(&b.method, b.nu, b.repetition)));
        let mut groups: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
        for r in &rows {
            if let Some(acc) = r.test_accuracy {
                groups.entry((r.method.clone(), r.nu)).or_default().push(acc);
            }
        }
        let aggregates = groups
            .into_iter()
            .map(|((method, nu), v)| {
                let n = v.len() as f64;
                let mean = v.iter().sum::<f64>() / n;
                let var = if v.len() > 1 {
                    v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1.0)
                } else {
                    0.0
                };
                Aggregate {
                    method,
                    nu,
                    mean_accuracy: mean,
                    std_accuracy: var.sqrt(),
                    runs: v.len(),
                }
            })
            .collect();
        Self { rows, aggregates }
    }

    /// Mean accuracy per ν for `method`, in ascending ν.
    pub fn mean_curve(&self, method: &str) -> Vec<(usize, f64)> {
        self.aggregates
            .iter()
            .filter(|a| a.method == method)
            .map(|a| (a.nu, a.mean_accuracy))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Contract(format!("unknown report format {other:?} (expected csv or json)"))),
        }
    }
}

pub const ROW_HEADER: &str = "method,nu,repetition,seed,train_time_s,test_accuracy";
pub const AGGREGATE_HEADER: &str = "method,nu,mean_accuracy,std_accuracy,runs";

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn rounded(report: &ExperimentReport) -> ExperimentReport {
    ExperimentReport {
        rows: report
            .rows
            .iter()
            .map(|r| ReportRow {
                train_time_s: round6(r.train_time_s),
                test_accuracy: r.test_accuracy.map(round6),
                ..r.clone()
            })
            .collect(),
        aggregates: report
            .aggregates
            .iter()
            .map(|a| Aggregate {
                mean_accuracy: round6(a.mean_accuracy),
                std_accuracy: round6(a.std_accuracy),
                ..a.clone()
            })
            .collect(),
    }
}

/// Byte-stable text form: floats to six decimals, JSON keys sorted.
pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => {
            let mut out = String::new();
            writeln!(out, "{ROW_HEADER}").expect("string write");
            for r in &report.rows {
                let acc = r.test_accuracy.map_or("skipped".to_string(), |a| format!("{a:.6}"));
                writeln!(out, "{},{},{},{},{:.6},{acc}", r.method, r.nu, r.repetition, r.seed, r.train_time_s)
                    .expect("string write");
            }
            if !report.aggregates.is_empty() {
                writeln!(out, "\n{AGGREGATE_HEADER}").expect("string write");
                for a in &report.aggregates {
                    writeln!(
                        out,
                        "{},{},{:.6},{:.6},{}",
                        a.method, a.nu, a.mean_accuracy, a.std_accuracy, a.runs
                    )
                    .expect("string write");
                }
            }
            Ok(out)
        }
        ReportFormat::Json => {
            let value = serde_json::to_value(rounded(report))?;
            Ok(serde_json::to_string_pretty(&value)? + "\n")
        }
    }
}

pub fn emit_report(report: &ExperimentReport, path: &Path, format: ReportFormat) -> Result<()> {
    fs::write(path, render_report(report, format)?)?;
    Ok(())
}

/// Reads a JSON report written by [`emit_report`].
pub fn load_report(path: &Path) -> Result<ExperimentReport> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        location: format!("{}:{}", path.display(), e.line()),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(nu: usize, rep: usize, acc: Option<f64>) -> ReportRow {
        ReportRow {
            method: "kron_pi".into(),
            nu,
            repetition: rep,
            seed: 7,
            train_time_s: 0.0,
            test_accuracy: acc,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let csv = render_report(&ExperimentReport::default(), ReportFormat::Csv).unwrap();
        assert_eq!(csv, format!("{ROW_HEADER}\n"));
    }

    #[test]
    fn csv_layout() {
        let r = ExperimentReport::from_rows(vec![row(20, 0, Some(0.5)), row(10, 1, Some(1.0)), row(10, 0, Some(0.5))]);
        let csv = render_report(&r, ReportFormat::Csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], "kron_pi,10,0,7,0.000000,0.500000");
        assert!(lines[..4].iter().all(|l| l.split(',').count() == 6));
        assert_eq!(lines[4], "");
        assert_eq!(lines[5], AGGREGATE_HEADER);
        assert_eq!(lines[6], "kron_pi,10,0.750000,0.353553,2");
        assert_eq!(lines[7], "kron_pi,20,0.500000,0.000000,1");
    }

    #[test]
    fn skipped_rows_excluded_from_aggregates() {
        let r = ExperimentReport::from_rows(vec![row(10, 0, None), row(10, 1, None)]);
        assert!(r.aggregates.is_empty());
        let csv = render_report(&r, ReportFormat::Csv).unwrap();
        assert!(csv.lines().nth(1).unwrap().ends_with(",skipped"));
    }

    #[test]
    fn json_round_trip_is_identical() {
        let r = ExperimentReport::from_rows(vec![row(10, 0, Some(1.0 / 3.0)), row(10, 1, Some(0.9))]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        emit_report(&r, &p, ReportFormat::Json).unwrap();
        let first = fs::read_to_string(&p).unwrap();
        let back = load_report(&p).unwrap();
        assert_eq!(render_report(&back, ReportFormat::Json).unwrap(), first);
        let keys: Vec<&str> = first.lines().filter(|l| l.contains("\"method\"")).collect();
        assert!(!keys.is_empty());
    }
}
