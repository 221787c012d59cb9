//! Report files: full JSON plus a CSV table, named `{experiment}_seed{seed}`.

use std::path::{Path, PathBuf};

use argus_core::metrics::{ConfusionCounts, Metrics};
use serde::{Deserialize, Serialize};

use super::experiments::{AlphaBetaGrid, DurationRow, NoiseTable, PoisonRow, ThresholdRow};
use crate::Result;

pub const NA: &str = "NA";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub experiment: String,
    pub seed: u64,
    /// Configuration the result was produced with.
    pub config: serde_json::Value,
    pub result: T,
}

impl<T> Report<T> {
    pub fn new(experiment: impl Into<String>, seed: u64, config: impl Serialize, result: T) -> Result<Self> {
        Ok(Self { experiment: experiment.into(), seed, config: serde_json::to_value(config)?, result })
    }

    pub fn stem(&self) -> String {
        format!("{}_seed{}", self.experiment, self.seed)
    }
}

/// Tabular view of a result.
pub trait Tabular {
    fn header(&self) -> Vec<String>;
    fn rows(&self) -> Vec<Vec<String>>;
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_owned(), |x| x.to_string())
}

fn metric_cells(c: &ConfusionCounts, m: &Metrics) -> Vec<String> {
    let mut out: Vec<String> = [c.tp, c.fp, c.tn, c.fn_].iter().map(u64::to_string).collect();
    out.extend([m.fpr, m.precision, m.recall, m.f1].map(fmt_opt));
    out
}

const METRIC_COLUMNS: [&str; 8] = ["tp", "fp", "tn", "fn", "fpr", "precision", "recall", "f1"];

fn header(lead: &[&str]) -> Vec<String> {
    lead.iter().chain(METRIC_COLUMNS.iter()).map(|s| (*s).to_owned()).collect()
}

impl Tabular for Vec<ThresholdRow> {
    fn header(&self) -> Vec<String> {
        header(&["strategy", "alpha", "beta"])
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|r| {
                let mut row = vec![r.name.clone(), r.config.alpha.to_string(), r.config.beta.to_string()];
                row.extend(metric_cells(&r.counts, &r.metrics));
                row
            })
            .collect()
    }
}

impl Tabular for AlphaBetaGrid {
    fn header(&self) -> Vec<String> {
        ["alpha", "beta", "f1", "fpr"].map(String::from).to_vec()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.cells
            .iter()
            .map(|c| vec![c.alpha.to_string(), c.beta.to_string(), fmt_opt(c.f1), fmt_opt(c.fpr)])
            .collect()
    }
}

impl Tabular for Vec<DurationRow> {
    fn header(&self) -> Vec<String> {
        header(&["days", "epochs"])
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|r| {
                let mut row = vec![r.days.to_string(), r.epochs.to_string()];
                row.extend(metric_cells(&r.counts, &r.metrics));
                row
            })
            .collect()
    }
}

impl Tabular for NoiseTable {
    fn header(&self) -> Vec<String> {
        ["mu", "sigma", "events", "alerts_pct", "affecting_pct", "not_affecting_pct"].map(String::from).to_vec()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        std::iter::once(&self.control)
            .chain(&self.rows)
            .map(|r| {
                vec![
                    r.mu.to_string(),
                    r.sigma.to_string(),
                    r.buckets.events.to_string(),
                    fmt_opt(r.alerts_pct),
                    fmt_opt(r.affecting_pct),
                    fmt_opt(r.not_affecting_pct),
                ]
            })
            .collect()
    }
}

impl Tabular for Vec<PoisonRow> {
    fn header(&self) -> Vec<String> {
        header(&["fraction", "injected"])
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|r| {
                let mut row = vec![r.fraction.to_string(), r.injected.to_string()];
                row.extend(metric_cells(&r.counts, &r.metrics));
                row
            })
            .collect()
    }
}

pub fn report_json<T: Serialize>(report: &Report<T>) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn report_csv<T: Tabular>(report: &Report<T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(report.result.header())?;
    for row in report.result.rows() {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv of strings is utf-8"))
}

/// Writes `<dir>/<stem>.json` and `<dir>/<stem>.csv`.
pub fn emit_report<T: Serialize + Tabular>(report: &Report<T>, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let json = dir.join(format!("{}.json", report.stem()));
    let csv = dir.join(format!("{}.csv", report.stem()));
    std::fs::write(&json, report_json(report)?)?;
    std::fs::write(&csv, report_csv(report)?)?;
    Ok((json, csv))
}
