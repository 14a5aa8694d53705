//! Run records, their CSV form, and the aggregate tables derived from them.
//!
//! Aggregates are always recomputed from records, so re-running
//! [`write_reports`] on parsed CSV files reproduces the original tables.

use std::fs;
use std::path::Path;

use enggnn_core::metrics::{welch_t_test, Summary};
use enggnn_core::model::ModelKind;
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

pub const RUNS_FILE: &str = "metrics_runs.csv";
pub const AGGREGATE_FILE: &str = "metrics_aggregate.csv";
pub const TABLE_FILE: &str = "metrics_table.csv";
pub const SELECTION_FILE: &str = "feature_selection.csv";
pub const SELECTION_AGGREGATE_FILE: &str = "feature_selection_aggregate.csv";
pub const WELCH_FILE: &str = "welch_tests.csv";
pub const TIMINGS_FILE: &str = "run_timings.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const CLASSIFICATION_METRICS: [&str; 6] = ["accuracy", "precision", "recall", "f1", "roc_auc", "pr_auc"];
pub const SELECTION_METRICS: [&str; 2] = ["roc_auc", "pr_auc"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

/// One model on one replication. Metric fields are empty for failed runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: ModelKind,
    pub replication: usize,
    pub seed: u64,
    pub status: RunStatus,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub roc_auc: Option<f64>,
    pub pr_auc: Option<f64>,
    pub epochs: Option<usize>,
    pub importance_file: Option<String>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn failed(model: ModelKind, replication: usize, seed: u64, error: String) -> Self {
        RunRecord {
            model,
            replication,
            seed,
            status: RunStatus::Failed,
            accuracy: None,
            precision: None,
            recall: None,
            f1: None,
            roc_auc: None,
            pr_auc: None,
            epochs: None,
            importance_file: None,
            error: Some(error),
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "accuracy" => self.accuracy,
            "precision" => self.precision,
            "recall" => self.recall,
            "f1" => self.f1,
            "roc_auc" => self.roc_auc,
            "pr_auc" => self.pr_auc,
            _ => None,
        }
    }
}

/// Feature-selection quality of one model's importance ranking against the
/// simulated ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub model: ModelKind,
    pub replication: usize,
    pub roc_auc: f64,
    pub pr_auc: f64,
}

impl SelectionRecord {
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "roc_auc" => Some(self.roc_auc),
            "pr_auc" => Some(self.pr_auc),
            _ => None,
        }
    }
}

pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(HarnessError::io(path))?;
    Ok(())
}

pub fn read_records<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}

/// Order of first appearance.
fn model_order<'a>(models: impl Iterator<Item = &'a ModelKind>) -> Vec<ModelKind> {
    let mut seen = Vec::new();
    for m in models {
        if !seen.contains(m) {
            seen.push(*m);
        }
    }
    seen
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub model: ModelKind,
    pub runs: usize,
    pub completed: usize,
    /// Per metric, in the order of the metric list used to build the row.
    pub stats: Vec<Option<Summary>>,
    pub best: Vec<bool>,
}

impl AggregateRow {
    pub fn complete(&self) -> bool {
        self.completed == self.runs
    }
}

fn aggregate_by<T>(
    records: &[T],
    model_of: impl Fn(&T) -> ModelKind,
    ok: impl Fn(&T) -> bool,
    metric: impl Fn(&T, &str) -> Option<f64>,
    metrics: &[&str],
) -> Vec<AggregateRow> {
    let order = model_order(records.iter().map(&model_of).collect::<Vec<_>>().iter());
    let mut rows: Vec<AggregateRow> = order
        .into_iter()
        .map(|model| {
            let mine: Vec<&T> = records.iter().filter(|r| model_of(r) == model).collect();
            let done: Vec<&T> = mine.iter().copied().filter(|r| ok(r)).collect();
            let stats = metrics
                .iter()
                .map(|m| Summary::of(&done.iter().filter_map(|r| metric(r, m)).collect::<Vec<_>>()))
                .collect();
            AggregateRow {
                model,
                runs: mine.len(),
                completed: done.len(),
                stats,
                best: vec![false; metrics.len()],
            }
        })
        .collect();
    for k in 0..metrics.len() {
        let top = rows
            .iter()
            .filter_map(|r| r.stats[k].map(|s| s.mean))
            .fold(f64::NEG_INFINITY, f64::max);
        for row in rows.iter_mut() {
            row.best[k] = row.stats[k].is_some_and(|s| s.mean == top);
        }
    }
    rows
}

pub fn aggregate_runs(records: &[RunRecord]) -> Vec<AggregateRow> {
    aggregate_by(
        records,
        |r| r.model,
        |r| r.status == RunStatus::Ok,
        |r, m| r.metric(m),
        &CLASSIFICATION_METRICS,
    )
}

pub fn aggregate_selection(records: &[SelectionRecord]) -> Vec<AggregateRow> {
    aggregate_by(records, |r| r.model, |_| true, |r, m| r.metric(m), &SELECTION_METRICS)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_aggregate(path: &Path, rows: &[AggregateRow], metrics: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "model".to_string(),
        "runs".into(),
        "completed".into(),
        "complete".into(),
    ];
    for m in metrics {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_sd"));
    }
    header.push("best".into());
    w.write_record(&header)?;
    for row in rows {
        let mut fields = vec![
            row.model.to_string(),
            row.runs.to_string(),
            row.completed.to_string(),
            row.complete().to_string(),
        ];
        for s in &row.stats {
            fields.push(opt(s.map(|s| s.mean)));
            fields.push(opt(s.map(|s| s.sd)));
        }
        let best: Vec<&str> = metrics
            .iter()
            .zip(&row.best)
            .filter(|(_, &b)| b)
            .map(|(m, _)| *m)
            .collect();
        fields.push(best.join(";"));
        w.write_record(&fields)?;
    }
    w.flush().map_err(HarnessError::io(path))?;
    Ok(())
}

/// `mean (SD)` cells; the best model per metric is starred.
fn write_table(path: &Path, rows: &[AggregateRow], metrics: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["model"].iter().copied().chain(metrics.iter().copied()))?;
    for row in rows {
        let mut fields = vec![row.model.to_string()];
        for (s, &best) in row.stats.iter().zip(&row.best) {
            fields.push(match s {
                Some(s) => format!("{:.3} ({:.4}){}", s.mean, s.sd, if best { "*" } else { "" }),
                None => "NA".into(),
            });
        }
        w.write_record(&fields)?;
    }
    w.flush().map_err(HarnessError::io(path))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelchRow {
    pub family: String,
    pub metric: String,
    pub baseline: ModelKind,
    pub n_enggnn: usize,
    pub n_baseline: usize,
    pub enggnn_mean: f64,
    pub baseline_mean: f64,
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

fn welch_rows<T>(
    family: &str,
    records: &[T],
    model_of: impl Fn(&T) -> ModelKind,
    metric: impl Fn(&T, &str) -> Option<f64>,
    metrics: &[&str],
) -> Vec<WelchRow> {
    let values = |model: ModelKind, m: &str| -> Vec<f64> {
        records
            .iter()
            .filter(|r| model_of(r) == model)
            .filter_map(|r| metric(r, m))
            .collect()
    };
    let mut out = Vec::new();
    for baseline in model_order(records.iter().map(&model_of).collect::<Vec<_>>().iter()) {
        if baseline == ModelKind::Enggnn {
            continue;
        }
        for m in metrics {
            let (a, b) = (values(ModelKind::Enggnn, m), values(baseline, m));
            if let Ok(w) = welch_t_test(&a, &b) {
                out.push(WelchRow {
                    family: family.into(),
                    metric: (*m).into(),
                    baseline,
                    n_enggnn: a.len(),
                    n_baseline: b.len(),
                    enggnn_mean: Summary::of(&a).map_or(f64::NAN, |s| s.mean),
                    baseline_mean: Summary::of(&b).map_or(f64::NAN, |s| s.mean),
                    t: w.t,
                    df: w.df,
                    p_value: w.p_value,
                });
            }
        }
    }
    out
}

/// Writes every derived table for the given records into `dir`.
pub fn write_reports(dir: &Path, runs: &[RunRecord], selection: &[SelectionRecord]) -> Result<()> {
    let agg = aggregate_runs(runs);
    write_aggregate(&dir.join(AGGREGATE_FILE), &agg, &CLASSIFICATION_METRICS)?;
    write_table(&dir.join(TABLE_FILE), &agg, &CLASSIFICATION_METRICS)?;
    let mut welch = welch_rows(
        "classification",
        &runs
            .iter()
            .filter(|r| r.status == RunStatus::Ok)
            .cloned()
            .collect::<Vec<_>>(),
        |r| r.model,
        |r, m| r.metric(m),
        &CLASSIFICATION_METRICS,
    );
    if !selection.is_empty() {
        let sel = aggregate_selection(selection);
        write_aggregate(&dir.join(SELECTION_AGGREGATE_FILE), &sel, &SELECTION_METRICS)?;
        welch.extend(welch_rows(
            "feature_selection",
            selection,
            |r| r.model,
            |r, m| r.metric(m),
            &SELECTION_METRICS,
        ));
    }
    write_records(&dir.join(WELCH_FILE), &welch)
}

/// Re-aggregates the run files found in `dir`.
pub fn report_from_dir(dir: &Path) -> Result<()> {
    let runs_path = dir.join(RUNS_FILE);
    if !runs_path.exists() {
        return Err(HarnessError::parse(&runs_path, "run records not found"));
    }
    let runs: Vec<RunRecord> = read_records(&runs_path)?;
    let sel_path = dir.join(SELECTION_FILE);
    let selection: Vec<SelectionRecord> = if sel_path.exists() {
        read_records(&sel_path)?
    } else {
        Vec::new()
    };
    write_reports(dir, &runs, &selection)
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(HarnessError::io(dir))
}
