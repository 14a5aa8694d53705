//! Replicated train/test experiments over a model roster.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use enggnn_core::graph::{Directedness, FeatureGraph};
use enggnn_core::metrics::{confusion_metrics, pr_auc, roc_auc};
use enggnn_core::model::{build_model, save_checkpoint, ImportanceRanking, Model, ModelInputs, ModelKind};
use enggnn_core::nn::{train, zscore_fit_apply, TrainConfig, TrainReport};
use enggnn_core::seed::derive_seed;
use enggnn_core::simgen::{build_scenario, SimScenario};
use enggnn_core::tree::{fit_gradient_boosted_trees, fit_random_forest, BoostParams, ForestParams, TreeEnsemble};
use log::{info, warn};
use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, Mode};
use crate::data::{load_dataset, load_edge_list, Dataset};
use crate::report::{
    ensure_dir, write_records, write_reports, RunRecord, RunStatus, SelectionRecord, MANIFEST_FILE, RUNS_FILE,
    SELECTION_FILE, TIMINGS_FILE,
};
use crate::split::stratified_split;
use crate::{HarnessError, Result};

/// The data one replication works on.
#[derive(Debug, Clone)]
pub struct ReplicationData {
    pub names: Vec<String>,
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    pub graph: FeatureGraph,
    /// Per-feature 0/1 importance labels when known (simulated data).
    pub truth: Option<Vec<u8>>,
    pub dataset_seed: Option<u64>,
}

/// Simulated scenarios are regenerated per replication; real data is shared.
#[derive(Debug, Clone)]
pub enum DataSource {
    Simulated(SimScenario),
    Real(ReplicationData),
}

impl DataSource {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(match cfg.mode {
            Mode::Simulate => DataSource::Simulated(cfg.scenario.clone()),
            Mode::Real => {
                let d = cfg.data.as_ref().expect("validated config");
                let Dataset { names, x, y } = load_dataset(&d.matrix, &d.label_column, d.id_column.as_deref())?;
                let graph = match &d.edges {
                    Some(path) => {
                        let (g, s) = load_edge_list(path, &names)?;
                        info!(
                            "external graph: {} edges, {} skipped, {} duplicates",
                            s.edges, s.skipped_unknown, s.duplicates
                        );
                        g
                    }
                    None => {
                        warn!("no edge list given, external graph has self-loops only");
                        FeatureGraph::new(names.len(), Directedness::Undirected).with_names(names.clone())?
                    }
                };
                DataSource::Real(ReplicationData {
                    names,
                    x,
                    y,
                    graph,
                    truth: None,
                    dataset_seed: None,
                })
            }
        })
    }

    pub fn replication(&self, master_seed: u64, r: usize) -> Result<ReplicationData> {
        match self {
            DataSource::Real(d) => Ok(d.clone()),
            DataSource::Simulated(s) => {
                let seed = derive_seed(master_seed, r as u64, "dataset");
                let d = build_scenario(&SimScenario { seed, ..s.clone() })?;
                Ok(ReplicationData {
                    names: d.feature_names(),
                    truth: Some(d.ground_truth()),
                    x: d.x,
                    y: d.y,
                    graph: d.graph,
                    dataset_seed: Some(seed),
                })
            }
        }
    }
}

pub fn model_seed(master: u64, r: usize, kind: ModelKind) -> u64 {
    derive_seed(master, r as u64, kind.as_str())
}

/// A model fit on one replication's training split.
#[derive(Debug)]
pub struct FittedModel {
    pub kind: ModelKind,
    pub seed: u64,
    pub result: std::result::Result<(Model, Option<TrainReport>), String>,
    pub seconds: f64,
}

/// Fits shared tree ensembles (when the roster needs them) and every model
/// on already standardised training data. Nothing here sees test rows.
pub fn fit_models(
    cfg: &ExperimentConfig,
    r: usize,
    x_train: &Array2<f64>,
    y_train: &[u8],
    external: &FeatureGraph,
) -> (Vec<FittedModel>, Vec<(String, f64)>) {
    let mut timings = Vec::new();
    let mut shared = |tag: &str, needed: bool, fit: &dyn Fn(u64) -> enggnn_core::Result<TreeEnsemble>| {
        needed.then(|| {
            let start = Instant::now();
            let out = fit(derive_seed(cfg.seed, r as u64, tag)).map_err(|e| e.to_string());
            timings.push((format!("shared_{tag}"), start.elapsed().as_secs_f64()));
            out
        })
    };
    let boosted = shared("gbt", cfg.models.iter().any(|k| k.needs_boosted()), &|seed| {
        fit_gradient_boosted_trees(
            x_train,
            y_train,
            &BoostParams {
                seed,
                ..cfg.boosting.clone()
            },
        )
    });
    let forest = shared("rf", cfg.models.iter().any(|k| k.needs_forest()), &|seed| {
        fit_random_forest(
            x_train,
            y_train,
            &ForestParams {
                seed,
                ..cfg.forest.clone()
            },
        )
    });

    let fitted = cfg
        .models
        .iter()
        .map(|&kind| {
            let start = Instant::now();
            let seed = model_seed(cfg.seed, r, kind);
            let result = fit_one(
                cfg,
                kind,
                seed,
                x_train,
                y_train,
                external,
                boosted.as_ref(),
                forest.as_ref(),
            );
            if let Err(e) = &result {
                warn!("replication {r}: {kind} failed: {e}");
            }
            FittedModel {
                kind,
                seed,
                result,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect();
    (fitted, timings)
}

type Shared = std::result::Result<TreeEnsemble, String>;

fn unwrap(s: Option<&Shared>) -> std::result::Result<Option<&TreeEnsemble>, String> {
    s.map(|r| r.as_ref().map_err(|e| format!("tree ensemble fit failed: {e}")))
        .transpose()
}

#[allow(clippy::too_many_arguments)]
fn fit_one(
    cfg: &ExperimentConfig,
    kind: ModelKind,
    seed: u64,
    x: &Array2<f64>,
    y: &[u8],
    external: &FeatureGraph,
    boosted: Option<&Shared>,
    forest: Option<&Shared>,
) -> std::result::Result<(Model, Option<TrainReport>), String> {
    let inputs = ModelInputs {
        p: x.ncols(),
        external: Some(external),
        boosted: unwrap(boosted)?,
        forest: unwrap(forest)?,
        shape: &cfg.network,
        seed,
    };
    let mut model = build_model(kind, &inputs).map_err(|e| e.to_string())?;
    let report = match model.trainable_mut() {
        Some(t) => {
            let tc = TrainConfig {
                seed: derive_seed(seed, 0, "train"),
                ..cfg.train.clone()
            };
            Some(train(t, x, y, &tc).map_err(|e| e.to_string())?)
        }
        None => None,
    };
    Ok((model, report))
}

/// Everything one replication produced, before any file is written.
#[derive(Debug)]
pub struct ReplicationResult {
    pub replication: usize,
    pub split_seed: u64,
    pub dataset_seed: Option<u64>,
    pub n_train: usize,
    pub n_test: usize,
    pub runs: Vec<RunRecord>,
    pub selection: Vec<SelectionRecord>,
    pub importances: Vec<(ModelKind, ImportanceRanking)>,
    pub models: Vec<(ModelKind, Model)>,
    pub timings: Vec<(String, f64)>,
    pub names: Vec<String>,
    pub truth_size: Option<usize>,
}

pub fn importance_file(kind: ModelKind, r: usize) -> String {
    format!("importance_{kind}_{r}.csv")
}

fn score(model: &Model, x_test: &Array2<f64>, y_test: &[u8]) -> enggnn_core::Result<[f64; 6]> {
    let probs = model.predict_positive(x_test)?;
    let pred: Vec<u8> = probs.iter().map(|&p| (p > 0.5) as u8).collect();
    let c = confusion_metrics(y_test, &pred)?;
    Ok([
        c.accuracy,
        c.precision,
        c.recall,
        c.f1,
        roc_auc(&probs, y_test)?,
        pr_auc(&probs, y_test)?,
    ])
}

pub fn run_replication(cfg: &ExperimentConfig, r: usize, data: ReplicationData) -> Result<ReplicationResult> {
    let split_seed = derive_seed(cfg.seed, r as u64, "split");
    let (train_idx, test_idx) = stratified_split(&data.y, cfg.split_fraction, split_seed)?;
    let x_train_raw = data.x.select(Axis(0), &train_idx);
    let x_test_raw = data.x.select(Axis(0), &test_idx);
    let (x_train, x_test, _) = zscore_fit_apply(&x_train_raw, &x_test_raw)?;
    let y_train: Vec<u8> = train_idx.iter().map(|&i| data.y[i]).collect();
    let y_test: Vec<u8> = test_idx.iter().map(|&i| data.y[i]).collect();

    let (fitted, mut timings) = fit_models(cfg, r, &x_train, &y_train, &data.graph);
    let mut out = ReplicationResult {
        replication: r,
        split_seed,
        dataset_seed: data.dataset_seed,
        n_train: train_idx.len(),
        n_test: test_idx.len(),
        runs: Vec::new(),
        selection: Vec::new(),
        importances: Vec::new(),
        models: Vec::new(),
        timings: Vec::new(),
        names: data.names.clone(),
        truth_size: data.truth.as_ref().map(|t| t.iter().filter(|&&v| v == 1).count()),
    };
    for f in fitted {
        out.timings.push((f.kind.to_string(), f.seconds));
        let (model, report) = match f.result {
            Ok(m) => m,
            Err(e) => {
                out.runs.push(RunRecord::failed(f.kind, r, f.seed, e));
                continue;
            }
        };
        let scored = score(&model, &x_test, &y_test).and_then(|m| Ok((m, model.importance()?)));
        let (m, importance) = match scored {
            Ok(v) => v,
            Err(e) => {
                out.runs.push(RunRecord::failed(f.kind, r, f.seed, e.to_string()));
                continue;
            }
        };
        if let Some(truth) = &data.truth {
            match (
                roc_auc(&importance.percentile, truth),
                pr_auc(&importance.percentile, truth),
            ) {
                (Ok(roc), Ok(pr)) => out.selection.push(SelectionRecord {
                    model: f.kind,
                    replication: r,
                    roc_auc: roc,
                    pr_auc: pr,
                }),
                (Err(e), _) | (_, Err(e)) => warn!("replication {r}: feature selection for {} skipped: {e}", f.kind),
            }
        }
        out.runs.push(RunRecord {
            model: f.kind,
            replication: r,
            seed: f.seed,
            status: RunStatus::Ok,
            accuracy: Some(m[0]),
            precision: Some(m[1]),
            recall: Some(m[2]),
            f1: Some(m[3]),
            roc_auc: Some(m[4]),
            pr_auc: Some(m[5]),
            epochs: report.map(|rep| rep.epochs_run()),
            importance_file: Some(importance_file(f.kind, r)),
            error: None,
        });
        info!(
            "replication {r}: {} accuracy {:.4} roc_auc {:.4} ({:.1}s)",
            f.kind, m[0], m[4], f.seconds
        );
        out.importances.push((f.kind, importance));
        if cfg.save_checkpoints {
            out.models.push((f.kind, model));
        }
    }
    out.timings.append(&mut timings);
    Ok(out)
}

#[derive(Debug, Serialize)]
struct ImportanceRow<'a> {
    feature: &'a str,
    raw: f64,
    percentile: f64,
}

#[derive(Debug, Serialize)]
struct MeanImportanceRow<'a> {
    feature: &'a str,
    mean_raw: f64,
    mean_percentile: f64,
    replications: usize,
}

#[derive(Debug, Serialize)]
struct TimingRow<'a> {
    replication: usize,
    task: &'a str,
    seconds: f64,
}

pub fn write_importance(path: &Path, names: &[String], ranking: &ImportanceRanking) -> Result<()> {
    let rows: Vec<ImportanceRow> = names
        .iter()
        .zip(ranking.raw.iter().zip(&ranking.percentile))
        .map(|(n, (&raw, &percentile))| ImportanceRow {
            feature: n,
            raw,
            percentile,
        })
        .collect();
    write_records(path, &rows)
}

/// Summary of a finished experiment.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub output_dir: PathBuf,
    pub runs: Vec<RunRecord>,
    pub selection: Vec<SelectionRecord>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let source = DataSource::from_config(cfg)?;
    run_with_source(cfg, &source)
}

pub fn run_with_source(cfg: &ExperimentConfig, source: &DataSource) -> Result<ExperimentOutcome> {
    let dir = cfg.output_dir.clone();
    ensure_dir(&dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| HarnessError::Invalid(e.to_string()))?;
    let results: Vec<ReplicationResult> = pool.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                info!("replication {r} of {}", cfg.replications);
                run_replication(cfg, r, source.replication(cfg.seed, r)?)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    write_outputs(cfg, &dir, &results)
}

fn write_outputs(cfg: &ExperimentConfig, dir: &Path, results: &[ReplicationResult]) -> Result<ExperimentOutcome> {
    let rank = |k: ModelKind| cfg.models.iter().position(|&m| m == k).unwrap_or(usize::MAX);
    let mut runs: Vec<RunRecord> = results.iter().flat_map(|r| r.runs.iter().cloned()).collect();
    runs.sort_by_key(|r| (rank(r.model), r.replication));
    let mut selection: Vec<SelectionRecord> = results.iter().flat_map(|r| r.selection.iter().cloned()).collect();
    selection.sort_by_key(|r| (rank(r.model), r.replication));

    write_records(&dir.join(RUNS_FILE), &runs)?;
    if !selection.is_empty() {
        write_records(&dir.join(SELECTION_FILE), &selection)?;
    }
    write_reports(dir, &runs, &selection)?;

    for res in results {
        for (kind, ranking) in &res.importances {
            write_importance(&dir.join(importance_file(*kind, res.replication)), &res.names, ranking)?;
        }
        for (kind, model) in &res.models {
            let path = dir.join(format!("checkpoint_{kind}_{}.json", res.replication));
            save_checkpoint(&path, model, Some(res.names.clone()))?;
        }
    }
    for &kind in &cfg.models {
        let rankings: Vec<&ImportanceRanking> = results
            .iter()
            .flat_map(|r| r.importances.iter().filter(|(k, _)| *k == kind).map(|(_, i)| i))
            .collect();
        if rankings.is_empty() {
            continue;
        }
        let names = &results[0].names;
        let n = rankings.len() as f64;
        let rows: Vec<MeanImportanceRow> = names
            .iter()
            .enumerate()
            .map(|(j, name)| MeanImportanceRow {
                feature: name,
                mean_raw: rankings.iter().map(|r| r.raw[j]).sum::<f64>() / n,
                mean_percentile: rankings.iter().map(|r| r.percentile[j]).sum::<f64>() / n,
                replications: rankings.len(),
            })
            .collect();
        write_records(&dir.join(format!("importance_{kind}_mean.csv")), &rows)?;
    }

    let timings: Vec<TimingRow> = results
        .iter()
        .flat_map(|r| {
            r.timings.iter().map(move |(task, s)| TimingRow {
                replication: r.replication,
                task,
                seconds: *s,
            })
        })
        .collect();
    write_records(&dir.join(TIMINGS_FILE), &timings)?;
    write_manifest(cfg, dir, results)?;
    Ok(ExperimentOutcome {
        output_dir: dir.to_path_buf(),
        runs,
        selection,
    })
}

fn write_manifest(cfg: &ExperimentConfig, dir: &Path, results: &[ReplicationResult]) -> Result<()> {
    let reps: Vec<_> = results
        .iter()
        .map(|r| {
            json!({
                "index": r.replication,
                "split_seed": r.split_seed,
                "dataset_seed": r.dataset_seed,
                "train_size": r.n_train,
                "test_size": r.n_test,
                "important_features": r.truth_size,
                "model_seeds": cfg.models.iter().map(|&k| (k.to_string(), model_seed(cfg.seed, r.replication, k))).collect::<std::collections::BTreeMap<_, _>>(),
            })
        })
        .collect();
    let derived = match cfg.mode {
        Mode::Simulate => json!({
            "n": cfg.scenario.n,
            "p": cfg.scenario.p(),
            "t": cfg.scenario.t(),
            "ba_m": cfg.scenario.ba_m,
            "threshold_mode": cfg.scenario.threshold_mode,
        }),
        Mode::Real => json!({
            "n": results.first().map(|r| r.n_train + r.n_test),
            "p": results.first().map(|r| r.names.len()),
        }),
    };
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "schema_version": cfg.schema_version,
        "standardization": "z-score fit on the training split of each replication",
        "derived": derived,
        "config": cfg,
        "replications": reps,
        "created_unix": created,
    });
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(HarnessError::io(&path))
}
