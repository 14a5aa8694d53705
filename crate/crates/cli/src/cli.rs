//! Command-line entry points.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use enggnn_core::model::load_checkpoint;
use enggnn_core::simgen::build_scenario;
use log::info;
use serde::Serialize;
use serde_json::json;

use crate::config::load_config;
use crate::data::{write_dataset, write_edge_list, Dataset};
use crate::experiment::{run_experiment, write_importance};
use crate::report::{ensure_dir, report_from_dir, write_records};
use crate::{HarnessError, Result};

#[derive(Debug, Parser)]
#[command(name = "enggnn", version, about = "Graph-embedded feedforward network experiments")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one simulated dataset (matrix, edge list, ground truth).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `scenario.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the replicated experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `workers`.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Rank features with a saved model checkpoint.
    RankFeatures {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output CSV (feature, raw, percentile).
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild aggregate tables from the per-run records of a results directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 on success, 2 for usage or config errors, 1 otherwise.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                HarnessError::Config { .. } => 2,
                _ => 1,
            }
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Simulate { config, out, seed } => simulate(&config, &out, seed),
        Command::Run {
            config,
            out,
            seed,
            workers,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let outcome = run_experiment(&cfg)?;
            info!("wrote results to {}", outcome.output_dir.display());
            Ok(())
        }
        Command::RankFeatures { checkpoint, out } => rank_features(&checkpoint, &out),
        Command::Report { dir } => report_from_dir(&dir),
    }
}

#[derive(Serialize)]
struct TruthRow<'a> {
    feature: &'a str,
    important: u8,
    core: u8,
}

fn simulate(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let cfg = load_config(config)?;
    let mut scenario = cfg.scenario.clone();
    if let Some(s) = seed {
        scenario.seed = s;
    }
    let sim = build_scenario(&scenario)?;
    ensure_dir(out)?;
    let names = sim.feature_names();
    let data = Dataset {
        names: names.clone(),
        x: sim.x.clone(),
        y: sim.y.clone(),
    };
    write_dataset(&out.join("matrix.csv"), &data, "label", b',')?;
    write_edge_list(&out.join("edges.tsv"), &sim.graph)?;
    let truth: Vec<TruthRow> = names
        .iter()
        .enumerate()
        .map(|(j, n)| TruthRow {
            feature: n,
            important: sim.truth.important.contains(&j) as u8,
            core: sim.truth.core.contains(&j) as u8,
        })
        .collect();
    write_records(&out.join("truth.csv"), &truth)?;
    let positives = sim.y.iter().filter(|&&v| v == 1).count();
    let manifest = json!({
        "scenario": scenario,
        "n": sim.x.nrows(),
        "p": sim.x.ncols(),
        "t": scenario.t(),
        "edges": sim.graph.edge_count(),
        "core_features": sim.truth.core.len(),
        "important_features": sim.truth.important.len(),
        "positive_fraction": positives as f64 / sim.y.len() as f64,
        "outcome": sim.outcome,
        "feature_means": sim.mu,
    });
    let path = out.join("simulation.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(HarnessError::io(&path))?;
    info!(
        "simulated n={} p={} with {} important features into {}",
        sim.x.nrows(),
        sim.x.ncols(),
        sim.truth.important.len(),
        out.display()
    );
    Ok(())
}

fn rank_features(checkpoint: &Path, out: &Path) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let names = ckpt.feature_names.clone();
    let model = ckpt.into_model()?;
    let ranking = model.importance()?;
    let names = names.unwrap_or_else(|| (0..ranking.raw.len()).map(|j| format!("f{j}")).collect());
    if names.len() != ranking.raw.len() {
        return Err(HarnessError::parse(
            checkpoint,
            format!("{} feature names for {} features", names.len(), ranking.raw.len()),
        ));
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write_importance(out, &names, &ranking)
}
