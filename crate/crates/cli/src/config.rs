use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use enggnn_core::model::{ModelKind, ModelShape};
use enggnn_core::nn::TrainConfig;
use enggnn_core::simgen::SimScenario;
use enggnn_core::tree::{BoostParams, ForestParams};
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simulate,
    Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Delimited matrix: one row per sample, features plus a label column.
    pub matrix: PathBuf,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    /// Sample identifier column to skip, if the matrix has one.
    #[serde(default)]
    pub id_column: Option<String>,
    /// Tab-separated edge list over feature names. Without it the external
    /// graph has no edges.
    #[serde(default)]
    pub edges: Option<PathBuf>,
}

fn default_label_column() -> String {
    "label".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_split_fraction")]
    pub split_fraction: f64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub save_checkpoints: bool,
    /// Used in simulate mode. Each replication regenerates the dataset with
    /// a seed derived from the master seed; `scenario.seed` only matters to
    /// the `simulate` subcommand.
    #[serde(default)]
    pub scenario: SimScenario,
    #[serde(default)]
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub network: ModelShape,
    #[serde(default)]
    pub boosting: BoostParams,
    #[serde(default)]
    pub forest: ForestParams,
}

fn default_replications() -> usize {
    20
}

fn default_split_fraction() -> f64 {
    0.8
}

fn default_workers() -> usize {
    1
}

fn default_models() -> Vec<ModelKind> {
    ModelKind::ALL.to_vec()
}

fn default_output_dir() -> PathBuf {
    "results".into()
}

impl ExperimentConfig {
    /// Parses TOML; relative paths are resolved against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Invalid(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        resolve(&mut cfg.output_dir);
        if let Some(d) = cfg.data.as_mut() {
            resolve(&mut d.matrix);
            if let Some(e) = d.edges.as_mut() {
                resolve(e);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Invalid(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad(format!(
                "split_fraction must lie in (0, 1), got {}",
                self.split_fraction
            ));
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.models.is_empty() {
            return bad("models must not be empty".into());
        }
        if self.models.iter().collect::<BTreeSet<_>>().len() != self.models.len() {
            return bad("models lists a model twice".into());
        }
        self.train.validate()?;
        self.network.validate()?;
        match self.mode {
            Mode::Simulate => self.scenario.validate()?,
            Mode::Real if self.data.is_none() => return bad("real mode needs a [data] section".into()),
            Mode::Real => {}
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(HarnessError::io(path))?;
    let base = path.parent().unwrap_or(Path::new("."));
    ExperimentConfig::from_toml_str(&text, base).map_err(|e| match e {
        HarnessError::Invalid(message) => HarnessError::Config {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "schema_version = 1\nmode = \"simulate\"\n";

    #[test]
    fn defaults_fill_in() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL, Path::new("/base")).unwrap();
        assert_eq!(cfg.replications, 20);
        assert_eq!(cfg.split_fraction, 0.8);
        assert_eq!(cfg.models.len(), 7);
        assert_eq!(cfg.output_dir, Path::new("/base/results"));
        assert_eq!(cfg.train, TrainConfig::default());
        assert_eq!(cfg.scenario.p(), 250);
    }

    #[test]
    fn model_strings_parse() {
        let text = format!("{MINIMAL}models = [\"enggnn\", \"gedfn_xgb\", \"rf\"]\n");
        let cfg = ExperimentConfig::from_toml_str(&text, Path::new(".")).unwrap();
        assert_eq!(cfg.models, vec![ModelKind::Enggnn, ModelKind::GedfnXgb, ModelKind::Rf]);
        let text = format!("{MINIMAL}models = [\"xgboost\"]\n");
        assert!(ExperimentConfig::from_toml_str(&text, Path::new(".")).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        for extra in ["typo = 1\n", "[train]\nlearning_rat = 0.1\n", "[scenario]\nsize = 3\n"] {
            let text = format!("{MINIMAL}{extra}");
            assert!(
                ExperimentConfig::from_toml_str(&text, Path::new(".")).is_err(),
                "{extra}"
            );
        }
    }

    #[test]
    fn invalid_values_rejected() {
        for extra in [
            "split_fraction = 1.0\n",
            "replications = 0\n",
            "models = []\n",
            "models = [\"dfn\", \"dfn\"]\n",
            "[train]\ndropout_rate = 1.0\n",
        ] {
            let text = format!("{MINIMAL}{extra}");
            assert!(
                ExperimentConfig::from_toml_str(&text, Path::new(".")).is_err(),
                "{extra}"
            );
        }
        let wrong_schema = "schema_version = 2\nmode = \"simulate\"\n";
        assert!(ExperimentConfig::from_toml_str(wrong_schema, Path::new(".")).is_err());
        let real_without_data = "schema_version = 1\nmode = \"real\"\n";
        assert!(ExperimentConfig::from_toml_str(real_without_data, Path::new(".")).is_err());
    }

    #[test]
    fn data_paths_resolve_against_config_dir() {
        let text = "schema_version = 1\nmode = \"real\"\n[data]\nmatrix = \"m.csv\"\nedges = \"/abs/e.tsv\"\n";
        let cfg = ExperimentConfig::from_toml_str(text, Path::new("/cfg")).unwrap();
        let d = cfg.data.unwrap();
        assert_eq!(d.matrix, Path::new("/cfg/m.csv"));
        assert_eq!(d.edges.unwrap(), Path::new("/abs/e.tsv"));
        assert_eq!(d.label_column, "label");
    }
}
