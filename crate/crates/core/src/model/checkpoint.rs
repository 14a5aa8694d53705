//! Versioned JSON checkpoints. Masks are stored as the graphs' edge lists and
//! rebuilt on load; floats use shortest round-trip formatting, so a save/load
//! cycle is bit-exact.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{EnggnnModel, GraphNetwork, Model, ModelKind};
use crate::graph::{add_self_loops, FeatureGraph};
use crate::nn::{Activation, Layer, Network, Stack};
use crate::tree::{DecisionTree, TreeEnsemble};
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "enggnn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    rows: usize,
    cols: usize,
    activation: Activation,
    /// Row-major.
    weight: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum Body {
    Dual {
        external: FeatureGraph,
        generated: FeatureGraph,
        branch_e: Vec<LayerRecord>,
        branch_g: Vec<LayerRecord>,
        head: Vec<LayerRecord>,
    },
    Single {
        graph: Option<FeatureGraph>,
        layers: Vec<LayerRecord>,
    },
    Trees {
        ensemble: TreeEnsemble,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_names: Option<Vec<String>>,
    body: Body,
}

fn record(layer: &Layer) -> LayerRecord {
    LayerRecord {
        rows: layer.in_dim(),
        cols: layer.out_dim(),
        activation: layer.activation(),
        weight: layer.weight().iter().copied().collect(),
        bias: layer.bias().to_vec(),
    }
}

fn records(layers: &[Layer]) -> Vec<LayerRecord> {
    layers.iter().map(record).collect()
}

fn restore(r: LayerRecord, mask: Option<Array2<f64>>) -> Result<Layer> {
    let weight = Array2::from_shape_vec((r.rows, r.cols), r.weight)
        .map_err(|e| Error::Checkpoint(format!("layer weight: {e}")))?;
    let layer = Layer::new(weight, Array1::from(r.bias), r.activation)?;
    match mask {
        Some(m) => layer.with_mask(m),
        None => Ok(layer),
    }
}

/// First layer masked by `graph` (if any), the rest dense.
fn restore_all(rs: Vec<LayerRecord>, graph: Option<&FeatureGraph>) -> Result<Vec<Layer>> {
    if rs.is_empty() {
        return Err(Error::Checkpoint("empty layer list".into()));
    }
    rs.into_iter()
        .enumerate()
        .map(|(k, r)| restore(r, if k == 0 { graph.map(add_self_loops) } else { None }))
        .collect()
}

fn checked(g: FeatureGraph) -> Result<FeatureGraph> {
    g.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(g)
}

impl Checkpoint {
    pub fn from_model(model: &Model, feature_names: Option<Vec<String>>) -> Self {
        let body = match model {
            Model::Enggnn(m) => Body::Dual {
                external: m.external_graph().clone(),
                generated: m.generated_graph().clone(),
                branch_e: records(m.branch_e().layers()),
                branch_g: records(m.branch_g().layers()),
                head: records(m.head().stack().layers()),
            },
            Model::Neural { net, .. } => Body::Single {
                graph: net.graph().cloned(),
                layers: records(net.network().stack().layers()),
            },
            Model::Trees { ensemble, .. } => Body::Trees {
                ensemble: ensemble.clone(),
            },
        };
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            kind: model.kind(),
            feature_names,
            body,
        }
    }

    pub fn into_model(self) -> Result<Model> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unrecognised format '{}'", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", self.version)));
        }
        let kind = self.kind;
        let model = match self.body {
            Body::Dual {
                external,
                generated,
                branch_e,
                branch_g,
                head,
            } if kind == ModelKind::Enggnn => {
                let (external, generated) = (checked(external)?, checked(generated)?);
                let e = Stack::new(restore_all(branch_e, Some(&external))?)?;
                let g = Stack::new(restore_all(branch_g, Some(&generated))?)?;
                let head = Network::new(restore_all(head, None)?)?;
                Model::Enggnn(EnggnnModel::from_parts(external, generated, e, g, head)?)
            }
            Body::Single { graph, layers } if kind.is_neural() && kind != ModelKind::Enggnn => {
                let graph = graph.map(checked).transpose()?;
                let net = Network::new(restore_all(layers, graph.as_ref())?)?;
                Model::Neural {
                    kind,
                    net: GraphNetwork::from_parts(graph, net)?,
                }
            }
            Body::Trees { mut ensemble } if !kind.is_neural() => {
                ensemble.trees = ensemble
                    .trees
                    .into_iter()
                    .map(|t| DecisionTree::from_nodes(t.nodes().to_vec()))
                    .collect::<Result<_>>()?;
                Model::Trees { kind, ensemble }
            }
            _ => return Err(Error::Checkpoint(format!("body does not match model kind {kind}"))),
        };
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

pub fn save_checkpoint(path: &Path, model: &Model, feature_names: Option<Vec<String>>) -> Result<()> {
    fs::write(path, Checkpoint::from_model(model, feature_names).to_json()?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_json(&fs::read_to_string(path)?)
}
