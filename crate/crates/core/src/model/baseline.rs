use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{
    build_enggnn, graph_connection_importance, masked_stack, network_connection_importance, EnggnnModel,
    ImportanceRanking, ModelShape,
};
use crate::graph::{add_self_loops, FeatureGraph};
use crate::nn::{Activation, Layer, LayerGrad, Network, Trainable};
use crate::seed::{rng_from_seed, Rng};
use crate::tree::{
    ensemble_gain_importance, extract_feature_graph, forest_gini_importance, EnsembleKind, TreeEnsemble,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Enggnn,
    GedfnE,
    GedfnXgb,
    GedfnRf,
    Dfn,
    Gbt,
    Rf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Enggnn,
        ModelKind::GedfnE,
        ModelKind::GedfnXgb,
        ModelKind::GedfnRf,
        ModelKind::Dfn,
        ModelKind::Gbt,
        ModelKind::Rf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Enggnn => "enggnn",
            ModelKind::GedfnE => "gedfn_e",
            ModelKind::GedfnXgb => "gedfn_xgb",
            ModelKind::GedfnRf => "gedfn_rf",
            ModelKind::Dfn => "dfn",
            ModelKind::Gbt => "gbt",
            ModelKind::Rf => "rf",
        }
    }

    pub fn is_neural(self) -> bool {
        !matches!(self, ModelKind::Gbt | ModelKind::Rf)
    }

    pub fn needs_external_graph(self) -> bool {
        matches!(self, ModelKind::Enggnn | ModelKind::GedfnE)
    }

    pub fn needs_boosted(self) -> bool {
        matches!(self, ModelKind::Enggnn | ModelKind::GedfnXgb | ModelKind::Gbt)
    }

    pub fn needs_forest(self) -> bool {
        matches!(self, ModelKind::GedfnRf | ModelKind::Rf)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::param(format!("unknown model kind '{s}'")))
    }
}

/// Single-branch network: masked by `graph` (GEDFN) or dense (DFN).
#[derive(Debug, Clone, PartialEq)]
pub struct GraphNetwork {
    graph: Option<FeatureGraph>,
    net: Network,
}

impl GraphNetwork {
    pub fn from_parts(graph: Option<FeatureGraph>, net: Network) -> Result<Self> {
        let first = &net.stack().layers()[0];
        let expected = graph.as_ref().map(add_self_loops);
        if first.mask() != expected.as_ref() {
            return Err(Error::param("first layer mask does not match the graph"));
        }
        Ok(GraphNetwork { graph, net })
    }

    pub fn graph(&self) -> Option<&FeatureGraph> {
        self.graph.as_ref()
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn importance(&self) -> Result<ImportanceRanking> {
        network_connection_importance(&self.net)
    }
}

impl Trainable for GraphNetwork {
    fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    fn predict_proba(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.net.predict_proba(x)
    }

    fn loss_and_gradients(
        &self,
        x: &Array2<f64>,
        labels: &[u8],
        dropout: Option<(f64, &mut Rng)>,
    ) -> Result<(f64, Vec<LayerGrad>)> {
        self.net.loss_and_gradients(x, labels, dropout)
    }

    fn layers(&self) -> Vec<&Layer> {
        self.net.layers()
    }

    fn layers_mut(&mut self) -> Vec<&mut Layer> {
        self.net.layers_mut()
    }
}

/// GEDFN over `graph`, or a DFN of identical widths when `graph` is `None`.
/// Both draw the same random stream, so a complete graph reproduces the DFN.
pub fn build_gedfn(graph: Option<&FeatureGraph>, p: usize, shape: &ModelShape, seed: u64) -> Result<GraphNetwork> {
    shape.validate()?;
    if let Some(g) = graph {
        if g.node_count() != p {
            return Err(Error::DimensionMismatch {
                context: "graph node count",
                expected: p,
                actual: g.node_count(),
            });
        }
    }
    let mut rng = rng_from_seed(seed);
    let mut layers = masked_stack(graph.map(add_self_loops), p, &shape.branch_hidden, &mut rng)?;
    let prev = layers.last().map(Layer::out_dim).unwrap_or(p);
    layers.push(Layer::init(prev, 2, Activation::Softmax, &mut rng));
    GraphNetwork::from_parts(graph.cloned(), Network::new(layers)?)
}

/// Anything the experiment harness can fit, score and rank features with.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Enggnn(EnggnnModel),
    Neural { kind: ModelKind, net: GraphNetwork },
    Trees { kind: ModelKind, ensemble: TreeEnsemble },
}

/// What [`build_model`] may need. Tree ensembles must already be fit on the
/// training split.
#[derive(Debug, Clone, Copy)]
pub struct ModelInputs<'a> {
    pub p: usize,
    pub external: Option<&'a FeatureGraph>,
    pub boosted: Option<&'a TreeEnsemble>,
    pub forest: Option<&'a TreeEnsemble>,
    pub shape: &'a ModelShape,
    pub seed: u64,
}

fn require<'a, T>(v: Option<&'a T>, kind: ModelKind, what: &str) -> Result<&'a T> {
    v.ok_or_else(|| Error::param(format!("{kind} requires {what}")))
}

pub fn build_model(kind: ModelKind, inputs: &ModelInputs<'_>) -> Result<Model> {
    let p = inputs.p;
    let generated_from = |ens: &TreeEnsemble| -> Result<FeatureGraph> { Ok(extract_feature_graph(ens, p)?.graph) };
    Ok(match kind {
        ModelKind::Enggnn => {
            let external = require(inputs.external, kind, "an external graph")?;
            let generated = generated_from(require(inputs.boosted, kind, "a boosted ensemble")?)?;
            Model::Enggnn(build_enggnn(external, &generated, inputs.shape, inputs.seed)?)
        }
        ModelKind::GedfnE => {
            let g = require(inputs.external, kind, "an external graph")?;
            Model::Neural {
                kind,
                net: build_gedfn(Some(g), p, inputs.shape, inputs.seed)?,
            }
        }
        ModelKind::GedfnXgb | ModelKind::GedfnRf => {
            let ens = if kind == ModelKind::GedfnXgb {
                require(inputs.boosted, kind, "a boosted ensemble")?
            } else {
                require(inputs.forest, kind, "a random forest")?
            };
            Model::Neural {
                kind,
                net: build_gedfn(Some(&generated_from(ens)?), p, inputs.shape, inputs.seed)?,
            }
        }
        ModelKind::Dfn => Model::Neural {
            kind,
            net: build_gedfn(None, p, inputs.shape, inputs.seed)?,
        },
        ModelKind::Gbt => Model::Trees {
            kind,
            ensemble: require(inputs.boosted, kind, "a boosted ensemble")?.clone(),
        },
        ModelKind::Rf => Model::Trees {
            kind,
            ensemble: require(inputs.forest, kind, "a random forest")?.clone(),
        },
    })
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Enggnn(_) => ModelKind::Enggnn,
            Model::Neural { kind, .. } | Model::Trees { kind, .. } => *kind,
        }
    }

    /// `None` for tree ensembles, which are fit before the model is built.
    pub fn trainable_mut(&mut self) -> Option<&mut dyn Trainable> {
        match self {
            Model::Enggnn(m) => Some(m),
            Model::Neural { net, .. } => Some(net),
            Model::Trees { .. } => None,
        }
    }

    /// Probability of the positive class for every row.
    pub fn predict_positive(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        let probs = match self {
            Model::Enggnn(m) => m.predict_proba(x)?,
            Model::Neural { net, .. } => net.predict_proba(x)?,
            Model::Trees { ensemble, .. } => return ensemble.predict_proba(x),
        };
        Ok(probs.column(1).to_vec())
    }

    /// Connection importance for networks, gain importance for boosted trees
    /// and Gini importance for forests.
    pub fn importance(&self) -> Result<ImportanceRanking> {
        match self {
            Model::Enggnn(m) => graph_connection_importance(m),
            Model::Neural { net, .. } => net.importance(),
            Model::Trees { ensemble, .. } => Ok(ImportanceRanking::from_raw(match ensemble.kind {
                EnsembleKind::Boosted => ensemble_gain_importance(ensemble)?,
                EnsembleKind::Forest => forest_gini_importance(ensemble)?,
            })),
        }
    }
}
