//! The dual-graph classifier, its single-branch ablations and connection
//! importance.

mod baseline;
mod checkpoint;

pub use baseline::{build_gedfn, build_model, GraphNetwork, Model, ModelInputs, ModelKind};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};

use ndarray::{concatenate, s, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::graph::{add_self_loops, FeatureGraph};
use crate::metrics::percentile_rank;
use crate::nn::{
    cross_entropy_grad, cross_entropy_loss, one_hot, Activation, Layer, LayerGrad, Network, Stack, StackCache,
    Trainable,
};
use crate::seed::{rng_from_seed, Rng};
use crate::{Error, Result};

/// Hidden widths after the `p`-wide masked layer, and of the fusion head.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelShape {
    pub branch_hidden: Vec<usize>,
    pub head_hidden: Vec<usize>,
}

impl Default for ModelShape {
    fn default() -> Self {
        ModelShape {
            branch_hidden: vec![64, 16],
            head_hidden: vec![16],
        }
    }
}

impl ModelShape {
    pub fn validate(&self) -> Result<()> {
        if self.branch_hidden.iter().chain(&self.head_hidden).any(|&w| w == 0) {
            return Err(Error::param("layer widths must be positive"));
        }
        Ok(())
    }
}

/// Masked `p × p` ReLU layer followed by dense ReLU layers of the given widths.
pub(crate) fn masked_stack(mask: Option<Array2<f64>>, p: usize, hidden: &[usize], rng: &mut Rng) -> Result<Vec<Layer>> {
    let first = match mask {
        Some(m) => Layer::init_masked(m, Activation::Relu, rng)?,
        None => Layer::init(p, p, Activation::Relu, rng),
    };
    let mut layers = vec![first];
    let mut prev = p;
    for &w in hidden {
        layers.push(Layer::init(prev, w, Activation::Relu, rng));
        prev = w;
    }
    Ok(layers)
}

/// Two graph-masked branches whose last hidden layers are concatenated
/// (external first) and fed into a dense softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct EnggnnModel {
    external: FeatureGraph,
    generated: FeatureGraph,
    branch_e: Stack,
    branch_g: Stack,
    head: Network,
}

/// Initialises branch_e, branch_g and the head, in that order, from one
/// stream seeded with `seed`.
pub fn build_enggnn(
    external: &FeatureGraph,
    generated: &FeatureGraph,
    shape: &ModelShape,
    seed: u64,
) -> Result<EnggnnModel> {
    shape.validate()?;
    let p = external.node_count();
    if generated.node_count() != p {
        return Err(Error::DimensionMismatch {
            context: "generated graph node count",
            expected: p,
            actual: generated.node_count(),
        });
    }
    if p == 0 {
        return Err(Error::Empty("feature graph"));
    }
    let mut rng = rng_from_seed(seed);
    let branch_e = Stack::new(masked_stack(
        Some(add_self_loops(external)),
        p,
        &shape.branch_hidden,
        &mut rng,
    )?)?;
    let branch_g = Stack::new(masked_stack(
        Some(add_self_loops(generated)),
        p,
        &shape.branch_hidden,
        &mut rng,
    )?)?;
    let mut prev = branch_e.out_dim() + branch_g.out_dim();
    let mut head = Vec::new();
    for &w in &shape.head_hidden {
        head.push(Layer::init(prev, w, Activation::Relu, &mut rng));
        prev = w;
    }
    head.push(Layer::init(prev, 2, Activation::Softmax, &mut rng));
    EnggnnModel::from_parts(
        external.clone(),
        generated.clone(),
        branch_e,
        branch_g,
        Network::new(head)?,
    )
}

struct DualCache {
    e: StackCache,
    g: StackCache,
    head: StackCache,
}

impl EnggnnModel {
    /// Assembles a model from trained parts, checking that each branch's
    /// first layer is masked by its graph and that the widths line up.
    pub fn from_parts(
        external: FeatureGraph,
        generated: FeatureGraph,
        branch_e: Stack,
        branch_g: Stack,
        head: Network,
    ) -> Result<Self> {
        for (graph, branch, name) in [(&external, &branch_e, "external"), (&generated, &branch_g, "generated")] {
            let mask = add_self_loops(graph);
            if branch.layers()[0].mask() != Some(&mask) {
                return Err(Error::param(format!(
                    "{name} branch first layer is not masked by its graph"
                )));
            }
        }
        let head_in = branch_e.out_dim() + branch_g.out_dim();
        if head.stack().in_dim() != head_in {
            return Err(Error::DimensionMismatch {
                context: "head input width",
                expected: head_in,
                actual: head.stack().in_dim(),
            });
        }
        Ok(EnggnnModel {
            external,
            generated,
            branch_e,
            branch_g,
            head,
        })
    }

    pub fn external_graph(&self) -> &FeatureGraph {
        &self.external
    }

    pub fn generated_graph(&self) -> &FeatureGraph {
        &self.generated
    }

    pub fn branch_e(&self) -> &Stack {
        &self.branch_e
    }

    pub fn branch_g(&self) -> &Stack {
        &self.branch_g
    }

    pub fn head(&self) -> &Network {
        &self.head
    }

    pub fn branch_e_mut(&mut self) -> &mut Stack {
        &mut self.branch_e
    }

    pub fn branch_g_mut(&mut self) -> &mut Stack {
        &mut self.branch_g
    }

    pub fn head_mut(&mut self) -> &mut Network {
        &mut self.head
    }

    fn forward(&self, x: &Array2<f64>, mut dropout: Option<(f64, &mut Rng)>) -> Result<DualCache> {
        let e = self
            .branch_e
            .forward(x, dropout.as_mut().map(|(r, g)| (*r, &mut **g)))?;
        let g = self
            .branch_g
            .forward(x, dropout.as_mut().map(|(r, g)| (*r, &mut **g)))?;
        let hc = concatenate(Axis(1), &[e.output().view(), g.output().view()])?;
        let head = self.head.forward(&hc, dropout)?;
        Ok(DualCache { e, g, head })
    }

    /// `H_C = [H_e ∥ H_g]` in inference mode.
    pub fn concat_embedding(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(x, None)?.head.input)
    }
}

impl Trainable for EnggnnModel {
    fn input_dim(&self) -> usize {
        self.branch_e.in_dim()
    }

    fn predict_proba(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(x, None)?.head.output().clone())
    }

    fn loss_and_gradients(
        &self,
        x: &Array2<f64>,
        labels: &[u8],
        dropout: Option<(f64, &mut Rng)>,
    ) -> Result<(f64, Vec<LayerGrad>)> {
        let y = one_hot(labels)?;
        let cache = self.forward(x, dropout)?;
        let probs = cache.head.output();
        let loss = cross_entropy_loss(probs, &y)?;
        let (head_grads, d_hc) = self
            .head
            .stack()
            .backward(&cache.head, &cross_entropy_grad(probs, &y), true);
        let d_hc = d_hc.expect("input gradient was requested");
        let split = self.branch_e.out_dim();
        let (ge, _) = self
            .branch_e
            .backward(&cache.e, &d_hc.slice(s![.., ..split]).to_owned(), false);
        let (gg, _) = self
            .branch_g
            .backward(&cache.g, &d_hc.slice(s![.., split..]).to_owned(), false);
        Ok((loss, ge.into_iter().chain(gg).chain(head_grads).collect()))
    }

    fn layers(&self) -> Vec<&Layer> {
        self.branch_e
            .layers()
            .iter()
            .chain(self.branch_g.layers())
            .chain(self.head.layers())
            .collect()
    }

    fn layers_mut(&mut self) -> Vec<&mut Layer> {
        let head = self.head.layers_mut();
        self.branch_e
            .layers_mut()
            .iter_mut()
            .chain(self.branch_g.layers_mut().iter_mut())
            .chain(head)
            .collect()
    }
}

/// Per-feature scores and their percentile-rank pseudo-probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub raw: Vec<f64>,
    pub percentile: Vec<f64>,
}

impl ImportanceRanking {
    pub fn from_raw(raw: Vec<f64>) -> Self {
        let percentile = percentile_rank(&raw);
        ImportanceRanking { raw, percentile }
    }
}

/// Row sum plus column sum of `|W ⊙ 1[Ã = 1]|` for every feature `j`.
/// The diagonal entry appears in both sums.
pub fn masked_connection_scores(weight: &Array2<f64>, mask: &Array2<f64>) -> Result<Vec<f64>> {
    let p = weight.nrows();
    if weight.dim() != (p, p) || mask.dim() != (p, p) {
        return Err(Error::DimensionMismatch {
            context: "connection importance",
            expected: p,
            actual: weight.ncols(),
        });
    }
    let a = weight.mapv(f64::abs) * mask.mapv(|m| if m == 1.0 { 1.0 } else { 0.0 });
    let rows = a.sum_axis(Axis(1));
    let cols = a.sum_axis(Axis(0));
    Ok((0..p).map(|j| rows[j] + cols[j]).collect())
}

fn first_layer_scores(layer: &Layer) -> Result<Vec<f64>> {
    let ones;
    let mask = match layer.mask() {
        Some(m) => m,
        None => {
            ones = Array2::ones(layer.weight().dim());
            &ones
        }
    };
    masked_connection_scores(layer.weight(), mask)
}

/// Connection importance summed over the external and generated branches.
pub fn graph_connection_importance(model: &EnggnnModel) -> Result<ImportanceRanking> {
    let e = first_layer_scores(&model.branch_e.layers()[0])?;
    let g = first_layer_scores(&model.branch_g.layers()[0])?;
    Ok(ImportanceRanking::from_raw(
        e.iter().zip(&g).map(|(a, b)| a + b).collect(),
    ))
}

/// Connection importance of a single-branch network; a dense first layer is
/// scored as if masked by all ones.
pub fn network_connection_importance(net: &Network) -> Result<ImportanceRanking> {
    Ok(ImportanceRanking::from_raw(first_layer_scores(
        &net.stack().layers()[0],
    )?))
}
