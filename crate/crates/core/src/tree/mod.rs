//! Gradient-boosted trees and random forests for binary classification, and
//! the directed feature graphs implied by their split structure.

mod boost;
mod builder;
mod forest;

pub use boost::{default_tree_count, fit_gradient_boosted_trees, BoostParams};
pub use forest::{fit_random_forest, ForestParams};

use std::collections::BTreeSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::graph::{merge_graphs, Directedness, FeatureGraph};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Boosting: regularised loss reduction. Forest: weighted Gini decrease.
        gain: f64,
    },
}

/// A binary tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    /// Builds a tree from an arena, checking that every child index is valid
    /// and every non-root node has exactly one parent.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Empty("decision tree"));
        }
        let mut parents = vec![0usize; nodes.len()];
        for node in &nodes {
            if let Node::Split { left, right, .. } = *node {
                for c in [left, right] {
                    if c == 0 || c >= nodes.len() {
                        return Err(Error::param(format!("invalid child index {c}")));
                    }
                    parents[c] += 1;
                }
            }
        }
        if parents[1..].iter().any(|&k| k != 1) {
            return Err(Error::param("tree nodes must each have exactly one parent"));
        }
        Ok(DecisionTree { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn predict_by(&self, value_of: impl Fn(usize) -> f64) -> f64 {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => id = if value_of(feature) <= threshold { left } else { right },
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.predict_by(|f| row[f])
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    fn split_feature(&self, id: usize) -> Option<usize> {
        match self.nodes[id] {
            Node::Split { feature, .. } => Some(feature),
            Node::Leaf { .. } => None,
        }
    }

    /// Parent→child split-feature edges of this tree over `p` features.
    pub fn feature_graph(&self, p: usize) -> Result<FeatureGraph> {
        let mut g = FeatureGraph::new(p, Directedness::Directed);
        for node in &self.nodes {
            if let Node::Split {
                feature, left, right, ..
            } = *node
            {
                for child in [left, right] {
                    if let Some(g2) = self.split_feature(child) {
                        g.add_edge(feature, g2)?;
                    }
                }
            }
        }
        Ok(g)
    }

    fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter_map(|i| self.split_feature(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Boosted,
    Forest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub trees: Vec<DecisionTree>,
    pub kind: EnsembleKind,
    /// Initial margin (log-odds) for boosting; unused by forests.
    pub base_score: f64,
    pub shrinkage: f64,
    pub n_features: usize,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl TreeEnsemble {
    /// Probability of class 1 for one row.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.kind {
            EnsembleKind::Boosted => {
                let margin: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
                sigmoid(self.base_score + self.shrinkage * margin)
            }
            EnsembleKind::Forest => {
                self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
            }
        }
    }

    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch {
                context: "ensemble input",
                expected: self.n_features,
                actual: x.ncols(),
            });
        }
        Ok(x.rows()
            .into_iter()
            .map(|r| match r.as_slice() {
                Some(s) => self.predict_row(s),
                None => self.predict_row(&r.to_vec()),
            })
            .collect())
    }
}

/// Directed feature graph generated by a fitted ensemble, together with the
/// set of features that appear in at least one split.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeGraph {
    pub graph: FeatureGraph,
    pub nodes: BTreeSet<usize>,
}

/// Union over all trees of the parent→child split-feature edges.
///
/// Leaves contribute nothing; a child splitting on the same feature as its
/// parent yields a self-loop.
pub fn extract_feature_graph(ensemble: &TreeEnsemble, p: usize) -> Result<TreeGraph> {
    let per_tree = ensemble
        .trees
        .iter()
        .map(|t| t.feature_graph(p))
        .collect::<Result<Vec<_>>>()?;
    let graph = if per_tree.is_empty() {
        FeatureGraph::new(p, Directedness::Directed)
    } else {
        merge_graphs(&per_tree)?
    };
    let nodes = ensemble.trees.iter().flat_map(|t| t.split_features()).collect();
    Ok(TreeGraph { graph, nodes })
}

fn split_gains(ensemble: &TreeEnsemble) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
    ensemble.trees.iter().enumerate().flat_map(|(t, tree)| {
        tree.nodes.iter().filter_map(move |n| match *n {
            Node::Split { feature, gain, .. } => Some((t, feature, gain)),
            Node::Leaf { .. } => None,
        })
    })
}

/// Mean split gain per feature over every split that uses it (0 if unused).
pub fn ensemble_gain_importance(ensemble: &TreeEnsemble) -> Result<Vec<f64>> {
    if ensemble.kind != EnsembleKind::Boosted {
        return Err(Error::param("gain importance needs a boosted ensemble"));
    }
    let p = ensemble.n_features;
    let (mut sum, mut count) = (vec![0.0; p], vec![0usize; p]);
    for (_, f, gain) in split_gains(ensemble) {
        sum[f] += gain;
        count[f] += 1;
    }
    Ok(sum
        .into_iter()
        .zip(count)
        .map(|(s, c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect())
}

/// Mean decrease in impurity: per-tree sum of weighted Gini decreases,
/// averaged over trees.
pub fn forest_gini_importance(ensemble: &TreeEnsemble) -> Result<Vec<f64>> {
    if ensemble.kind != EnsembleKind::Forest {
        return Err(Error::param("Gini importance needs a random forest"));
    }
    let mut score = vec![0.0; ensemble.n_features];
    for (_, f, gain) in split_gains(ensemble) {
        score[f] += gain;
    }
    let m = ensemble.trees.len().max(1) as f64;
    score.iter_mut().for_each(|s| *s /= m);
    Ok(score)
}
