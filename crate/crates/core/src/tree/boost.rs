use log::warn;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::builder::{grow_tree, Columns, Criterion, FeatureSampling};
use super::{sigmoid, DecisionTree, EnsembleKind, Node, TreeEnsemble};
use crate::{Error, Result};

/// Number of boosted trees tied to the feature count: `max(1, round(0.2 p))`.
pub fn default_tree_count(p: usize) -> usize {
    ((0.2 * p as f64).round() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoostParams {
    /// `None` means [`default_tree_count`] of the training feature count.
    pub n_trees: Option<usize>,
    pub max_depth: usize,
    pub shrinkage: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    /// Exact greedy boosting without row/column subsampling draws no random
    /// numbers; the seed is carried for provenance only.
    pub seed: u64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_trees: None,
            max_depth: 3,
            shrinkage: 0.3,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            seed: 0,
        }
    }
}

struct Logistic<'a> {
    grad: &'a [f64],
    hess: &'a [f64],
    lambda: f64,
    gamma: f64,
    min_child_weight: f64,
}

impl Criterion for Logistic<'_> {
    type Stats = (f64, f64);

    fn stats_of(&self, row: usize) -> (f64, f64) {
        (self.grad[row], self.hess[row])
    }

    fn add(acc: &mut (f64, f64), s: (f64, f64)) {
        acc.0 += s.0;
        acc.1 += s.1;
    }

    fn sub(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
        (a.0 - b.0, a.1 - b.1)
    }

    fn split_gain(&self, parent: (f64, f64), l: (f64, f64), r: (f64, f64)) -> Option<f64> {
        if l.1 < self.min_child_weight || r.1 < self.min_child_weight {
            return None;
        }
        let score = |(g, h): (f64, f64)| g * g / (h + self.lambda);
        Some(0.5 * (score(l) + score(r) - score(parent)) - self.gamma)
    }

    fn leaf_value(&self, (g, h): (f64, f64)) -> f64 {
        -g / (h + self.lambda)
    }
}

fn check_labels(x: &Array2<f64>, y: &[u8]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "tree labels",
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    if x.nrows() < 2 {
        return Err(Error::Empty("tree training data (need at least 2 rows)"));
    }
    if let Some(bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::InvalidLabels(format!("label {bad} is not binary")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("tree training data"));
    }
    Ok(())
}

pub(crate) fn class_prior(y: &[u8]) -> f64 {
    y.iter().map(|&v| f64::from(v)).sum::<f64>() / y.len() as f64
}

/// Second-order boosting of the logistic loss with exact greedy splits.
///
/// The initial margin is the log-odds of the training prior. Single-class
/// labels yield a one-leaf ensemble at that (clamped) prior.
pub fn fit_gradient_boosted_trees(x: &Array2<f64>, y: &[u8], params: &BoostParams) -> Result<TreeEnsemble> {
    check_labels(x, y)?;
    let non_negative = |v: f64| v >= 0.0;
    if params.shrinkage.is_nan()
        || params.shrinkage <= 0.0
        || !non_negative(params.lambda)
        || !non_negative(params.min_child_weight)
    {
        return Err(Error::param(
            "boosting needs shrinkage > 0, lambda >= 0, min_child_weight >= 0",
        ));
    }
    let (n, p) = x.dim();
    let n_trees = params.n_trees.unwrap_or_else(|| default_tree_count(p));
    if n_trees == 0 {
        return Err(Error::param("n_trees must be at least 1"));
    }
    let prior = class_prior(y).clamp(1e-6, 1.0 - 1e-6);
    let base_score = (prior / (1.0 - prior)).ln();
    let mut ensemble = TreeEnsemble {
        trees: Vec::with_capacity(n_trees),
        kind: EnsembleKind::Boosted,
        base_score,
        shrinkage: params.shrinkage,
        n_features: p,
    };
    if y.iter().all(|&v| v == y[0]) {
        warn!("boosting on single-class labels; returning constant ensemble");
        ensemble.trees.push(DecisionTree {
            nodes: vec![Node::Leaf { value: 0.0 }],
        });
        return Ok(ensemble);
    }

    let data = Columns::from_rows(x);
    let sorted = data.presort();
    let mut margin = vec![base_score; n];
    let (mut grad, mut hess) = (vec![0.0; n], vec![0.0; n]);
    for _ in 0..n_trees {
        for i in 0..n {
            let prob = sigmoid(margin[i]);
            grad[i] = prob - f64::from(y[i]);
            hess[i] = (prob * (1.0 - prob)).max(1e-16);
        }
        let crit = Logistic {
            grad: &grad,
            hess: &hess,
            lambda: params.lambda,
            gamma: params.gamma,
            min_child_weight: params.min_child_weight,
        };
        let tree = grow_tree(
            &data,
            sorted.clone(),
            &crit,
            Some(params.max_depth),
            FeatureSampling::All,
        );
        for (i, m) in margin.iter_mut().enumerate() {
            *m += params.shrinkage * tree.predict_by(|f| data.cols[f][i]);
        }
        ensemble.trees.push(tree);
    }
    Ok(ensemble)
}
