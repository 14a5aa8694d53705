use log::warn;
use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::boost::class_prior;
use super::builder::{grow_tree, Columns, Criterion, FeatureSampling};
use super::{EnsembleKind, TreeEnsemble};
use crate::seed::{derive_seed, rng_from_seed};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestParams {
    /// `None` means `max(1, round(0.2 p))`, the same count used for boosting.
    pub n_trees: Option<usize>,
    /// `None` grows trees until leaves are pure.
    pub max_depth: Option<usize>,
    /// Candidate features per split; `None` means `floor(sqrt(p))`.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: None,
            max_depth: None,
            mtry: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

struct Gini<'a> {
    labels: &'a [u8],
    weights: &'a [f64],
    root_weight: f64,
}

fn gini((w0, w1): (f64, f64)) -> f64 {
    let w = w0 + w1;
    if w <= 0.0 {
        return 0.0;
    }
    let (a, b) = (w0 / w, w1 / w);
    1.0 - a * a - b * b
}

impl Criterion for Gini<'_> {
    type Stats = (f64, f64);

    fn stats_of(&self, row: usize) -> (f64, f64) {
        let w = self.weights[row];
        if self.labels[row] == 1 {
            (0.0, w)
        } else {
            (w, 0.0)
        }
    }

    fn add(acc: &mut (f64, f64), s: (f64, f64)) {
        acc.0 += s.0;
        acc.1 += s.1;
    }

    fn sub(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
        (a.0 - b.0, a.1 - b.1)
    }

    /// Weighted impurity decrease `(W / W_root) · (G - W_l/W G_l - W_r/W G_r)`.
    fn split_gain(&self, parent: (f64, f64), l: (f64, f64), r: (f64, f64)) -> Option<f64> {
        let w = parent.0 + parent.1;
        let (wl, wr) = (l.0 + l.1, r.0 + r.1);
        if wl <= 0.0 || wr <= 0.0 {
            return None;
        }
        let decrease = gini(parent) - (wl / w) * gini(l) - (wr / w) * gini(r);
        Some(w / self.root_weight * decrease)
    }

    fn leaf_value(&self, (w0, w1): (f64, f64)) -> f64 {
        if w0 + w1 > 0.0 {
            w1 / (w0 + w1)
        } else {
            0.0
        }
    }

    fn is_pure(&self, (w0, w1): (f64, f64)) -> bool {
        w0 == 0.0 || w1 == 0.0
    }
}

/// Random forest of Gini trees. Tree `k` draws its bootstrap sample and split
/// candidates from a stream derived from `(seed, k)`, so forests are
/// reproducible regardless of how trees are scheduled.
pub fn fit_random_forest(x: &Array2<f64>, y: &[u8], params: &ForestParams) -> Result<TreeEnsemble> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "forest labels",
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    if x.nrows() < 2 {
        return Err(Error::Empty("forest training data (need at least 2 rows)"));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::InvalidLabels("forest labels must be 0/1".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("forest training data"));
    }
    let (n, p) = x.dim();
    let n_trees = params.n_trees.unwrap_or_else(|| super::default_tree_count(p));
    if n_trees == 0 {
        return Err(Error::param("n_trees must be at least 1"));
    }
    let mtry = params
        .mtry
        .unwrap_or(((p as f64).sqrt().floor() as usize).max(1))
        .clamp(1, p);
    if y.iter().all(|&v| v == y[0]) {
        warn!("random forest on single-class labels; every tree is a single leaf");
    }
    let prior = class_prior(y);
    let data = Columns::from_rows(x);
    let sorted = data.presort();
    let mut trees = Vec::with_capacity(n_trees);
    for k in 0..n_trees {
        let mut rng = rng_from_seed(derive_seed(params.seed, k as u64, "forest-tree"));
        let mut weights = vec![0.0; n];
        if params.bootstrap {
            for _ in 0..n {
                weights[rng.random_range(0..n)] += 1.0;
            }
        } else {
            weights.fill(1.0);
        }
        let root_lists: Vec<Vec<u32>> = sorted
            .iter()
            .map(|l| l.iter().copied().filter(|&r| weights[r as usize] > 0.0).collect())
            .collect();
        let crit = Gini {
            labels: y,
            weights: &weights,
            root_weight: weights.iter().sum(),
        };
        let sampling = if mtry >= p {
            FeatureSampling::All
        } else {
            FeatureSampling::Random { mtry, rng: &mut rng }
        };
        trees.push(grow_tree(&data, root_lists, &crit, params.max_depth, sampling));
    }
    Ok(TreeEnsemble {
        trees,
        kind: EnsembleKind::Forest,
        base_score: prior,
        shrinkage: 1.0,
        n_features: p,
    })
}
