//! Exact greedy tree growth shared by boosting and forests.
//!
//! Each node owns one index list per feature, sorted by that feature's value.
//! Splitting a node stably partitions every list, so children stay sorted and
//! no node ever re-sorts. Lists of pending nodes are disjoint, which bounds
//! memory by `n × p` indices.

use rand::seq::index::sample;

use super::{DecisionTree, Node};
use crate::seed::Rng;

/// Gains at or below this are treated as "no improvement".
pub(crate) const MIN_GAIN: f64 = 1e-12;

pub(crate) trait Criterion {
    type Stats: Copy + Default;

    fn stats_of(&self, row: usize) -> Self::Stats;
    fn add(acc: &mut Self::Stats, s: Self::Stats);
    fn sub(a: Self::Stats, b: Self::Stats) -> Self::Stats;
    /// Score of a candidate split, `None` if it violates a constraint.
    fn split_gain(&self, parent: Self::Stats, left: Self::Stats, right: Self::Stats) -> Option<f64>;
    fn leaf_value(&self, s: Self::Stats) -> f64;
    fn is_pure(&self, _s: Self::Stats) -> bool {
        false
    }
}

pub(crate) enum FeatureSampling<'a> {
    All,
    Random { mtry: usize, rng: &'a mut Rng },
}

/// Column-major view of the training matrix.
pub(crate) struct Columns {
    pub cols: Vec<Vec<f64>>,
    pub n_rows: usize,
}

impl Columns {
    pub fn from_rows(x: &ndarray::Array2<f64>) -> Self {
        let cols = x.columns().into_iter().map(|c| c.to_vec()).collect();
        Columns {
            cols,
            n_rows: x.nrows(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.cols.len()
    }

    /// Row indices sorted by each feature (ties by row index).
    pub fn presort(&self) -> Vec<Vec<u32>> {
        self.cols
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..self.n_rows as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect()
    }
}

struct Pending {
    id: usize,
    depth: usize,
    lists: Vec<Vec<u32>>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

pub(crate) fn grow_tree<C: Criterion>(
    data: &Columns,
    root_lists: Vec<Vec<u32>>,
    criterion: &C,
    max_depth: Option<usize>,
    mut sampling: FeatureSampling<'_>,
) -> DecisionTree {
    let p = data.n_features();
    let mut nodes: Vec<Node> = vec![Node::Leaf { value: 0.0 }];
    let mut stack = vec![Pending {
        id: 0,
        depth: 0,
        lists: root_lists,
    }];
    let mut goes_left = vec![false; data.n_rows];

    while let Some(Pending { id, depth, lists }) = stack.pop() {
        let mut total = C::Stats::default();
        for &r in &lists[0] {
            C::add(&mut total, criterion.stats_of(r as usize));
        }
        let leaf = Node::Leaf {
            value: criterion.leaf_value(total),
        };
        if lists[0].len() < 2 || max_depth.is_some_and(|d| depth >= d) || criterion.is_pure(total) {
            nodes[id] = leaf;
            continue;
        }

        let candidates: Vec<usize> = match &mut sampling {
            FeatureSampling::All => (0..p).collect(),
            FeatureSampling::Random { mtry, rng } => {
                let mut c = sample(rng, p, (*mtry).min(p)).into_vec();
                c.sort_unstable();
                c
            }
        };

        let mut best: Option<BestSplit> = None;
        for &f in &candidates {
            let col = &data.cols[f];
            let list = &lists[f];
            let mut left = C::Stats::default();
            for w in 0..list.len() - 1 {
                let r = list[w] as usize;
                C::add(&mut left, criterion.stats_of(r));
                let (a, b) = (col[r], col[list[w + 1] as usize]);
                if a >= b {
                    continue;
                }
                let right = C::sub(total, left);
                if let Some(gain) = criterion.split_gain(total, left, right) {
                    if gain > MIN_GAIN && best.as_ref().is_none_or(|bs| gain > bs.gain) {
                        let mid = a + (b - a) / 2.0;
                        let threshold = if mid < b { mid } else { a };
                        best = Some(BestSplit {
                            gain,
                            feature: f,
                            threshold,
                        });
                    }
                }
            }
        }

        let Some(split) = best else {
            nodes[id] = leaf;
            continue;
        };

        let col = &data.cols[split.feature];
        for &r in &lists[0] {
            goes_left[r as usize] = col[r as usize] <= split.threshold;
        }
        let (mut left_lists, mut right_lists) = (Vec::with_capacity(p), Vec::with_capacity(p));
        for list in lists {
            let (l, r): (Vec<u32>, Vec<u32>) = list.into_iter().partition(|&r| goes_left[r as usize]);
            left_lists.push(l);
            right_lists.push(r);
        }
        let (left, right) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            gain: split.gain,
        };
        stack.push(Pending {
            id: right,
            depth: depth + 1,
            lists: right_lists,
        });
        stack.push(Pending {
            id: left,
            depth: depth + 1,
            lists: left_lists,
        });
    }
    DecisionTree { nodes }
}
