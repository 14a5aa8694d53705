//! Feature graphs over the columns of a feature matrix.

mod ba;
mod centrality;

pub use ba::generate_ba_graph;
pub use centrality::{closeness_centrality, rank_descending};

use std::collections::BTreeSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directedness {
    Directed,
    Undirected,
}

/// A graph over `node_count` features.
///
/// Directed edges `(u, v)` mean `u → v`. Undirected edges are stored once with
/// `u <= v`. Self-loops are allowed and recorded once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureGraph {
    node_count: usize,
    directedness: Directedness,
    edges: BTreeSet<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    names: Option<Vec<String>>,
}

impl FeatureGraph {
    pub fn new(node_count: usize, directedness: Directedness) -> Self {
        FeatureGraph {
            node_count,
            directedness,
            edges: BTreeSet::new(),
            names: None,
        }
    }

    pub fn from_edges(
        node_count: usize,
        directedness: Directedness,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut g = FeatureGraph::new(node_count, directedness);
        for (u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    /// Every ordered pair (directed) or every unordered pair (undirected) of
    /// distinct nodes.
    pub fn complete(node_count: usize, directedness: Directedness) -> Self {
        let mut g = FeatureGraph::new(node_count, directedness);
        for u in 0..node_count {
            for v in 0..node_count {
                if u != v && (directedness == Directedness::Directed || u < v) {
                    g.edges.insert((u, v));
                }
            }
        }
        g
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.node_count {
            return Err(Error::DimensionMismatch {
                context: "graph node names",
                expected: self.node_count,
                actual: names.len(),
            });
        }
        self.names = Some(names);
        Ok(self)
    }

    /// Adds an edge; returns `false` if it was already present.
    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<bool> {
        if u >= self.node_count || v >= self.node_count {
            return Err(Error::Graph(format!(
                "edge ({u}, {v}) out of range for {} nodes",
                self.node_count
            )));
        }
        let key = match self.directedness {
            Directedness::Directed => (u, v),
            Directedness::Undirected => (u.min(v), u.max(v)),
        };
        Ok(self.edges.insert(key))
    }

    /// Re-checks the invariants of a graph that did not come through
    /// [`FeatureGraph::add_edge`], e.g. one read from disk.
    pub fn validate(&self) -> Result<()> {
        if let Some(names) = &self.names {
            if names.len() != self.node_count {
                return Err(Error::DimensionMismatch {
                    context: "graph node names",
                    expected: self.node_count,
                    actual: names.len(),
                });
            }
        }
        for &(u, v) in &self.edges {
            if u >= self.node_count || v >= self.node_count {
                return Err(Error::Graph(format!(
                    "edge ({u}, {v}) out of range for {} nodes",
                    self.node_count
                )));
            }
            if self.directedness == Directedness::Undirected && u > v {
                return Err(Error::Graph(format!(
                    "undirected edge ({u}, {v}) not stored as (min, max)"
                )));
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn directedness(&self) -> Directedness {
        self.directedness
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        match self.directedness {
            Directedness::Directed => self.edges.contains(&(u, v)),
            Directedness::Undirected => self.edges.contains(&(u.min(v), u.max(v))),
        }
    }

    /// Neighbour lists ignoring direction and self-loops, sorted ascending.
    pub fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.node_count];
        for &(u, v) in &self.edges {
            if u != v {
                adj[u].insert(v);
                adj[v].insert(u);
            }
        }
        adj.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Undirected degree (self-loops excluded).
    pub fn degrees(&self) -> Vec<usize> {
        self.neighbor_lists().iter().map(Vec::len).collect()
    }

    /// Nodes touched by at least one edge.
    pub fn incident_nodes(&self) -> BTreeSet<usize> {
        self.edges.iter().flat_map(|&(u, v)| [u, v]).collect()
    }
}

/// `Ã = A + I` clamped to {0, 1}. Row `u`, column `v` is 1 when `u → v` is an
/// edge (both orientations for undirected graphs) or `u == v`.
pub fn add_self_loops(graph: &FeatureGraph) -> Array2<f64> {
    let p = graph.node_count;
    let mut a = Array2::eye(p);
    for &(u, v) in &graph.edges {
        a[[u, v]] = 1.0;
        if graph.directedness == Directedness::Undirected {
            a[[v, u]] = 1.0;
        }
    }
    a
}

/// Union of several directed graphs over the same node universe.
pub fn merge_graphs(graphs: &[FeatureGraph]) -> Result<FeatureGraph> {
    let first = graphs.first().ok_or(Error::Empty("graph list"))?;
    let mut merged = FeatureGraph::new(first.node_count, first.directedness);
    for g in graphs {
        if g.directedness != first.directedness {
            return Err(Error::Graph("cannot merge graphs of mixed directedness".into()));
        }
        if g.node_count != first.node_count {
            return Err(Error::Graph(format!(
                "cannot merge graphs over {} and {} nodes",
                first.node_count, g.node_count
            )));
        }
        merged.edges.extend(g.edges.iter().copied());
    }
    merged.names = first.names.clone();
    Ok(merged)
}

/// `S ∪ N(S)`, with neighbours taken in either edge direction.
pub fn one_hop_expand(graph: &FeatureGraph, seeds: &BTreeSet<usize>) -> BTreeSet<usize> {
    let mut out = seeds.clone();
    for &(u, v) in &graph.edges {
        if seeds.contains(&u) {
            out.insert(v);
        }
        if seeds.contains(&v) {
            out.insert(u);
        }
    }
    out
}
