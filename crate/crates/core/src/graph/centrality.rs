use std::collections::VecDeque;

use super::FeatureGraph;

/// Closeness centrality on unweighted shortest paths, ignoring direction.
///
/// For a node reaching `r - 1` others with total distance `D`, the score is
/// `((r - 1) / D) · ((r - 1) / (p - 1))`: the usual closeness within its
/// component scaled by the fraction of the graph it can reach. Isolated
/// nodes (and single-node graphs) score 0.
pub fn closeness_centrality(graph: &FeatureGraph) -> Vec<f64> {
    let p = graph.node_count();
    let adj = graph.neighbor_lists();
    let mut dist = vec![usize::MAX; p];
    let mut queue = VecDeque::new();
    (0..p)
        .map(|source| {
            dist.iter_mut().for_each(|d| *d = usize::MAX);
            dist[source] = 0;
            queue.clear();
            queue.push_back(source);
            let (mut total, mut reached) = (0usize, 0usize);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        total += dist[v];
                        reached += 1;
                        queue.push_back(v);
                    }
                }
            }
            if total == 0 || p < 2 {
                0.0
            } else {
                let r = reached as f64;
                (r / total as f64) * (r / (p - 1) as f64)
            }
        })
        .collect()
}

/// Node indices sorted by descending score, ties by ascending index.
pub fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Directedness;
    use proptest::prelude::*;

    /// Floyd-Warshall all-pairs distances, fully independent of the BFS above.
    fn brute_force(graph: &FeatureGraph) -> Vec<f64> {
        let p = graph.node_count();
        let inf = usize::MAX / 4;
        let mut d = vec![vec![inf; p]; p];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0;
        }
        for (u, v) in graph.edges() {
            if u != v {
                d[u][v] = 1;
                d[v][u] = 1;
            }
        }
        for k in 0..p {
            for i in 0..p {
                for j in 0..p {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        (0..p)
            .map(|v| {
                let reach: Vec<usize> = (0..p).filter(|&u| u != v && d[v][u] < inf).map(|u| d[v][u]).collect();
                if reach.is_empty() {
                    return 0.0;
                }
                let r = reach.len() as f64;
                let total: usize = reach.iter().sum();
                (r / total as f64) * (r / (p - 1) as f64)
            })
            .collect()
    }

    #[test]
    fn path_of_three() {
        let g = FeatureGraph::from_edges(3, Directedness::Undirected, [(0, 1), (1, 2)]).unwrap();
        let c = closeness_centrality(&g);
        assert_eq!(c[1], 1.0);
        assert!((c[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(c[0], c[2]);
    }

    #[test]
    fn star_center_dominates() {
        let g = FeatureGraph::from_edges(4, Directedness::Undirected, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let c = closeness_centrality(&g);
        assert!(c[1..].iter().all(|&leaf| c[0] > leaf));
    }

    #[test]
    fn single_node_scores_zero() {
        assert_eq!(
            closeness_centrality(&FeatureGraph::new(1, Directedness::Undirected)),
            vec![0.0]
        );
    }

    #[test]
    fn isolated_node_in_larger_graph() {
        let g = FeatureGraph::from_edges(3, Directedness::Undirected, [(0, 1)]).unwrap();
        let c = closeness_centrality(&g);
        assert_eq!(c[2], 0.0);
        assert!((c[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ranking_breaks_ties_by_index() {
        assert_eq!(rank_descending(&[0.5, 1.0, 0.5, 0.2]), vec![1, 0, 2, 3]);
    }

    proptest! {
        #[test]
        fn matches_floyd_warshall(p in 1usize..50, edges in prop::collection::vec((0usize..50, 0usize..50), 0..120)) {
            let e = edges.into_iter().map(|(u, v)| (u % p, v % p));
            let g = FeatureGraph::from_edges(p, Directedness::Undirected, e).unwrap();
            prop_assert_eq!(closeness_centrality(&g), brute_force(&g));
        }
    }
}
