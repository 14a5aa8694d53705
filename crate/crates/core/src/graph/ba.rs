use rand::Rng as _;

use super::{Directedness, FeatureGraph};
use crate::seed::Rng;
use crate::{Error, Result};

/// Barabási-Albert preferential attachment.
///
/// Growth starts from a clique on the first `m` nodes. Each later node `i`
/// attaches to `m` distinct earlier nodes chosen with probability
/// proportional to their degree before `i` arrived. Node indices follow
/// arrival order, which the simulator relies on when orienting edge weights.
pub fn generate_ba_graph(p: usize, m: usize, rng: &mut Rng) -> Result<FeatureGraph> {
    if m == 0 || m >= p {
        return Err(Error::param(format!(
            "Barabási-Albert needs 1 <= m < p, got m={m}, p={p}"
        )));
    }
    let mut g = FeatureGraph::new(p, Directedness::Undirected);
    // One entry per edge endpoint: sampling uniformly from this list is
    // sampling proportional to degree.
    let mut endpoints: Vec<usize> = Vec::with_capacity(2 * (m * (m - 1) / 2 + (p - m) * m));
    for u in 0..m {
        for v in (u + 1)..m {
            g.add_edge(u, v)?;
            endpoints.extend([u, v]);
        }
    }
    let mut targets: Vec<usize> = Vec::with_capacity(m);
    for node in m..p {
        targets.clear();
        while targets.len() < m {
            let t = if endpoints.is_empty() {
                // only reachable for m = 1 before the first edge exists
                rng.random_range(0..node)
            } else {
                endpoints[rng.random_range(0..endpoints.len())]
            };
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            g.add_edge(t, node)?;
            endpoints.extend([t, node]);
        }
    }
    Ok(g)
}
