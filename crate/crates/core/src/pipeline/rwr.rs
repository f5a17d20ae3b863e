use log::warn;
use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{config, Result};
use crate::graph::UndirectedGraph;

/// Ego subgraph collected by a random walk with restart.
#[derive(Clone, Debug, PartialEq)]
pub struct RwrSample {
    /// Visited base-graph nodes, ascending.
    pub nodes: Vec<usize>,
    /// Position of the ego within `nodes`.
    pub ego: usize,
    pub graph: UndirectedGraph,
    /// The step cap expired before `n_target` distinct nodes were seen.
    pub truncated: bool,
}

/// Step budget per requested node.
pub const STEP_CAP_PER_NODE: usize = 50;

pub fn rwr_sample<R: Rng + ?Sized>(
    g: &UndirectedGraph,
    ego: usize,
    n_target: usize,
    restart_p: f64,
    rng: &mut R,
) -> Result<RwrSample> {
    let s = rwr_sample_lists(g, &g.neighbour_lists(), ego, n_target, restart_p, rng)?;
    if s.truncated {
        warn!("random walk from {ego} reached {} of {n_target} nodes", s.nodes.len());
    }
    Ok(s)
}

/// As [`rwr_sample`] with precomputed neighbour lists of `g`; truncation is
/// only flagged, not logged.
pub fn rwr_sample_lists<R: Rng + ?Sized>(
    g: &UndirectedGraph,
    neighbours: &[Vec<usize>],
    ego: usize,
    n_target: usize,
    restart_p: f64,
    rng: &mut R,
) -> Result<RwrSample> {
    if ego >= g.n() {
        return Err(config(format!("ego {ego} not in graph of {} nodes", g.n())));
    }
    if !(0.0..1.0).contains(&restart_p) {
        return Err(config(format!("restart probability {restart_p} outside [0, 1)")));
    }
    if n_target == 0 {
        return Err(config("target subgraph size must be positive"));
    }
    let mut seen = vec![false; g.n()];
    seen[ego] = true;
    let mut visited = 1;
    let mut current = ego;
    let cap = STEP_CAP_PER_NODE * n_target;
    let mut steps = 0;
    while visited < n_target && steps < cap {
        steps += 1;
        if rng.random::<f64>() < restart_p {
            current = ego;
            continue;
        }
        match neighbours[current].choose(rng) {
            Some(&next) => {
                current = next;
                if !seen[next] {
                    seen[next] = true;
                    visited += 1;
                }
            }
            None => current = ego,
        }
    }
    let nodes: Vec<usize> = (0..g.n()).filter(|&v| seen[v]).collect();
    let truncated = nodes.len() < n_target;
    let ego_pos = nodes.binary_search(&ego).expect("ego is always visited");
    Ok(RwrSample { graph: g.induced(&nodes), nodes, ego: ego_pos, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use auginf_numerics::rng::stream;

    #[test]
    fn complete_graph_reaches_target() {
        let edges: Vec<_> = (0..10).flat_map(|i| (i + 1..10).map(move |j| (i, j))).collect();
        let g = UndirectedGraph::from_edges(10, &edges).unwrap();
        let s = rwr_sample(&g, 3, 5, 0.8, &mut stream(1, &[])).unwrap();
        assert_eq!(s.nodes.len(), 5);
        assert!(s.nodes.contains(&3));
        assert_eq!(s.nodes[s.ego], 3);
        assert!(!s.truncated);
    }

    #[test]
    fn isolated_ego_yields_singleton_with_warning_flag() {
        let g = UndirectedGraph::from_edges(4, &[(1, 2)]).unwrap();
        let s = rwr_sample(&g, 0, 3, 0.5, &mut stream(1, &[])).unwrap();
        assert_eq!(s.nodes, vec![0]);
        assert!(s.truncated);
    }

    // Enumeration: a star centred at the ego has only leaves to offer, so any
    // 3 distinct leaves are a valid answer.
    #[test]
    fn star_center_collects_leaves() {
        let g = UndirectedGraph::from_edges(7, &(1..7).map(|l| (0, l)).collect::<Vec<_>>()).unwrap();
        for seed in 0..20 {
            let s = rwr_sample(&g, 0, 4, 0.8, &mut stream(seed, &[])).unwrap();
            assert_eq!(s.nodes.len(), 4);
            assert_eq!(s.nodes[0], 0);
            assert_eq!(s.graph.edge_count(), 3);
        }
    }
}
