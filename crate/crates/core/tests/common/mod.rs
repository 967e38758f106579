#![allow(dead_code)]

use cascade_nmp::rng::stream;
use cascade_nmp::{Network, NodeSet};
use rand::Rng;

/// Random labelled tree: node `v` attaches to a uniform earlier node.
pub fn random_tree(n: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = stream(seed, 0);
    (1..n).map(|v| (rng.random_range(0..v), v)).collect()
}

/// Tree plus `extra` random chords, no duplicates.
pub fn random_graph(n: usize, extra: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut edges = random_tree(n, seed);
    let mut rng = stream(seed, 1);
    let mut tries = 0;
    while edges.len() < n - 1 + extra && tries < 10_000 {
        tries += 1;
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        let e = (a.min(b), a.max(b));
        if a != b && !edges.iter().any(|&(u, v)| (u.min(v), u.max(v)) == e) {
            edges.push(e);
        }
    }
    edges
}

/// Edge probabilities drawn uniformly from `[lo, hi]`.
pub fn with_random_p(n: usize, edges: &[(usize, usize)], lo: f64, hi: f64, seed: u64) -> Network {
    let mut rng = stream(seed, 2);
    let weighted: Vec<_> = edges
        .iter()
        .map(|&(u, v)| (u, v, rng.random_range(lo..=hi)))
        .collect();
    Network::from_edges(n, &weighted).unwrap()
}

pub fn set(nodes: &[usize], n: usize) -> NodeSet {
    NodeSet::new(nodes.iter().copied(), n).unwrap()
}
