//! Radius-`r` neighborhoods built from short cycles through each node, their
//! pairwise differences, and the index of messages they induce.

use std::collections::{HashMap, HashSet};
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::netgraph::{EdgeId, Network, NodeId, NodeSet};

pub const DEFAULT_MAX_RADIUS: usize = 4;

/// Edges incident to `focal` plus every edge on a simple cycle through
/// `focal` of length at most `radius + 2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Neighborhood {
    pub focal: NodeId,
    pub radius: usize,
    /// Sorted edge ids.
    pub edge_set: Vec<EdgeId>,
    pub node_set: NodeSet,
}

impl Neighborhood {
    pub fn contains_edge(&self, edge: EdgeId) -> bool {
        self.edge_set.binary_search(&edge).is_ok()
    }
}

/// Edges of `N_focal` that are not in `N_excluded_owner`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionalNeighborhood {
    pub focal: NodeId,
    pub excluded_owner: NodeId,
    pub radius: usize,
    pub edge_set: Vec<EdgeId>,
}

pub fn build_neighborhood(
    net: &Network,
    focal: NodeId,
    radius: usize,
    max_radius: usize,
) -> Result<Neighborhood> {
    net.check_node(focal)?;
    if radius > max_radius {
        return Err(Error::RadiusTooLarge {
            radius,
            cap: max_radius,
        });
    }
    let mut in_set = vec![false; net.edge_count()];
    for &(_, e) in net.neighbors(focal) {
        in_set[e] = true;
    }
    let max_len = radius + 2;
    if max_len >= 3 {
        let dist = truncated_distances(net, focal, max_len);
        let mut search = CycleSearch {
            net,
            focal,
            max_len,
            dist: &dist,
            on_path: HashSet::new(),
            path: Vec::new(),
            in_set: &mut in_set,
        };
        search.extend(focal, 0);
    }
    let edge_set: Vec<EdgeId> = (0..net.edge_count()).filter(|&e| in_set[e]).collect();
    let node_set = NodeSet::new(
        std::iter::once(focal).chain(edge_set.iter().flat_map(|&e| {
            let (u, v) = net.endpoints(e);
            [u, v]
        })),
        net.node_count(),
    )?;
    Ok(Neighborhood {
        focal,
        radius,
        edge_set,
        node_set,
    })
}

fn truncated_distances(net: &Network, source: NodeId, limit: usize) -> HashMap<NodeId, usize> {
    let mut dist = HashMap::new();
    dist.insert(source, 0);
    let mut frontier = vec![source];
    for level in 1..=limit {
        let mut next = Vec::new();
        for &u in &frontier {
            for &(v, _) in net.neighbors(u) {
                if !dist.contains_key(&v) {
                    dist.insert(v, level);
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
    dist
}

struct CycleSearch<'a> {
    net: &'a Network,
    focal: NodeId,
    max_len: usize,
    dist: &'a HashMap<NodeId, usize>,
    on_path: HashSet<NodeId>,
    path: Vec<EdgeId>,
    in_set: &'a mut [bool],
}

impl CycleSearch<'_> {
    /// Depth-first enumeration of simple paths from the focal node; a path
    /// that can close back onto the focal node marks all its edges.
    fn extend(&mut self, node: NodeId, depth: usize) {
        for &(next, edge) in self.net.neighbors(node) {
            if next == self.focal {
                if depth + 1 >= 3 {
                    for &e in &self.path {
                        self.in_set[e] = true;
                    }
                    self.in_set[edge] = true;
                }
                continue;
            }
            if self.on_path.contains(&next) {
                continue;
            }
            let back = match self.dist.get(&next) {
                Some(&d) => d,
                None => continue,
            };
            if depth + 1 + back > self.max_len {
                continue;
            }
            self.on_path.insert(next);
            self.path.push(edge);
            self.extend(next, depth + 1);
            self.path.pop();
            self.on_path.remove(&next);
        }
    }
}

pub fn build_conditional(
    owner: &Neighborhood,
    excluded: &Neighborhood,
) -> Result<ConditionalNeighborhood> {
    if owner.focal == excluded.focal {
        return Err(Error::Usage(format!(
            "conditional neighborhood of node {} against itself",
            owner.focal
        )));
    }
    if owner.radius != excluded.radius {
        return Err(Error::Usage(format!(
            "radius mismatch: {} vs {}",
            owner.radius, excluded.radius
        )));
    }
    let edge_set = owner
        .edge_set
        .iter()
        .copied()
        .filter(|&e| !excluded.contains_edge(e))
        .collect();
    Ok(ConditionalNeighborhood {
        focal: owner.focal,
        excluded_owner: excluded.focal,
        radius: owner.radius,
        edge_set,
    })
}

/// Neighborhoods of every node at one radius.
#[derive(Clone, Debug)]
pub struct Neighborhoods {
    pub radius: usize,
    hoods: Vec<Neighborhood>,
}

impl Neighborhoods {
    pub fn build(net: &Network, radius: usize, max_radius: usize) -> Result<Self> {
        let hoods = (0..net.node_count())
            .into_par_iter()
            .map(|i| build_neighborhood(net, i, radius, max_radius))
            .collect::<Result<Vec<_>>>()?;
        Ok(Neighborhoods { radius, hoods })
    }

    pub fn get(&self, node: NodeId) -> &Neighborhood {
        &self.hoods[node]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Neighborhood> {
        self.hoods.iter()
    }

    pub fn len(&self) -> usize {
        self.hoods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hoods.is_empty()
    }

    /// Support of the message `(k, i)`: edges of `N_k` outside `N_i`.
    pub fn conditional(&self, focal: NodeId, excluded: NodeId) -> Result<ConditionalNeighborhood> {
        build_conditional(&self.hoods[focal], &self.hoods[excluded])
    }

    /// CSV with one row per node: `node,edges,nodes`.
    pub fn write_sizes_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["node", "edges", "nodes"])?;
        for hood in &self.hoods {
            writer.write_record([
                hood.focal.to_string(),
                hood.edge_set.len().to_string(),
                hood.node_set.len().to_string(),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }
}

pub type MessageId = usize;

/// Every message `(k, i)`, read "the probability that `k` is infected
/// without using edges of `N_i`", for `k` in the node set of `N_i`.
///
/// Ids are contiguous per neighborhood owner `i`, ordered by `k`.
#[derive(Clone, Debug)]
pub struct MessageIndex {
    messages: Vec<(NodeId, NodeId)>,
    owner_start: Vec<usize>,
}

impl MessageIndex {
    pub fn build(hoods: &Neighborhoods) -> Self {
        let mut messages = Vec::new();
        let mut owner_start = Vec::with_capacity(hoods.len() + 1);
        for hood in hoods.iter() {
            owner_start.push(messages.len());
            messages.extend(
                hood.node_set
                    .iter()
                    .filter(|&k| k != hood.focal)
                    .map(|k| (k, hood.focal)),
            );
        }
        owner_start.push(messages.len());
        MessageIndex {
            messages,
            owner_start,
        }
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// `(k, i)` for message `id`.
    pub fn message(&self, id: MessageId) -> (NodeId, NodeId) {
        self.messages[id]
    }

    pub fn iter(&self) -> impl Iterator<Item = (MessageId, (NodeId, NodeId))> + '_ {
        self.messages.iter().copied().enumerate()
    }

    /// Id of `(k, i)` if it exists.
    pub fn lookup(&self, k: NodeId, i: NodeId) -> Option<MessageId> {
        let lo = *self.owner_start.get(i)?;
        let hi = self.owner_start[i + 1];
        self.messages[lo..hi]
            .binary_search_by_key(&k, |&(node, _)| node)
            .ok()
            .map(|pos| lo + pos)
    }

    /// Messages `(k, i)` entering the neighborhood of `i`.
    pub fn incoming(&self, i: NodeId) -> std::ops::Range<MessageId> {
        self.owner_start[i]..self.owner_start[i + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::karate_club;

    fn net(n: usize, edges: &[(usize, usize)]) -> Network {
        Network::uniform(n, edges, 0.5).unwrap()
    }

    fn incident(net: &Network, i: NodeId) -> Vec<EdgeId> {
        let mut e: Vec<_> = net.neighbors(i).iter().map(|&(_, e)| e).collect();
        e.sort_unstable();
        e
    }

    #[test]
    fn radius_zero_is_incident_edges() {
        let g = karate_club(0.1);
        for i in 0..g.node_count() {
            let hood = build_neighborhood(&g, i, 0, 4).unwrap();
            assert_eq!(hood.edge_set, incident(&g, i));
        }
    }

    #[test]
    fn triangle_radius_one_is_whole_triangle() {
        let g = net(3, &[(0, 1), (1, 2), (0, 2)]);
        for i in 0..3 {
            let hood = build_neighborhood(&g, i, 1, 4).unwrap();
            assert_eq!(hood.edge_set, vec![0, 1, 2]);
        }
    }

    #[test]
    fn square_needs_radius_two() {
        let g = net(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]);
        assert_eq!(build_neighborhood(&g, 0, 1, 4).unwrap().edge_set.len(), 2);
        assert_eq!(build_neighborhood(&g, 0, 2, 4).unwrap().edge_set.len(), 4);
    }

    #[test]
    fn radius_cap() {
        let g = net(2, &[(0, 1)]);
        assert!(matches!(
            build_neighborhood(&g, 0, 5, 4),
            Err(Error::RadiusTooLarge { radius: 5, cap: 4 })
        ));
    }

    #[test]
    fn conditional_examples() {
        let tri = net(3, &[(0, 1), (1, 2), (0, 2)]);
        let hoods = Neighborhoods::build(&tri, 1, 4).unwrap();
        assert!(hoods.conditional(0, 1).unwrap().edge_set.is_empty());

        let path = net(3, &[(0, 1), (1, 2)]);
        let hoods = Neighborhoods::build(&path, 0, 4).unwrap();
        assert_eq!(hoods.conditional(1, 0).unwrap().edge_set, vec![1]);

        // Bowtie: triangles {0,1,2} and {2,3,4} sharing node 2.
        let bowtie = net(5, &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)]);
        let hoods = Neighborhoods::build(&bowtie, 1, 4).unwrap();
        let n0 = hoods.get(0);
        let n3 = hoods.get(3);
        assert!(n0.edge_set.iter().all(|e| !n3.contains_edge(*e)));
        assert_eq!(hoods.conditional(0, 3).unwrap().edge_set, n0.edge_set);
    }

    #[test]
    fn conditional_rejects_mismatch() {
        let g = net(3, &[(0, 1), (1, 2), (0, 2)]);
        let a = build_neighborhood(&g, 0, 1, 4).unwrap();
        let b = build_neighborhood(&g, 1, 0, 4).unwrap();
        assert!(build_conditional(&a, &b).is_err());
        assert!(build_conditional(&a, &a).is_err());
    }

    #[test]
    fn message_index_examples() {
        let path = net(3, &[(0, 1), (1, 2)]);
        let idx = MessageIndex::build(&Neighborhoods::build(&path, 0, 4).unwrap());
        let mut msgs: Vec<_> = idx.iter().map(|(_, m)| m).collect();
        msgs.sort_unstable();
        assert_eq!(msgs, vec![(0, 1), (1, 0), (1, 2), (2, 1)]);
        assert_eq!(idx.lookup(2, 1), Some(idx.iter().find(|(_, m)| *m == (2, 1)).unwrap().0));
        assert_eq!(idx.lookup(2, 0), None);

        let tri = net(3, &[(0, 1), (1, 2), (0, 2)]);
        let idx = MessageIndex::build(&Neighborhoods::build(&tri, 1, 4).unwrap());
        assert_eq!(idx.len(), 6);

        let karate = karate_club(0.15);
        let idx = MessageIndex::build(&Neighborhoods::build(&karate, 0, 4).unwrap());
        assert_eq!(idx.len(), 2 * 78);
    }

    #[test]
    fn sizes_csv() {
        let tri = net(3, &[(0, 1), (1, 2), (0, 2)]);
        let mut buf = Vec::new();
        Neighborhoods::build(&tri, 1, 4)
            .unwrap()
            .write_sizes_csv(&mut buf)
            .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "node,edges,nodes\n0,3,3\n1,3,3\n2,3,3\n"
        );
    }
}
