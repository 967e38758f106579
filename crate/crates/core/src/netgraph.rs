//! Undirected network substrate with per-edge transmission probabilities.
//!
//! Node ids are dense integers `0..node_count`. Ids that never appear in an
//! edge-list file are kept as isolated nodes.

use std::collections::{HashSet, VecDeque};
use std::io::Read;

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type EdgeId = usize;

/// Largest node id accepted by the edge-list loader.
pub const MAX_NODE_ID: usize = 10_000_000;

/// Sorted set of distinct node ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeSet(Vec<NodeId>);

impl NodeSet {
    pub fn new(ids: impl IntoIterator<Item = NodeId>, node_count: usize) -> Result<Self> {
        let mut ids: Vec<NodeId> = ids.into_iter().collect();
        if let Some(&bad) = ids.iter().find(|&&id| id >= node_count) {
            return Err(Error::InvalidNode {
                node: bad,
                node_count,
            });
        }
        ids.sort_unstable();
        ids.dedup();
        Ok(NodeSet(ids))
    }

    pub fn empty() -> Self {
        NodeSet(Vec::new())
    }

    pub fn singleton(id: NodeId) -> Self {
        NodeSet(vec![id])
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[NodeId] {
        &self.0
    }

    /// Membership mask of length `node_count`.
    pub fn mask(&self, node_count: usize) -> Vec<bool> {
        let mut mask = vec![false; node_count];
        for id in self.iter() {
            mask[id] = true;
        }
        mask
    }

    pub fn is_disjoint(&self, other: &NodeSet) -> bool {
        !self.iter().any(|id| other.contains(id))
    }
}

impl std::fmt::Display for NodeSet {
    /// Members joined with `;`, the encoding used in CSV set columns.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (pos, id) in self.0.iter().enumerate() {
            if pos > 0 {
                f.write_str(";")?;
            }
            write!(f, "{id}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Network {
    node_count: usize,
    edges: Vec<(NodeId, NodeId)>,
    prob: Vec<f64>,
    adjacency: Vec<Vec<(NodeId, EdgeId)>>,
}

impl Network {
    /// Builds a network from `(u, v, p)` triples.
    pub fn from_edges(node_count: usize, edges: &[(NodeId, NodeId, f64)]) -> Result<Self> {
        let mut net = Network {
            node_count,
            edges: Vec::with_capacity(edges.len()),
            prob: Vec::with_capacity(edges.len()),
            adjacency: vec![Vec::new(); node_count],
        };
        let mut seen = HashSet::new();
        for (pos, &(u, v, p)) in edges.iter().enumerate() {
            net.push_edge(pos + 1, u, v, p, &mut seen)?;
        }
        Ok(net)
    }

    /// All edges share the probability `p`.
    pub fn uniform(node_count: usize, edges: &[(NodeId, NodeId)], p: f64) -> Result<Self> {
        let triples: Vec<_> = edges.iter().map(|&(u, v)| (u, v, p)).collect();
        Self::from_edges(node_count, &triples)
    }

    fn push_edge(
        &mut self,
        line: usize,
        u: NodeId,
        v: NodeId,
        p: f64,
        seen: &mut HashSet<(NodeId, NodeId)>,
    ) -> Result<()> {
        for node in [u, v] {
            if node >= self.node_count {
                return Err(Error::InvalidNode {
                    node,
                    node_count: self.node_count,
                });
            }
        }
        if u == v {
            return Err(Error::Parse {
                line,
                message: format!("self-loop on node {u}"),
            });
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Probability { line, value: p });
        }
        let key = (u.min(v), u.max(v));
        if !seen.insert(key) {
            return Err(Error::DuplicateEdge {
                line,
                u: key.0,
                v: key.1,
            });
        }
        let id = self.edges.len();
        self.edges.push(key);
        self.prob.push(p);
        self.adjacency[u].push((v, id));
        self.adjacency[v].push((u, id));
        Ok(())
    }

    /// Parses the whitespace-separated edge-list format: `u v` or `u v p`
    /// per line, 0-based ids, `#` starts a comment.
    pub fn parse_edge_list(text: &str, default_p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&default_p) {
            return Err(Error::Probability {
                line: 0,
                value: default_p,
            });
        }
        let mut parsed = Vec::new();
        let mut max_id = None::<usize>;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields.len() != 2 && fields.len() != 3 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected `u v` or `u v p`, found {} fields", fields.len()),
                });
            }
            let node = |tok: &str| -> Result<usize> {
                let id: usize = tok.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("invalid node id `{tok}`"),
                })?;
                if id > MAX_NODE_ID {
                    return Err(Error::Parse {
                        line,
                        message: format!("node id {id} exceeds {MAX_NODE_ID}"),
                    });
                }
                Ok(id)
            };
            let u = node(fields[0])?;
            let v = node(fields[1])?;
            let p = match fields.get(2) {
                Some(tok) => {
                    let p: f64 = tok.parse().map_err(|_| Error::Parse {
                        line,
                        message: format!("invalid probability `{tok}`"),
                    })?;
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::Probability { line, value: p });
                    }
                    p
                }
                None => default_p,
            };
            if u == v {
                return Err(Error::Parse {
                    line,
                    message: format!("self-loop on node {u}"),
                });
            }
            max_id = Some(max_id.map_or(u.max(v), |m| m.max(u).max(v)));
            parsed.push((line, u, v, p));
        }
        let node_count = max_id.map_or(0, |m| m + 1);
        let mut net = Network {
            node_count,
            edges: Vec::with_capacity(parsed.len()),
            prob: Vec::with_capacity(parsed.len()),
            adjacency: vec![Vec::new(); node_count],
        };
        let mut seen = HashSet::new();
        for (line, u, v, p) in parsed {
            net.push_edge(line, u, v, p, &mut seen)?;
        }
        Ok(net)
    }

    pub fn load_edge_list<R: Read>(mut reader: R, default_p: f64) -> Result<Self> {
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        Self::parse_edge_list_bytes(&bytes, default_p)
    }

    pub fn parse_edge_list_bytes(bytes: &[u8], default_p: f64) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|e| {
            let line = 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count();
            Error::Parse {
                line,
                message: "input is not valid UTF-8".into(),
            }
        })?;
        Self::parse_edge_list(text, default_p)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn endpoints(&self, edge: EdgeId) -> (NodeId, NodeId) {
        self.edges[edge]
    }

    pub fn prob(&self, edge: EdgeId) -> f64 {
        self.prob[edge]
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    /// `(neighbor, edge)` pairs incident to `node`.
    pub fn neighbors(&self, node: NodeId) -> &[(NodeId, EdgeId)] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adjacency[node].len()
    }

    pub fn edge_between(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        self.adjacency[u]
            .iter()
            .find(|&&(w, _)| w == v)
            .map(|&(_, e)| e)
    }

    pub fn check_node(&self, node: NodeId) -> Result<()> {
        if node < self.node_count {
            Ok(())
        } else {
            Err(Error::InvalidNode {
                node,
                node_count: self.node_count,
            })
        }
    }

    /// Same topology with every edge probability replaced by `p`.
    pub fn with_uniform_prob(&self, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Probability { line: 0, value: p });
        }
        let mut net = self.clone();
        net.prob.iter_mut().for_each(|q| *q = p);
        Ok(net)
    }

    /// Same topology with probabilities multiplied by `factor(edge)`.
    pub fn with_scaled_prob(&self, factor: impl Fn(EdgeId) -> f64) -> Self {
        let mut net = self.clone();
        for (e, q) in net.prob.iter_mut().enumerate() {
            *q = (*q * factor(e)).clamp(0.0, 1.0);
        }
        net
    }

    /// Complete immunity: every edge touching `nodes` keeps its place in the
    /// topology but can no longer transmit.
    pub fn with_blocked_nodes(&self, nodes: &NodeSet) -> Self {
        let mask = nodes.mask(self.node_count);
        self.with_scaled_prob(|e| {
            let (u, v) = self.edges[e];
            if mask[u] || mask[v] {
                0.0
            } else {
                1.0
            }
        })
    }

    /// Drops every edge incident to `nodes` from the topology.
    pub fn without_incident_edges(&self, nodes: &NodeSet) -> Self {
        let mask = nodes.mask(self.node_count);
        let kept: Vec<_> = self
            .edges
            .iter()
            .zip(&self.prob)
            .filter(|(&(u, v), _)| !mask[u] && !mask[v])
            .map(|(&(u, v), &p)| (u, v, p))
            .collect();
        Network::from_edges(self.node_count, &kept).expect("subset of a valid network")
    }

    /// Unweighted BFS distances from `source`; `None` for unreachable nodes.
    pub fn bfs_distances(&self, source: NodeId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &(v, _) in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.node_count == 0 || self.bfs_distances(0).iter().all(Option::is_some)
    }

    pub fn is_forest(&self) -> bool {
        self.edge_count() + self.connected_components().len() == self.node_count
    }

    /// Core number of every node by iterative minimum-degree peeling.
    pub fn coreness(&self) -> Vec<usize> {
        let n = self.node_count;
        let mut degree: Vec<usize> = (0..n).map(|u| self.degree(u)).collect();
        let max_degree = degree.iter().copied().max().unwrap_or(0);
        // Bucket sort nodes by degree; `pos` tracks each node's slot.
        let mut bin = vec![0usize; max_degree + 2];
        for &d in &degree {
            bin[d] += 1;
        }
        let mut start = 0;
        for count in bin.iter_mut() {
            let c = *count;
            *count = start;
            start += c;
        }
        let mut order = vec![0usize; n];
        let mut pos = vec![0usize; n];
        for u in 0..n {
            pos[u] = bin[degree[u]];
            order[pos[u]] = u;
            bin[degree[u]] += 1;
        }
        for d in (1..bin.len()).rev() {
            bin[d] = bin[d - 1];
        }
        if !bin.is_empty() {
            bin[0] = 0;
        }
        for idx in 0..n {
            let u = order[idx];
            for &(v, _) in &self.adjacency[u] {
                if degree[v] > degree[u] {
                    let dv = degree[v];
                    let pv = pos[v];
                    let pw = bin[dv];
                    let w = order[pw];
                    if v != w {
                        order.swap(pv, pw);
                        pos[v] = pw;
                        pos[w] = pv;
                    }
                    bin[dv] += 1;
                    degree[v] -= 1;
                }
            }
        }
        degree
    }

    /// Largest shortest-path length over all node pairs.
    pub fn diameter(&self) -> Result<usize> {
        let mut best = 0;
        for source in 0..self.node_count {
            for d in self.bfs_distances(source) {
                best = best.max(d.ok_or(Error::Disconnected)?);
            }
        }
        Ok(best)
    }

    pub fn connected_components(&self) -> Vec<NodeSet> {
        let mut label = vec![usize::MAX; self.node_count];
        let mut components = Vec::new();
        for root in 0..self.node_count {
            if label[root] != usize::MAX {
                continue;
            }
            let id = components.len();
            let mut members = vec![root];
            label[root] = id;
            let mut head = 0;
            while head < members.len() {
                let u = members[head];
                head += 1;
                for &(v, _) in &self.adjacency[u] {
                    if label[v] == usize::MAX {
                        label[v] = id;
                        members.push(v);
                    }
                }
            }
            members.sort_unstable();
            components.push(NodeSet(members));
        }
        components
    }
}

/// The bundled Zachary karate-club edge list.
pub const KARATE_EDGES: &str = include_str!("../data/karate.edges");

pub fn karate_club(p: f64) -> Network {
    Network::parse_edge_list(KARATE_EDGES, p).expect("bundled karate club edge list is valid")
}
