//! Bond-percolation outcomes on neighborhood edge sets.
//!
//! Three samplers produce a [`SampleSet`] for one owner (a neighborhood or a
//! conditional neighborhood): breadth-first cascades with early stopping,
//! Newman-Ziff edge-addition sweeps with binomial importance weights, and
//! exhaustive enumeration for small edge sets. Weights are normalized so that
//! they sum to one in expectation.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use bitvec::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgraph::{EdgeId, Network, NodeId};

/// Maximum number of edges with `0 < p < 1` that exact enumeration accepts.
pub const EXACT_EDGE_CAP: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    #[default]
    Bfs,
    #[serde(rename = "nz")]
    NewmanZiff,
    Exact,
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerKind::Bfs => "bfs",
            SamplerKind::NewmanZiff => "nz",
            SamplerKind::Exact => "exact",
        })
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bfs" => Ok(SamplerKind::Bfs),
            "nz" | "newman-ziff" => Ok(SamplerKind::NewmanZiff),
            "exact" => Ok(SamplerKind::Exact),
            other => Err(Error::Config(format!("unknown sampler `{other}`"))),
        }
    }
}

/// One percolation outcome seen from the focal node.
#[derive(Clone, Debug, PartialEq)]
pub struct PercolationSample {
    /// Indexed by position in the owner's edge list. Edges the sampler never
    /// needed to examine are reported inactive.
    pub active_edges: BitVec,
    /// `(node, shortest active-path length)` sorted by node; contains the
    /// focal node at distance 0.
    pub reached: Vec<(NodeId, usize)>,
    pub weight: f64,
}

impl PercolationSample {
    pub fn dist(&self, node: NodeId) -> Option<usize> {
        self.reached
            .binary_search_by_key(&node, |&(k, _)| k)
            .ok()
            .map(|pos| self.reached[pos].1)
    }

    pub fn is_reachable(&self, node: NodeId) -> bool {
        self.dist(node).is_some()
    }

    pub fn reachable(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.reached.iter().map(|&(k, _)| k)
    }
}

/// Owner edge set in local coordinates with effective edge probabilities.
///
/// Local node 0 is always the focal node.
#[derive(Clone, Debug)]
pub struct LocalGraph {
    focal: NodeId,
    nodes: Vec<NodeId>,
    edges: Vec<EdgeId>,
    ends: Vec<(usize, usize)>,
    prob: Vec<f64>,
    adj: Vec<Vec<(usize, usize)>>,
}

impl LocalGraph {
    pub fn new(net: &Network, edge_set: &[EdgeId], focal: NodeId) -> Self {
        Self::with_prob(net, edge_set, focal, |e| net.prob(e))
    }

    /// `prob(edge)` overrides the network's probability, e.g. to silence
    /// edges next to blocked nodes.
    pub fn with_prob(
        net: &Network,
        edge_set: &[EdgeId],
        focal: NodeId,
        prob: impl Fn(EdgeId) -> f64,
    ) -> Self {
        let mut local_of: HashMap<NodeId, usize> = HashMap::new();
        let mut nodes = vec![focal];
        local_of.insert(focal, 0);
        let mut intern = |node: NodeId, nodes: &mut Vec<NodeId>| -> usize {
            *local_of.entry(node).or_insert_with(|| {
                nodes.push(node);
                nodes.len() - 1
            })
        };
        let mut ends = Vec::with_capacity(edge_set.len());
        for &e in edge_set {
            let (u, v) = net.endpoints(e);
            let lu = intern(u, &mut nodes);
            let lv = intern(v, &mut nodes);
            ends.push((lu, lv));
        }
        let mut adj = vec![Vec::new(); nodes.len()];
        for (le, &(lu, lv)) in ends.iter().enumerate() {
            adj[lu].push((lv, le));
            adj[lv].push((lu, le));
        }
        LocalGraph {
            focal,
            nodes,
            edges: edge_set.to_vec(),
            ends,
            prob: edge_set.iter().map(|&e| prob(e).clamp(0.0, 1.0)).collect(),
            adj,
        }
    }

    pub fn focal(&self) -> NodeId {
        self.focal
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    /// BFS over the active edges; `(global node, distance)` sorted by node.
    fn reach(&self, active: &BitSlice) -> Vec<(NodeId, usize)> {
        let mut dist = vec![usize::MAX; self.nodes.len()];
        dist[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            for &(v, le) in &self.adj[u] {
                if active[le] && dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        self.collect_reached(&dist)
    }

    fn collect_reached(&self, dist: &[usize]) -> Vec<(NodeId, usize)> {
        let mut reached: Vec<(NodeId, usize)> = dist
            .iter()
            .enumerate()
            .filter(|&(_, &d)| d != usize::MAX)
            .map(|(l, &d)| (self.nodes[l], d))
            .collect();
        reached.sort_unstable();
        reached
    }

    /// Breadth-first cascade from the focal node. Each edge is examined at
    /// most once, when one endpoint is on the current level and the other is
    /// still undiscovered; a failed edge stays closed.
    pub fn sample_bfs<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> SampleSet {
        let samples = samples.max(1);
        let weight = 1.0 / samples as f64;
        let mut out = Vec::with_capacity(samples);
        let mut dist = vec![usize::MAX; self.nodes.len()];
        for _ in 0..samples {
            dist.iter_mut().for_each(|d| *d = usize::MAX);
            let mut active = bitvec![0; self.edges.len()];
            dist[0] = 0;
            let mut frontier = vec![0usize];
            let mut level = 0;
            while !frontier.is_empty() {
                let mut next = Vec::new();
                for &u in &frontier {
                    for &(v, le) in &self.adj[u] {
                        if dist[v] != usize::MAX {
                            continue;
                        }
                        let p = self.prob[le];
                        let open = p >= 1.0 || (p > 0.0 && rng.random::<f64>() < p);
                        if open {
                            active.set(le, true);
                            dist[v] = level + 1;
                            next.push(v);
                        }
                    }
                }
                frontier = next;
                level += 1;
            }
            out.push(PercolationSample {
                active_edges: active,
                reached: self.collect_reached(&dist),
                weight,
            });
        }
        self.sample_set(SamplerKind::Bfs, Repr::Outcomes(out))
    }

    /// Uniform probability shared by every edge that can transmit.
    fn uniform_prob(&self) -> Result<Option<f64>> {
        let mut shared = None;
        for &p in self.prob.iter().filter(|&&p| p > 0.0) {
            match shared {
                None => shared = Some(p),
                Some(q) if (q - p).abs() > 1e-12 => {
                    return Err(Error::HeterogeneousProbability { first: q, other: p })
                }
                _ => {}
            }
        }
        Ok(shared)
    }

    /// Newman-Ziff sweeps: edges that can transmit are added in a uniformly
    /// random order while a union-find structure tracks the focal cluster.
    /// Edges with zero probability are left out of the sweep entirely.
    pub fn sample_newman_ziff<R: Rng + ?Sized>(
        &self,
        sweeps: usize,
        rng: &mut R,
    ) -> Result<SampleSet> {
        let sweeps = sweeps.max(1);
        let p = self.uniform_prob()?.unwrap_or(0.0);
        let open: Vec<usize> = (0..self.edges.len())
            .filter(|&le| self.prob[le] > 0.0)
            .collect();
        let tail = binomial_tail(open.len(), p);
        let mut records = Vec::with_capacity(sweeps);
        let mut order = open.clone();
        for _ in 0..sweeps {
            order.shuffle(rng);
            let mut clusters = Clusters::new(self.nodes.len());
            let mut join = vec![u32::MAX; self.nodes.len()];
            join[0] = 0;
            for (added, &le) in order.iter().enumerate() {
                let (u, v) = self.ends[le];
                if let Some(absorbed) = clusters.union(u, v, 0) {
                    for &node in absorbed {
                        join[node] = added as u32 + 1;
                    }
                }
            }
            records.push(Sweep {
                order: order.iter().map(|&le| le as u32).collect(),
                join,
            });
        }
        Ok(self.sample_set(
            SamplerKind::NewmanZiff,
            Repr::Sweeps {
                tail,
                records,
                p,
            },
        ))
    }

    /// Every configuration of the edges with `0 < p < 1`, weighted by its
    /// exact probability. Edges with `p = 1` are always active.
    pub fn enumerate_exact(&self) -> Result<SampleSet> {
        let free: Vec<usize> = (0..self.edges.len())
            .filter(|&le| self.prob[le] > 0.0 && self.prob[le] < 1.0)
            .collect();
        if free.len() > EXACT_EDGE_CAP {
            return Err(Error::EnumerationCap {
                edges: free.len(),
                cap: EXACT_EDGE_CAP,
            });
        }
        let mut base = bitvec![0; self.edges.len()];
        for le in 0..self.edges.len() {
            if self.prob[le] >= 1.0 {
                base.set(le, true);
            }
        }
        let mut out = Vec::with_capacity(1 << free.len());
        for mask in 0u32..(1u32 << free.len()) {
            let mut active = base.clone();
            let mut weight = 1.0;
            for (bit, &le) in free.iter().enumerate() {
                let p = self.prob[le];
                if mask & (1 << bit) != 0 {
                    active.set(le, true);
                    weight *= p;
                } else {
                    weight *= 1.0 - p;
                }
            }
            let reached = self.reach(&active);
            out.push(PercolationSample {
                active_edges: active,
                reached,
                weight,
            });
        }
        Ok(self.sample_set(SamplerKind::Exact, Repr::Outcomes(out)))
    }

    pub fn sample(
        &self,
        kind: SamplerKind,
        samples: usize,
        rng: &mut (impl Rng + ?Sized),
    ) -> Result<SampleSet> {
        match kind {
            SamplerKind::Bfs => Ok(self.sample_bfs(samples, rng)),
            SamplerKind::NewmanZiff => self.sample_newman_ziff(samples, rng),
            SamplerKind::Exact => self.enumerate_exact(),
        }
    }

    fn sample_set(&self, sampler: SamplerKind, repr: Repr) -> SampleSet {
        SampleSet {
            graph: self.clone(),
            sampler,
            repr,
        }
    }
}

/// Union-find with explicit member lists, so the nodes absorbed into a
/// tracked cluster can be listed at merge time.
struct Clusters {
    parent: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Clusters {
    fn new(n: usize) -> Self {
        Clusters {
            parent: (0..n).collect(),
            members: (0..n).map(|i| vec![i]).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the clusters of `a` and `b`. When the merge grows the cluster
    /// containing `tracked`, returns the nodes that just joined it.
    fn union(&mut self, a: usize, b: usize, tracked: usize) -> Option<&[usize]> {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        let rt = self.find(tracked);
        let (big, small) = if self.members[ra].len() >= self.members[rb].len() {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small] = big;
        let moved = std::mem::take(&mut self.members[small]);
        let start = self.members[big].len();
        self.members[big].extend(moved);
        if rt == ra || rt == rb {
            // The side that did not contain `tracked` is what joined it.
            let joined_root = if rt == ra { rb } else { ra };
            if joined_root == small {
                Some(&self.members[big][start..])
            } else {
                Some(&self.members[big][..start])
            }
        } else {
            None
        }
    }
}

#[derive(Clone, Debug)]
struct Sweep {
    /// Local edge ids in insertion order.
    order: Vec<u32>,
    /// Number of inserted edges after which each local node is connected to
    /// the focal node (`u32::MAX` if never).
    join: Vec<u32>,
}

#[derive(Clone, Debug)]
enum Repr {
    Outcomes(Vec<PercolationSample>),
    Sweeps {
        /// `tail[e] = sum_{e' >= e} w_e'`; length `E + 2` with a zero sentinel.
        tail: Vec<f64>,
        records: Vec<Sweep>,
        p: f64,
    },
}

/// Frozen percolation outcomes for one owner.
#[derive(Clone, Debug)]
pub struct SampleSet {
    graph: LocalGraph,
    pub sampler: SamplerKind,
    repr: Repr,
}

impl SampleSet {
    pub fn focal(&self) -> NodeId {
        self.graph.focal
    }

    pub fn edge_set(&self) -> &[EdgeId] {
        &self.graph.edges
    }

    pub fn local_graph(&self) -> &LocalGraph {
        &self.graph
    }

    /// Number of recorded outcomes (`M * (E + 1)` for Newman-Ziff).
    pub fn len(&self) -> usize {
        match &self.repr {
            Repr::Outcomes(v) => v.len(),
            Repr::Sweeps { tail, records, .. } => records.len() * (tail.len() - 1),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total_weight(&self) -> f64 {
        let mut total = 0.0;
        self.visit(|w, _| total += w);
        total
    }

    /// Calls `f(weight, reached)` for every outcome. Newman-Ziff distances
    /// are computed here, on demand.
    pub fn visit(&self, mut f: impl FnMut(f64, &[(NodeId, usize)])) {
        match &self.repr {
            Repr::Outcomes(samples) => {
                for s in samples {
                    f(s.weight, &s.reached);
                }
            }
            Repr::Sweeps { tail, records, .. } => {
                let m = records.len() as f64;
                for sweep in records {
                    self.visit_sweep(sweep, tail, |_, reached, w| f(w / m, reached));
                }
            }
        }
    }

    fn visit_sweep(
        &self,
        sweep: &Sweep,
        tail: &[f64],
        mut f: impl FnMut(&BitSlice, &[(NodeId, usize)], f64),
    ) {
        let mut active = bitvec![0; self.graph.edges.len()];
        let mut reached = self.graph.reach(&active);
        f(&active, &reached, tail[0] - tail[1]);
        for (added, &le) in sweep.order.iter().enumerate() {
            active.set(le as usize, true);
            let e = added + 1;
            let (u, v) = self.graph.ends[le as usize];
            // Distances can only change when the new edge touches the focal
            // cluster.
            if sweep.join[u] as usize <= e || sweep.join[v] as usize <= e {
                reached = self.graph.reach(&active);
            }
            f(&active, &reached, tail[e] - tail[e + 1]);
        }
    }

    /// All outcomes as owned samples.
    pub fn samples(&self) -> Vec<PercolationSample> {
        match &self.repr {
            Repr::Outcomes(samples) => samples.clone(),
            Repr::Sweeps { tail, records, .. } => {
                let m = records.len() as f64;
                let mut out = Vec::with_capacity(self.len());
                for sweep in records {
                    self.visit_sweep(sweep, tail, |active, reached, w| {
                        out.push(PercolationSample {
                            active_edges: active.to_bitvec(),
                            reached: reached.to_vec(),
                            weight: w / m,
                        })
                    });
                }
                out
            }
        }
    }

    /// Weighted fraction of outcomes in which `node` is reachable from the
    /// focal node.
    pub fn estimate_reachability(&self, node: NodeId) -> f64 {
        if node == self.graph.focal {
            return self.total_weight();
        }
        match &self.repr {
            Repr::Outcomes(samples) => samples
                .iter()
                .filter(|s| s.is_reachable(node))
                .map(|s| s.weight)
                .sum(),
            Repr::Sweeps { tail, records, .. } => {
                let Some(local) = self.graph.nodes.iter().position(|&k| k == node) else {
                    return 0.0;
                };
                let total: f64 = records
                    .iter()
                    .map(|s| tail.get(s.join[local] as usize).copied().unwrap_or(0.0))
                    .sum();
                total / records.len() as f64
            }
        }
    }

    /// Reachability estimate of every node in the owner's edge set.
    pub fn reachability_vector(&self) -> Vec<(NodeId, f64)> {
        let mut nodes = self.graph.nodes.clone();
        nodes.sort_unstable();
        nodes
            .into_iter()
            .map(|k| (k, self.estimate_reachability(k)))
            .collect()
    }

    pub fn stats(&self) -> SampleStats {
        SampleStats {
            focal: self.focal(),
            sampler: self.sampler,
            edges: self.edge_set().len(),
            outcomes: self.len(),
            reachability: self.reachability_vector(),
        }
    }

    /// Uniform edge probability used by a Newman-Ziff set.
    pub fn sweep_probability(&self) -> Option<f64> {
        match &self.repr {
            Repr::Sweeps { p, .. } => Some(*p),
            Repr::Outcomes(_) => None,
        }
    }
}

/// Serializable reachability summary of a sample set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleStats {
    pub focal: NodeId,
    pub sampler: SamplerKind,
    pub edges: usize,
    pub outcomes: usize,
    pub reachability: Vec<(NodeId, f64)>,
}

/// `C(n, k) p^k (1 - p)^(n - k)` for `k = 0..=n`.
pub fn binomial_weights(n: usize, p: f64) -> Vec<f64> {
    if p <= 0.0 {
        let mut w = vec![0.0; n + 1];
        w[0] = 1.0;
        return w;
    }
    if p >= 1.0 {
        let mut w = vec![0.0; n + 1];
        w[n] = 1.0;
        return w;
    }
    let mut ln_fact = vec![0.0f64; n + 1];
    for k in 1..=n {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    (0..=n)
        .map(|k| {
            (ln_fact[n] - ln_fact[k] - ln_fact[n - k] + k as f64 * lp + (n - k) as f64 * lq).exp()
        })
        .collect()
}

fn binomial_tail(n: usize, p: f64) -> Vec<f64> {
    let w = binomial_weights(n, p);
    let mut tail = vec![0.0; n + 2];
    for k in (0..=n).rev() {
        tail[k] = tail[k + 1] + w[k];
    }
    tail
}

pub fn sample_bfs<R: Rng + ?Sized>(
    net: &Network,
    edge_set: &[EdgeId],
    focal: NodeId,
    samples: usize,
    rng: &mut R,
) -> SampleSet {
    LocalGraph::new(net, edge_set, focal).sample_bfs(samples, rng)
}

pub fn sample_newman_ziff<R: Rng + ?Sized>(
    net: &Network,
    edge_set: &[EdgeId],
    focal: NodeId,
    sweeps: usize,
    rng: &mut R,
) -> Result<SampleSet> {
    LocalGraph::new(net, edge_set, focal).sample_newman_ziff(sweeps, rng)
}

pub fn enumerate_exact(net: &Network, edge_set: &[EdgeId], focal: NodeId) -> Result<SampleSet> {
    LocalGraph::new(net, edge_set, focal).enumerate_exact()
}
