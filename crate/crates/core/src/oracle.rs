//! Ground truth for the cascade model: direct stochastic simulation and exact
//! enumeration over bond configurations of small graphs.
//!
//! Both routes rely on the same correspondence: a node is infected by time
//! `t` exactly when some seed lies within active-path distance `t` of it.

use std::collections::VecDeque;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::SeedVector;
use crate::error::{Error, Result};
use crate::netgraph::{Network, NodeId, NodeSet};
use crate::percolation::EXACT_EDGE_CAP;
use crate::rng;

/// How a cascade's initial infections are drawn.
#[derive(Clone, Debug, PartialEq)]
pub enum Seeding {
    /// Every node of the set starts infected.
    Set(NodeSet),
    /// One node chosen uniformly from the set starts infected.
    UniformSingle(NodeSet),
    /// Each node starts infected independently with its own probability.
    Independent(SeedVector),
}

impl Seeding {
    fn touches(&self, nodes: &NodeSet) -> bool {
        match self {
            Seeding::Set(s) | Seeding::UniformSingle(s) => !s.is_disjoint(nodes),
            Seeding::Independent(v) => nodes.iter().any(|i| v.get(i) > 0.0),
        }
    }

    fn check(&self, net: &Network) -> Result<()> {
        match self {
            Seeding::Set(s) | Seeding::UniformSingle(s) => {
                for i in s.iter() {
                    net.check_node(i)?;
                }
                if matches!(self, Seeding::UniformSingle(_)) && s.is_empty() {
                    return Err(Error::Config("no eligible seed nodes".into()));
                }
            }
            Seeding::Independent(v) => {
                if v.len() != net.node_count() {
                    return Err(Error::Config("seed vector length mismatch".into()));
                }
            }
        }
        Ok(())
    }
}

/// Everything an oracle run needs besides the network.
#[derive(Clone, Debug)]
pub struct OracleQuery {
    pub seeding: Seeding,
    pub vaccinated: NodeSet,
    pub sentinels: NodeSet,
    /// Last time step with recorded per-time marginals.
    pub horizon: usize,
}

impl OracleQuery {
    pub fn new(seeding: Seeding, horizon: usize) -> Self {
        OracleQuery {
            seeding,
            vaccinated: NodeSet::empty(),
            sentinels: NodeSet::empty(),
            horizon,
        }
    }

    pub fn vaccinated(mut self, nodes: NodeSet) -> Self {
        self.vaccinated = nodes;
        self
    }

    pub fn sentinels(mut self, nodes: NodeSet) -> Self {
        self.sentinels = nodes;
        self
    }

    fn validate(&self, net: &Network) -> Result<()> {
        self.seeding.check(net)?;
        if self.seeding.touches(&self.vaccinated) {
            return Err(Error::Usage("seed and vaccinated sets overlap".into()));
        }
        for i in self.vaccinated.iter().chain(self.sentinels.iter()) {
            net.check_node(i)?;
        }
        Ok(())
    }
}

/// Infection times of one simulated cascade.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadeTrace {
    pub infection_time: Vec<Option<usize>>,
    pub final_size: usize,
}

impl CascadeTrace {
    pub fn first_time_in(&self, nodes: &NodeSet) -> Option<usize> {
        nodes.iter().filter_map(|i| self.infection_time[i]).min()
    }
}

/// Distribution of the first time any sentinel is infected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// `pmf[t]` = probability of first detection exactly at `t`.
    pub pmf: Vec<f64>,
    pub never: f64,
}

impl Detection {
    /// Probability of detection by time `t`.
    pub fn cumulative(&self, t: usize) -> f64 {
        self.pmf.iter().take(t + 1).sum()
    }

    pub fn cumulative_series(&self, horizon: usize) -> Vec<f64> {
        (0..=horizon).map(|t| self.cumulative(t)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    /// Final infection probability per node.
    pub marginals: Vec<f64>,
    /// `temporal[i][t]`, probability `i` is infected by `t`, `t = 0..=horizon`.
    pub temporal: Vec<Vec<f64>>,
    pub expected_size: f64,
    pub detection: Option<Detection>,
    /// `None` for exact enumeration.
    pub n_sims: Option<u64>,
    pub marginal_std_err: Vec<f64>,
    pub size_std_err: f64,
    pub detection_std_err: Vec<f64>,
}

/// One cascade: each newly infected node gets one chance per susceptible
/// neighbor. Vaccinated nodes neither catch nor pass the infection.
pub fn simulate_cascade<R: Rng + ?Sized>(
    net: &Network,
    seeds: &NodeSet,
    vaccinated: &NodeSet,
    rng: &mut R,
) -> Result<CascadeTrace> {
    if !seeds.is_disjoint(vaccinated) {
        return Err(Error::Usage("seed and vaccinated sets overlap".into()));
    }
    for i in seeds.iter() {
        net.check_node(i)?;
    }
    let immune = vaccinated.mask(net.node_count());
    Ok(cascade(net, seeds.iter(), &immune, rng))
}

fn cascade<R: Rng + ?Sized>(
    net: &Network,
    seeds: impl Iterator<Item = NodeId>,
    immune: &[bool],
    rng: &mut R,
) -> CascadeTrace {
    let mut time = vec![None; net.node_count()];
    let mut front: Vec<NodeId> = Vec::new();
    for s in seeds {
        if time[s].is_none() {
            time[s] = Some(0);
            front.push(s);
        }
    }
    let mut size = front.len();
    let mut t = 0;
    while !front.is_empty() {
        let mut next = Vec::new();
        for &u in &front {
            for &(v, e) in net.neighbors(u) {
                if time[v].is_some() || immune[v] {
                    continue;
                }
                let p = net.prob(e);
                if p >= 1.0 || (p > 0.0 && rng.random::<f64>() < p) {
                    time[v] = Some(t + 1);
                    next.push(v);
                }
            }
        }
        size += next.len();
        front = next;
        t += 1;
    }
    CascadeTrace {
        infection_time: time,
        final_size: size,
    }
}

const BLOCK: u64 = 1024;

#[derive(Clone, Default)]
struct Tally {
    sims: u64,
    /// `by_time[i][t]` for `t <= horizon`.
    by_time: Vec<Vec<u64>>,
    ever: Vec<u64>,
    size_sum: u64,
    size_sq_sum: u128,
    detect: Vec<u64>,
    never: u64,
}

impl Tally {
    fn new(n: usize, horizon: usize) -> Self {
        Tally {
            by_time: vec![vec![0; horizon + 1]; n],
            ever: vec![0; n],
            ..Tally::default()
        }
    }

    fn record(&mut self, trace: &CascadeTrace, sentinels: &NodeSet, horizon: usize) {
        self.sims += 1;
        for (i, t) in trace.infection_time.iter().enumerate() {
            if let Some(t) = *t {
                self.ever[i] += 1;
                if t <= horizon {
                    self.by_time[i][t] += 1;
                }
            }
        }
        let size = trace.final_size as u64;
        self.size_sum += size;
        self.size_sq_sum += (size as u128) * (size as u128);
        if !sentinels.is_empty() {
            match trace.first_time_in(sentinels) {
                Some(t) => {
                    if self.detect.len() <= t {
                        self.detect.resize(t + 1, 0);
                    }
                    self.detect[t] += 1;
                }
                None => self.never += 1,
            }
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        if self.by_time.is_empty() {
            return other;
        }
        self.sims += other.sims;
        for (a, b) in self.by_time.iter_mut().zip(&other.by_time) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (x, y) in self.ever.iter_mut().zip(&other.ever) {
            *x += y;
        }
        self.size_sum += other.size_sum;
        self.size_sq_sum += other.size_sq_sum;
        if self.detect.len() < other.detect.len() {
            self.detect.resize(other.detect.len(), 0);
        }
        for (x, y) in self.detect.iter_mut().zip(&other.detect) {
            *x += y;
        }
        self.never += other.never;
        self
    }
}

fn binomial_se(p: f64, n: f64) -> f64 {
    (p * (1.0 - p) / n).max(0.0).sqrt()
}

/// Monte Carlo estimate from `n_sims` independent cascades. Simulations are
/// grouped in fixed blocks, each with its own random stream, and tallied
/// with integer counters, so the result is identical for any thread count.
pub fn mc_estimate(
    net: &Network,
    query: &OracleQuery,
    n_sims: u64,
    seed: u64,
) -> Result<OracleEstimate> {
    query.validate(net)?;
    if n_sims == 0 {
        return Err(Error::Config("n_sims must be at least 1".into()));
    }
    let n = net.node_count();
    let horizon = query.horizon;
    let immune = query.vaccinated.mask(n);
    let blocks = n_sims.div_ceil(BLOCK);
    let tally = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::stream(seed, b);
            let mut tally = Tally::new(n, horizon);
            let count = BLOCK.min(n_sims - b * BLOCK);
            for _ in 0..count {
                let trace = match &query.seeding {
                    Seeding::Set(s) => cascade(net, s.iter(), &immune, &mut rng),
                    Seeding::UniformSingle(s) => {
                        let pick = s.as_slice()[rng.random_range(0..s.len())];
                        cascade(net, std::iter::once(pick), &immune, &mut rng)
                    }
                    Seeding::Independent(v) => {
                        let chosen: Vec<NodeId> = (0..n)
                            .filter(|&i| {
                                let s = v.get(i);
                                s >= 1.0 || (s > 0.0 && rng.random::<f64>() < s)
                            })
                            .collect();
                        cascade(net, chosen.into_iter(), &immune, &mut rng)
                    }
                };
                tally.record(&trace, &query.sentinels, horizon);
            }
            tally
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Tally::default(), Tally::merge);

    let sims = tally.sims as f64;
    let marginals: Vec<f64> = tally.ever.iter().map(|&c| c as f64 / sims).collect();
    let temporal = tally
        .by_time
        .iter()
        .map(|counts| {
            let mut acc = 0u64;
            counts
                .iter()
                .map(|&c| {
                    acc += c;
                    acc as f64 / sims
                })
                .collect()
        })
        .collect();
    let mean = tally.size_sum as f64 / sims;
    let var = (tally.size_sq_sum as f64 / sims - mean * mean).max(0.0);
    let size_std_err = if tally.sims > 1 {
        (var * sims / (sims - 1.0) / sims).sqrt()
    } else {
        0.0
    };
    let detection = (!query.sentinels.is_empty()).then(|| Detection {
        pmf: tally.detect.iter().map(|&c| c as f64 / sims).collect(),
        never: tally.never as f64 / sims,
    });
    let detection_std_err = detection
        .as_ref()
        .map(|d| {
            (0..d.pmf.len())
                .map(|t| binomial_se(d.cumulative(t), sims))
                .collect()
        })
        .unwrap_or_default();
    Ok(OracleEstimate {
        marginal_std_err: marginals.iter().map(|&p| binomial_se(p, sims)).collect(),
        marginals,
        temporal,
        expected_size: mean,
        detection,
        n_sims: Some(tally.sims),
        size_std_err,
        detection_std_err,
    })
}

/// Multi-source BFS over active edges, skipping immune nodes.
fn active_distances(
    net: &Network,
    active: &[bool],
    immune: &[bool],
    sources: impl Iterator<Item = NodeId>,
) -> Vec<usize> {
    let mut dist = vec![usize::MAX; net.node_count()];
    let mut queue = VecDeque::new();
    for s in sources {
        if dist[s] == usize::MAX {
            dist[s] = 0;
            queue.push_back(s);
        }
    }
    while let Some(u) = queue.pop_front() {
        for &(v, e) in net.neighbors(u) {
            if active[e] && !immune[v] && dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Exact marginals, outbreak size and detection-time distribution by summing
/// over every configuration of the edges that can transmit.
pub fn exact_enumerate(net: &Network, query: &OracleQuery) -> Result<OracleEstimate> {
    query.validate(net)?;
    let n = net.node_count();
    let immune = query.vaccinated.mask(n);
    let usable = |e: usize| {
        let (u, v) = net.endpoints(e);
        !immune[u] && !immune[v]
    };
    let free: Vec<usize> = (0..net.edge_count())
        .filter(|&e| usable(e) && net.prob(e) > 0.0 && net.prob(e) < 1.0)
        .collect();
    if free.len() > EXACT_EDGE_CAP {
        return Err(Error::EnumerationCap {
            edges: free.len(),
            cap: EXACT_EDGE_CAP,
        });
    }
    // Infection and detection cannot happen later than n - 1 steps.
    let t_max = n.max(1);
    let horizon = query.horizon;
    // by_time[i][t] = probability i is infected by time t, t <= t_max.
    let mut by_time = vec![vec![0.0; t_max + 1]; n];
    let mut detect_cdf = vec![0.0; t_max + 1];
    let base: Vec<bool> = (0..net.edge_count())
        .map(|e| usable(e) && net.prob(e) >= 1.0)
        .collect();

    for mask in 0u32..(1u32 << free.len()) {
        let mut active = base.clone();
        let mut weight = 1.0;
        for (bit, &e) in free.iter().enumerate() {
            let p = net.prob(e);
            if mask & (1 << bit) != 0 {
                active[e] = true;
                weight *= p;
            } else {
                weight *= 1.0 - p;
            }
        }
        // Contribution of a seed-to-node distance vector, weighted by `w`.
        let mut add_single = |dist: &[usize], w: f64| {
            for i in 0..n {
                if dist[i] <= t_max {
                    for v in &mut by_time[i][dist[i]..] {
                        *v += w;
                    }
                }
            }
            if !query.sentinels.is_empty() {
                let first = query.sentinels.iter().map(|k| dist[k]).min().unwrap_or(usize::MAX);
                if first <= t_max {
                    for v in &mut detect_cdf[first..] {
                        *v += w;
                    }
                }
            }
        };
        match &query.seeding {
            Seeding::Set(s) => {
                let dist = active_distances(net, &active, &immune, s.iter());
                add_single(&dist, weight);
            }
            Seeding::UniformSingle(s) => {
                let share = weight / s.len() as f64;
                for seed in s.iter() {
                    let dist = active_distances(net, &active, &immune, std::iter::once(seed));
                    add_single(&dist, share);
                }
            }
            Seeding::Independent(v) => {
                // P(infected by t) = 1 - Π over seeds within distance t.
                let all: Vec<Vec<usize>> = (0..n)
                    .map(|j| {
                        if immune[j] {
                            vec![usize::MAX; n]
                        } else {
                            active_distances(net, &active, &immune, std::iter::once(j))
                        }
                    })
                    .collect();
                for i in 0..n {
                    for t in 0..=t_max {
                        let escape: f64 = (0..n)
                            .filter(|&j| all[j][i] <= t)
                            .map(|j| 1.0 - v.get(j))
                            .product();
                        by_time[i][t] += weight * (1.0 - escape);
                    }
                }
                if !query.sentinels.is_empty() {
                    for t in 0..=t_max {
                        let escape: f64 = (0..n)
                            .filter(|&j| query.sentinels.iter().any(|k| all[j][k] <= t))
                            .map(|j| 1.0 - v.get(j))
                            .product();
                        detect_cdf[t] += weight * (1.0 - escape);
                    }
                }
            }
        }
    }

    let marginals: Vec<f64> = by_time.iter().map(|h| h[t_max].min(1.0)).collect();
    let temporal = by_time
        .iter()
        .map(|h| (0..=horizon).map(|t| h[t.min(t_max)].min(1.0)).collect())
        .collect();
    let detection = (!query.sentinels.is_empty()).then(|| {
        let mut pmf = Vec::with_capacity(t_max + 1);
        let mut prev = 0.0;
        for &c in &detect_cdf {
            pmf.push((c - prev).max(0.0));
            prev = c;
        }
        Detection {
            pmf,
            never: (1.0 - prev).max(0.0),
        }
    });
    Ok(OracleEstimate {
        expected_size: marginals.iter().sum(),
        marginal_std_err: vec![0.0; n],
        marginals,
        temporal,
        detection_std_err: detection
            .as_ref()
            .map(|d| vec![0.0; d.pmf.len()])
            .unwrap_or_default(),
        detection,
        n_sims: None,
        size_std_err: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn path(p: f64) -> Network {
        Network::uniform(3, &[(0, 1), (1, 2)], p).unwrap()
    }

    fn triangle(p: f64) -> Network {
        Network::uniform(3, &[(0, 1), (1, 2), (0, 2)], p).unwrap()
    }

    fn set(nodes: &[usize]) -> NodeSet {
        NodeSet::new(nodes.iter().copied(), 64).unwrap()
    }

    #[test]
    fn cascade_on_saturated_path() {
        let trace = simulate_cascade(&path(1.0), &set(&[0]), &set(&[]), &mut stream(0, 0)).unwrap();
        assert_eq!(trace.infection_time, vec![Some(0), Some(1), Some(2)]);
        assert_eq!(trace.final_size, 3);
        let blocked =
            simulate_cascade(&path(1.0), &set(&[0]), &set(&[1]), &mut stream(0, 0)).unwrap();
        assert_eq!(blocked.final_size, 1);
        let dead = simulate_cascade(&path(0.0), &set(&[0]), &set(&[]), &mut stream(0, 0)).unwrap();
        assert_eq!(dead.final_size, 1);
        assert!(simulate_cascade(&path(1.0), &set(&[1]), &set(&[1]), &mut stream(0, 0)).is_err());
    }

    #[test]
    fn mc_path_and_saturation() {
        let p = 0.6;
        let q = OracleQuery::new(Seeding::Set(set(&[0])), 5);
        let est = mc_estimate(&path(p), &q, 200_000, 3).unwrap();
        assert!((est.marginals[2] - p * p).abs() < 4.0 * est.marginal_std_err[2]);
        let karate = crate::netgraph::karate_club(1.0);
        let est = mc_estimate(&karate, &q, 1000, 3).unwrap();
        assert_eq!(est.expected_size, 34.0);
    }

    #[test]
    fn mc_triangle_matches_enumeration() {
        let q = OracleQuery::new(Seeding::Set(set(&[0])), 5);
        let est = mc_estimate(&triangle(0.5), &q, 1_000_000, 11).unwrap();
        assert!((est.marginals[1] - 0.625).abs() < 3.0 * est.marginal_std_err[1]);
        let sum: f64 = est.marginals.iter().sum();
        assert!((sum - est.expected_size).abs() < 1e-9);
    }

    #[test]
    fn exact_examples() {
        let single = Network::uniform(2, &[(0, 1)], 0.3).unwrap();
        let q = OracleQuery::new(Seeding::Set(set(&[0])), 3);
        assert!((exact_enumerate(&single, &q).unwrap().marginals[1] - 0.3).abs() < 1e-15);

        let est = exact_enumerate(&triangle(0.5), &q).unwrap();
        assert!((est.temporal[1][1] - 0.5).abs() < 1e-15);
        assert!((est.marginals[1] - 0.625).abs() < 1e-15);

        let q = q.sentinels(set(&[2]));
        let est = exact_enumerate(&path(1.0), &q).unwrap();
        let det = est.detection.unwrap();
        assert_eq!(det.pmf[2], 1.0);
        assert_eq!(det.never, 0.0);
    }

    #[test]
    fn exact_uniform_seed_with_vaccination() {
        // Vaccinating node 2 of the triangle leaves one edge.
        let q = OracleQuery::new(Seeding::UniformSingle(set(&[0, 1])), 4).vaccinated(set(&[2]));
        let est = exact_enumerate(&triangle(0.5), &q).unwrap();
        assert!((est.expected_size - 1.5).abs() < 1e-15);
        assert_eq!(est.marginals[2], 0.0);
    }

    #[test]
    fn exact_independent_seeding_single_edge() {
        let net = Network::uniform(2, &[(0, 1)], 0.4).unwrap();
        let s = SeedVector::new(vec![0.5, 0.25]).unwrap();
        let est = exact_enumerate(&net, &OracleQuery::new(Seeding::Independent(s), 3)).unwrap();
        // Node 1: seeded, or node 0 seeded and the edge transmits.
        let want = 1.0 - 0.75 * (1.0 - 0.5 * 0.4);
        assert!((est.marginals[1] - want).abs() < 1e-15);
        assert!((est.temporal[1][0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn exact_cap_applies() {
        let edges: Vec<_> = (1..=21).map(|v| (0, v)).collect();
        let net = Network::uniform(22, &edges, 0.5).unwrap();
        let q = OracleQuery::new(Seeding::Set(set(&[0])), 2);
        assert!(matches!(
            exact_enumerate(&net, &q),
            Err(Error::EnumerationCap { .. })
        ));
    }

    #[test]
    fn mc_is_thread_count_independent() {
        let net = crate::netgraph::karate_club(0.3);
        let q = OracleQuery::new(Seeding::UniformSingle(set(&(0..34).collect::<Vec<_>>())), 8)
            .sentinels(set(&[0, 33]));
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| mc_estimate(&net, &q, 5000, 42).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
