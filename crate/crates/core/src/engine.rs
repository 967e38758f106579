//! Classical and neighborhood message passing for the independent cascade.
//!
//! [`classical_mp`] iterates the pairwise messages in closed form.
//! [`NmpModel`] freezes one percolation sample set per owner (each node's
//! neighborhood and each message's conditional neighborhood) and then runs the
//! dynamic neighborhood equations for any seed vector: a node is infected by
//! time `t` in outcome `γ` if some node `k` reachable from it at active-path
//! distance `ℓ_k` was infected from outside the neighborhood by `t - ℓ_k`.
//! Message values before time zero are zero.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighborhoods::{MessageIndex, Neighborhoods, DEFAULT_MAX_RADIUS};
use crate::netgraph::{Network, NodeId, NodeSet};
use crate::percolation::{LocalGraph, PercolationSample, SamplerKind};
use crate::rng;

/// Per-node probability of being an initial seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedVector(Vec<f64>);

impl SeedVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::Config(format!("seed probability {bad} outside [0, 1]")));
        }
        Ok(SeedVector(values))
    }

    /// `s_i = 1` on `set`, zero elsewhere.
    pub fn indicator(node_count: usize, set: &NodeSet) -> Self {
        let mut s = vec![0.0; node_count];
        for i in set.iter() {
            s[i] = 1.0;
        }
        SeedVector(s)
    }

    /// Uniform `1 / #eligible` on nodes outside `excluded`.
    pub fn uniform_excluding(node_count: usize, excluded: &NodeSet) -> Self {
        let eligible = node_count - excluded.iter().filter(|&i| i < node_count).count();
        let mut s = vec![0.0; node_count];
        if eligible > 0 {
            let share = 1.0 / eligible as f64;
            for (i, v) in s.iter_mut().enumerate() {
                if !excluded.contains(i) {
                    *v = share;
                }
            }
        }
        SeedVector(s)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: NodeId) -> f64 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub radius: usize,
    pub samples: usize,
    pub horizon: usize,
    pub tol: f64,
    pub sampler: SamplerKind,
    pub master_seed: u64,
    pub max_radius: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            radius: 1,
            samples: 1500,
            horizon: 20,
            tol: 1e-6,
            sampler: SamplerKind::Bfs,
            master_seed: 0,
            max_radius: DEFAULT_MAX_RADIUS,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.samples < 1 {
            return Err(Error::Config("sample count must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        if self.radius > self.max_radius {
            return Err(Error::RadiusTooLarge {
                radius: self.radius,
                cap: self.max_radius,
            });
        }
        Ok(())
    }
}

/// `pi[i][t]` for `t = 0..=T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalHistory {
    pub pi: Vec<Vec<f64>>,
}

impl MarginalHistory {
    pub fn horizon(&self) -> usize {
        self.pi.first().map_or(0, |h| h.len().saturating_sub(1))
    }

    pub fn at(&self, t: usize) -> Vec<f64> {
        self.pi.iter().map(|h| h[t.min(h.len() - 1)]).collect()
    }

    pub fn last(&self) -> Vec<f64> {
        self.pi.iter().map(|h| *h.last().unwrap_or(&0.0)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Message histories; `messages[m] = (k, i)` with values `π_{k\i}(0..=T)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MessageState {
    pub messages: Vec<(NodeId, NodeId)>,
    pub values: Vec<Vec<f64>>,
}

impl MessageState {
    pub fn get(&self, k: NodeId, i: NodeId) -> Option<&[f64]> {
        self.messages
            .binary_search_by_key(&(i, k), |&(a, b)| (b, a))
            .ok()
            .map(|m| self.values[m].as_slice())
    }

    pub fn horizon(&self) -> usize {
        self.values.first().map_or(0, |h| h.len().saturating_sub(1))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyState {
    pub values: Vec<f64>,
    pub converged: bool,
}

/// Final marginals and whether the last step moved any node by less than `tol`.
pub fn steady_state(hist: &MarginalHistory, tol: f64) -> SteadyState {
    let t = hist.horizon();
    let values = hist.last();
    let converged = t >= 1
        && hist
            .pi
            .iter()
            .all(|h| (h[t] - h[t - 1]).abs() < tol);
    SteadyState { values, converged }
}

/// Pairwise message passing on directed edges, synchronous schedule.
pub fn classical_mp(
    net: &Network,
    seeds: &SeedVector,
    horizon: usize,
) -> Result<(MarginalHistory, MessageState)> {
    check_seeds(net, seeds)?;
    let n = net.node_count();
    // Message (k, i) lives at slot[i][pos of k in sorted neighbors of i].
    let mut sorted_nbrs: Vec<Vec<(NodeId, f64)>> = (0..n)
        .map(|i| {
            let mut v: Vec<_> = net
                .neighbors(i)
                .iter()
                .map(|&(k, e)| (k, net.prob(e)))
                .collect();
            v.sort_by_key(|&(k, _)| k);
            v
        })
        .collect();
    sorted_nbrs.shrink_to_fit();
    let mut messages = Vec::new();
    let mut start = Vec::with_capacity(n + 1);
    for (i, nbrs) in sorted_nbrs.iter().enumerate() {
        start.push(messages.len());
        messages.extend(nbrs.iter().map(|&(k, _)| (k, i)));
    }
    start.push(messages.len());
    let slot = |k: NodeId, i: NodeId| -> usize {
        let pos = sorted_nbrs[i]
            .binary_search_by_key(&k, |&(x, _)| x)
            .expect("neighbor");
        start[i] + pos
    };

    let mut values: Vec<Vec<f64>> = messages
        .iter()
        .map(|&(k, _)| {
            let mut h = Vec::with_capacity(horizon + 1);
            h.push(seeds.get(k));
            h
        })
        .collect();
    let mut pi: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut h = Vec::with_capacity(horizon + 1);
            h.push(seeds.get(i));
            h
        })
        .collect();
    for t in 1..=horizon {
        let next: Vec<f64> = messages
            .iter()
            .map(|&(k, i)| {
                let survive: f64 = sorted_nbrs[k]
                    .iter()
                    .filter(|&&(m, _)| m != i)
                    .map(|&(m, p)| 1.0 - p * values[slot(m, k)][t - 1])
                    .product();
                let s = seeds.get(k);
                s + (1.0 - s) * (1.0 - survive)
            })
            .collect();
        for i in 0..n {
            let survive: f64 = sorted_nbrs[i]
                .iter()
                .map(|&(m, p)| 1.0 - p * values[slot(m, i)][t - 1])
                .product();
            let s = seeds.get(i);
            pi[i].push((s + (1.0 - s) * (1.0 - survive)).clamp(0.0, 1.0));
        }
        for (h, v) in values.iter_mut().zip(next) {
            h.push(v.clamp(0.0, 1.0));
        }
    }
    Ok((MarginalHistory { pi }, MessageState { messages, values }))
}

fn check_seeds(net: &Network, seeds: &SeedVector) -> Result<()> {
    if seeds.len() != net.node_count() {
        return Err(Error::Config(format!(
            "seed vector has {} entries for {} nodes",
            seeds.len(),
            net.node_count()
        )));
    }
    Ok(())
}

/// Evaluation time for [`nmp_conditional_marginal`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalTime {
    At(usize),
    Infinity,
}

/// Infection probability of the focal node given one percolation outcome:
/// `s + (1 - s) [1 - ∏_k (1 - π_k(t - ℓ_k))]` over reachable `k ≠ focal`.
///
/// `incoming(k, t)` returns the message of `k` into the focal neighborhood at
/// time `t` (`None` time means the static value).
pub fn nmp_conditional_marginal(
    sample: &PercolationSample,
    focal: NodeId,
    seed: f64,
    time: EvalTime,
    incoming: impl Fn(NodeId, Option<usize>) -> Option<f64>,
) -> Result<f64> {
    let mut survive = 1.0;
    for &(k, dist) in &sample.reached {
        if k == focal {
            continue;
        }
        let value = match time {
            EvalTime::Infinity => incoming(k, None),
            EvalTime::At(t) if dist > t => Some(0.0),
            EvalTime::At(t) => incoming(k, Some(t - dist)),
        }
        .ok_or_else(|| Error::Usage(format!("missing message history for node {k}")))?;
        survive *= 1.0 - value;
    }
    Ok(seed + (1.0 - seed) * (1.0 - survive))
}

/// Deduplicated outcomes of one owner, flattened. Each term is
/// `(incoming message id, active-path distance)`.
#[derive(Clone, Debug, Default)]
struct OwnerPlan {
    focal: NodeId,
    weights: Vec<f64>,
    starts: Vec<u32>,
    terms: Vec<(u32, u32)>,
}

impl OwnerPlan {
    fn max_dist(&self) -> usize {
        self.terms.iter().map(|&(_, d)| d as usize).max().unwrap_or(0)
    }

    fn outcomes(&self) -> usize {
        self.weights.len()
    }

    /// `Σ_γ w_γ [1 - ∏ (1 - π(t - ℓ))]` and `Σ_γ w_γ`.
    fn evaluate(&self, frames: &[Vec<f64>], t: usize) -> (f64, f64) {
        let mut hit = 0.0;
        let mut total = 0.0;
        for (o, &w) in self.weights.iter().enumerate() {
            let lo = self.starts[o] as usize;
            let hi = self.starts[o + 1] as usize;
            let mut survive = 1.0;
            for &(slot, d) in &self.terms[lo..hi] {
                let d = d as usize;
                if d <= t {
                    survive *= 1.0 - frames[t - d][slot as usize];
                }
            }
            hit += w * (1.0 - survive);
            total += w;
        }
        (hit, total)
    }
}

/// Frozen neighborhood samples for one network, radius and blocked set.
/// Reusable across seed vectors.
#[derive(Clone, Debug)]
pub struct NmpModel {
    node_count: usize,
    radius: usize,
    sampler: SamplerKind,
    index: MessageIndex,
    marginal_plans: Vec<OwnerPlan>,
    message_plans: Vec<OwnerPlan>,
    blocked: Vec<bool>,
    lookback: usize,
}

impl NmpModel {
    /// Samples every owner. When `blocked` is given, blocked nodes neither
    /// transmit nor relay: in each owner's outcomes, edges touching a blocked
    /// node other than the owner's focal node are closed, and blocked nodes
    /// contribute no outside infection and no self-seeding.
    pub fn prepare(
        net: &Network,
        hoods: &Neighborhoods,
        cfg: &EngineConfig,
        blocked: Option<&NodeSet>,
    ) -> Result<Self> {
        cfg.validate()?;
        if hoods.radius != cfg.radius || hoods.len() != net.node_count() {
            return Err(Error::Usage(
                "neighborhoods were built for a different network or radius".into(),
            ));
        }
        let n = net.node_count();
        let blocked_mask = blocked.map_or_else(|| vec![false; n], |b| b.mask(n));
        let index = MessageIndex::build(hoods);

        let plan_for = |focal: NodeId, edges: &[usize], stream: u64| -> Result<OwnerPlan> {
            let local = LocalGraph::with_prob(net, edges, focal, |e| {
                let (u, v) = net.endpoints(e);
                let closed = (u != focal && blocked_mask[u]) || (v != focal && blocked_mask[v]);
                if closed {
                    0.0
                } else {
                    net.prob(e)
                }
            });
            let mut rng = rng::stream(cfg.master_seed, stream);
            let set = local.sample(cfg.sampler, cfg.samples, &mut rng)?;
            let incoming = index.incoming(focal);
            let mut merged: BTreeMap<Vec<(u32, u32)>, f64> = BTreeMap::new();
            set.visit(|w, reached| {
                let key: Vec<(u32, u32)> = reached
                    .iter()
                    .filter(|&&(k, _)| k != focal && !blocked_mask[k])
                    .map(|&(k, d)| {
                        let m = index
                            .lookup(k, focal)
                            .expect("reachable node lies in the focal neighborhood");
                        debug_assert!(incoming.contains(&m));
                        (m as u32, d as u32)
                    })
                    .collect();
                *merged.entry(key).or_insert(0.0) += w;
            });
            let mut plan = OwnerPlan {
                focal,
                ..OwnerPlan::default()
            };
            plan.starts.push(0);
            for (key, w) in merged {
                plan.weights.push(w);
                plan.terms.extend(key);
                plan.starts.push(plan.terms.len() as u32);
            }
            Ok(plan)
        };

        let marginal_plans = (0..n)
            .into_par_iter()
            .map(|i| plan_for(i, &hoods.get(i).edge_set, i as u64))
            .collect::<Result<Vec<_>>>()?;
        let message_plans = (0..index.len())
            .into_par_iter()
            .map(|m| {
                let (k, i) = index.message(m);
                let support = hoods.conditional(k, i)?;
                plan_for(k, &support.edge_set, (n + m) as u64)
            })
            .collect::<Result<Vec<_>>>()?;
        let lookback = marginal_plans
            .iter()
            .chain(&message_plans)
            .map(OwnerPlan::max_dist)
            .max()
            .unwrap_or(0);
        Ok(NmpModel {
            node_count: n,
            radius: cfg.radius,
            sampler: cfg.sampler,
            index,
            marginal_plans,
            message_plans,
            blocked: blocked_mask,
            lookback,
        })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn sampler(&self) -> SamplerKind {
        self.sampler
    }

    pub fn message_index(&self) -> &MessageIndex {
        &self.index
    }

    /// Longest active-path distance in any frozen outcome.
    pub fn lookback(&self) -> usize {
        self.lookback
    }

    /// Distinct outcomes kept after merging duplicates, over all owners.
    pub fn outcome_count(&self) -> usize {
        self.marginal_plans
            .iter()
            .chain(&self.message_plans)
            .map(OwnerPlan::outcomes)
            .sum()
    }

    fn effective_seed(&self, seeds: &SeedVector, i: NodeId) -> f64 {
        if self.blocked[i] {
            0.0
        } else {
            seeds.get(i)
        }
    }

    /// Synchronous sweeps `t = 1..=horizon`; every value at `t` reads only
    /// message values at earlier times.
    pub fn run(&self, seeds: &SeedVector, horizon: usize) -> Result<(MarginalHistory, MessageState)> {
        if seeds.len() != self.node_count {
            return Err(Error::Config(format!(
                "seed vector has {} entries for {} nodes",
                seeds.len(),
                self.node_count
            )));
        }
        if horizon < 1 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if horizon < self.lookback {
            return Err(Error::HorizonTooShort {
                horizon,
                required: self.lookback,
            });
        }
        let combine = |plan: &OwnerPlan, frames: &[Vec<f64>], t: usize| -> f64 {
            let s = self.effective_seed(seeds, plan.focal);
            let (hit, total) = plan.evaluate(frames, t);
            (s * total + (1.0 - s) * hit).clamp(0.0, 1.0)
        };

        let mut frames: Vec<Vec<f64>> = Vec::with_capacity(horizon + 1);
        frames.push(
            (0..self.index.len())
                .map(|m| self.effective_seed(seeds, self.index.message(m).0))
                .collect(),
        );
        let mut marginal_frames: Vec<Vec<f64>> = Vec::with_capacity(horizon + 1);
        marginal_frames.push(
            (0..self.node_count)
                .map(|i| self.effective_seed(seeds, i))
                .collect(),
        );
        for t in 1..=horizon {
            // Every term has distance >= 1, so only frames[..t] are read.
            let next: Vec<f64> = self
                .message_plans
                .par_iter()
                .map(|plan| combine(plan, &frames, t))
                .collect();
            let marg: Vec<f64> = self
                .marginal_plans
                .par_iter()
                .map(|plan| combine(plan, &frames, t))
                .collect();
            frames.push(next);
            marginal_frames.push(marg);
        }

        let pi = (0..self.node_count)
            .map(|i| marginal_frames.iter().map(|f| f[i]).collect())
            .collect();
        let values = (0..self.index.len())
            .map(|m| frames.iter().map(|f| f[m]).collect())
            .collect();
        let messages = self.index.iter().map(|(_, km)| km).collect();
        Ok((MarginalHistory { pi }, MessageState { messages, values }))
    }
}

/// Prepares a model and runs it once.
pub fn run_nmp(
    net: &Network,
    seeds: &SeedVector,
    cfg: &EngineConfig,
    blocked: Option<&NodeSet>,
) -> Result<(MarginalHistory, MessageState)> {
    cfg.validate()?;
    let hoods = Neighborhoods::build(net, cfg.radius, cfg.max_radius)?;
    NmpModel::prepare(net, &hoods, cfg, blocked)?.run(seeds, cfg.horizon)
}
