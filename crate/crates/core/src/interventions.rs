//! Intervention specifications, the three quality functions, and the
//! statistics used to compare message passing against the oracles.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::engine::{steady_state, EngineConfig, MarginalHistory, NmpModel, SeedVector};
use crate::error::{Error, Result};
use crate::neighborhoods::Neighborhoods;
use crate::netgraph::{Network, NodeSet};
use crate::oracle::{self, OracleEstimate, OracleQuery, Seeding};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterventionKind {
    Influence,
    Vaccination,
    Sentinel,
}

impl InterventionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InterventionKind::Influence => "influence",
            InterventionKind::Vaccination => "vaccination",
            InterventionKind::Sentinel => "sentinel",
        }
    }

    /// True when smaller quality values are better.
    pub fn lower_is_better(self) -> bool {
        self == InterventionKind::Sentinel
    }
}

impl fmt::Display for InterventionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InterventionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "influence" => Ok(InterventionKind::Influence),
            "vaccination" => Ok(InterventionKind::Vaccination),
            "sentinel" | "sentinels" => Ok(InterventionKind::Sentinel),
            other => Err(Error::Config(format!("unknown intervention '{other}'"))),
        }
    }
}

/// Where outbreaks start for vaccination and sentinel experiments.
#[derive(Clone, Debug, PartialEq)]
pub enum BackgroundSeeding {
    /// Uniform over nodes outside the intervention set.
    UniformEligible,
    Explicit(SeedVector),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterventionSpec {
    pub kind: InterventionKind,
    pub set: NodeSet,
    pub seeding: BackgroundSeeding,
}

impl InterventionSpec {
    pub fn new(kind: InterventionKind, set: NodeSet, net: &Network) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::Config("intervention set is empty".into()));
        }
        for i in set.iter() {
            net.check_node(i)?;
        }
        Ok(InterventionSpec {
            kind,
            set,
            seeding: BackgroundSeeding::UniformEligible,
        })
    }

    pub fn with_seeding(mut self, seeding: SeedVector) -> Self {
        self.seeding = BackgroundSeeding::Explicit(seeding);
        self
    }

    fn same_target(&self, other: &InterventionSpec) -> bool {
        self.kind == other.kind && self.set == other.set
    }

    fn eligible(&self, n: usize) -> NodeSet {
        NodeSet::new((0..n).filter(|&i| !self.set.contains(i)), n)
            .expect("complement of a valid set is valid")
    }

    /// Seed vector handed to message passing.
    pub fn seed_vector(&self, n: usize) -> SeedVector {
        match (&self.kind, &self.seeding) {
            (InterventionKind::Influence, _) => SeedVector::indicator(n, &self.set),
            (_, BackgroundSeeding::Explicit(v)) => v.clone(),
            (_, BackgroundSeeding::UniformEligible) => SeedVector::uniform_excluding(n, &self.set),
        }
    }

    /// Oracle query. Background outbreaks start from a single uniformly
    /// chosen eligible node.
    pub fn oracle_query(&self, n: usize, horizon: usize) -> OracleQuery {
        let background = || match &self.seeding {
            BackgroundSeeding::Explicit(v) => Seeding::Independent(v.clone()),
            BackgroundSeeding::UniformEligible => Seeding::UniformSingle(self.eligible(n)),
        };
        match self.kind {
            InterventionKind::Influence => OracleQuery::new(Seeding::Set(self.set.clone()), horizon),
            InterventionKind::Vaccination => {
                OracleQuery::new(background(), horizon).vaccinated(self.set.clone())
            }
            InterventionKind::Sentinel => {
                OracleQuery::new(background(), horizon).sentinels(self.set.clone())
            }
        }
    }

    fn covers_everything(&self, n: usize) -> bool {
        self.set.len() == n && matches!(self.seeding, BackgroundSeeding::UniformEligible)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    Nmp {
        radius: usize,
        samples: usize,
        sampler: crate::percolation::SamplerKind,
    },
    Mc {
        sims: u64,
    },
    Exact,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Nmp { .. } => "nmp",
            Method::Mc { .. } => "mc",
            Method::Exact => "exact",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QualityReport {
    pub spec: InterventionSpec,
    pub method: Method,
    pub q: f64,
    /// Final per-node infection probabilities.
    pub marginals: Vec<f64>,
    /// Cumulative detection probability `pi_S(t)`, `t = 0..=T` (sentinels only).
    pub detection: Option<Vec<f64>>,
    /// Standard error of `q` (oracle runs).
    pub std_err: Option<f64>,
    pub converged: bool,
    pub warning: Option<String>,
    pub runtime_ms: f64,
}

pub fn quality_influence(marginals: &[f64]) -> f64 {
    marginals.iter().sum()
}

pub fn quality_vaccination(marginals: &[f64]) -> f64 {
    -marginals.iter().sum::<f64>()
}

/// `pi_S(t) = 1 - prod_{i in S} (1 - pi_i(t))`.
pub fn detection_series(hist: &MarginalHistory, sentinels: &NodeSet) -> Vec<f64> {
    (0..=hist.horizon())
        .map(|t| {
            let miss: f64 = sentinels.iter().map(|i| 1.0 - hist.pi[i][t]).product();
            (1.0 - miss).clamp(0.0, 1.0)
        })
        .collect()
}

/// Expected detection time with the diameter as the penalty for never
/// detecting: `(1 - pi_S(T)) D + sum_{t=1..T} t (pi_S(t) - pi_S(t-1))`.
pub fn quality_sentinel(series: &[f64], diameter: usize) -> Result<f64> {
    let Some(&last) = series.last() else {
        return Err(Error::Usage("empty detection series".into()));
    };
    let timed: f64 = series
        .windows(2)
        .enumerate()
        .map(|(t, w)| (t + 1) as f64 * (w[1] - w[0]))
        .sum();
    Ok((1.0 - last) * diameter as f64 + timed)
}

/// Signed error `Q(S) - Q*(S)`.
pub fn error_eps(q_nmp: &QualityReport, q_star: &QualityReport) -> Result<f64> {
    if !q_nmp.spec.same_target(&q_star.spec) {
        return Err(Error::Usage(format!(
            "reports are for different interventions ({} {} vs {} {})",
            q_nmp.spec.kind, q_nmp.spec.set, q_star.spec.kind, q_star.spec.set
        )));
    }
    Ok(q_nmp.q - q_star.q)
}

/// Kendall tau-b between two rankings of the same sets.
pub fn kendall_tau(a: &[(NodeSet, f64)], b: &[(NodeSet, f64)]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Usage("rankings cover different sets".into()));
    }
    let mut a: Vec<&(NodeSet, f64)> = a.iter().collect();
    let mut b: Vec<&(NodeSet, f64)> = b.iter().collect();
    a.sort_by(|x, y| x.0.cmp(&y.0));
    b.sort_by(|x, y| x.0.cmp(&y.0));
    if a.iter().zip(&b).any(|(x, y)| x.0 != y.0) {
        return Err(Error::Usage("rankings cover different sets".into()));
    }
    let x: Vec<f64> = a.iter().map(|e| e.1).collect();
    let y: Vec<f64> = b.iter().map(|e| e.1).collect();
    kendall_tau_b(&x, &y)
}

fn tied_pairs(sorted: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Merge sort that returns the number of inversions.
fn sort_count_swaps(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_count_swaps(&mut v[..mid], &mut buf[..mid]);
    swaps += sort_count_swaps(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Tau-b in O(n log n) (Knight's algorithm).
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::Usage("rank vectors differ in length".into()));
    }
    if n < 2 {
        return Err(Error::Undefined("Kendall tau needs at least 2 items".into()));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::Usage("NaN quality value".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let mut ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let n1 = tied_pairs(&xs);
    let mut n3 = 0u64;
    let mut run = 1u64;
    for i in 1..n {
        if xs[i] == xs[i - 1] && ys[i] == ys[i - 1] {
            run += 1;
        } else {
            n3 += run * (run - 1) / 2;
            run = 1;
        }
    }
    n3 += run * (run - 1) / 2;

    let mut buf = vec![0.0; n];
    let swaps = sort_count_swaps(&mut ys, &mut buf);
    let n2 = tied_pairs(&ys);

    let denom = ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::Undefined("one ranking is constant".into()));
    }
    let numer = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    Ok((numer / denom).clamp(-1.0, 1.0))
}

/// Evaluates interventions with neighborhood message passing. The
/// unblocked model is prepared once and shared by all influence sets.
pub struct NmpEvaluator<'a> {
    net: &'a Network,
    hoods: Neighborhoods,
    cfg: EngineConfig,
    shared: OnceLock<NmpModel>,
    diameter: OnceLock<usize>,
}

impl<'a> NmpEvaluator<'a> {
    pub fn new(net: &'a Network, cfg: EngineConfig) -> Result<Self> {
        cfg.validate()?;
        let hoods = Neighborhoods::build(net, cfg.radius, cfg.max_radius)?;
        Ok(Self::with_neighborhoods(net, hoods, cfg))
    }

    /// Neighborhoods depend only on topology and can be reused across `p`.
    pub fn with_neighborhoods(net: &'a Network, hoods: Neighborhoods, cfg: EngineConfig) -> Self {
        NmpEvaluator {
            net,
            hoods,
            cfg,
            shared: OnceLock::new(),
            diameter: OnceLock::new(),
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    fn method(&self) -> Method {
        Method::Nmp {
            radius: self.cfg.radius,
            samples: self.cfg.samples,
            sampler: self.cfg.sampler,
        }
    }

    fn shared_model(&self) -> Result<&NmpModel> {
        if let Some(model) = self.shared.get() {
            return Ok(model);
        }
        let model = NmpModel::prepare(self.net, &self.hoods, &self.cfg, None)?;
        Ok(self.shared.get_or_init(|| model))
    }

    fn diameter(&self) -> Result<usize> {
        if let Some(&d) = self.diameter.get() {
            return Ok(d);
        }
        let d = self.net.diameter()?;
        Ok(*self.diameter.get_or_init(|| d))
    }

    pub fn evaluate(&self, spec: &InterventionSpec) -> Result<QualityReport> {
        let start = Instant::now();
        let n = self.net.node_count();
        let horizon = self.cfg.horizon;
        let mut warning = None;
        let (hist, detection) = match spec.kind {
            InterventionKind::Influence => {
                let (hist, _) = self.shared_model()?.run(&spec.seed_vector(n), horizon)?;
                (hist, None)
            }
            InterventionKind::Vaccination => {
                if spec.covers_everything(n) {
                    return Ok(self.degenerate(spec, start));
                }
                let blocked = self.net.with_blocked_nodes(&spec.set);
                let model = NmpModel::prepare(&blocked, &self.hoods, &self.cfg, None)?;
                let (hist, _) = model.run(&spec.seed_vector(n), horizon)?;
                (hist, None)
            }
            InterventionKind::Sentinel => {
                if spec.covers_everything(n) {
                    return Err(Error::Config("sentinel set covers every node".into()));
                }
                self.diameter()?;
                let model = NmpModel::prepare(self.net, &self.hoods, &self.cfg, Some(&spec.set))?;
                let (hist, _) = model.run(&spec.seed_vector(n), horizon)?;
                let series = detection_series(&hist, &spec.set);
                (hist, Some(series))
            }
        };
        let steady = steady_state(&hist, self.cfg.tol);
        if !steady.converged {
            warning = Some(format!("not converged within horizon {horizon}"));
        }
        let q = match (spec.kind, &detection) {
            (InterventionKind::Influence, _) => quality_influence(&steady.values),
            (InterventionKind::Vaccination, _) => quality_vaccination(&steady.values),
            (InterventionKind::Sentinel, Some(series)) => quality_sentinel(series, self.diameter()?)?,
            (InterventionKind::Sentinel, None) => unreachable!("sentinel runs record detection"),
        };
        Ok(QualityReport {
            spec: spec.clone(),
            method: self.method(),
            q,
            marginals: steady.values,
            detection,
            std_err: None,
            converged: steady.converged,
            warning,
            runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }

    fn degenerate(&self, spec: &InterventionSpec, start: Instant) -> QualityReport {
        QualityReport {
            spec: spec.clone(),
            method: self.method(),
            q: 0.0,
            marginals: vec![0.0; self.net.node_count()],
            detection: None,
            std_err: None,
            converged: true,
            warning: Some("every node vaccinated".into()),
            runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        }
    }
}

/// Which oracle to use as ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleMethod {
    MonteCarlo { sims: u64, seed: u64 },
    Exact,
}

/// Evaluates an intervention with an oracle.
pub fn evaluate_oracle(
    net: &Network,
    spec: &InterventionSpec,
    method: OracleMethod,
    horizon: usize,
) -> Result<QualityReport> {
    let start = Instant::now();
    let n = net.node_count();
    let report_method = match method {
        OracleMethod::MonteCarlo { sims, .. } => Method::Mc { sims },
        OracleMethod::Exact => Method::Exact,
    };
    if spec.covers_everything(n) {
        if spec.kind == InterventionKind::Vaccination {
            return Ok(QualityReport {
                spec: spec.clone(),
                method: report_method,
                q: 0.0,
                marginals: vec![0.0; n],
                detection: None,
                std_err: Some(0.0),
                converged: true,
                warning: Some("every node vaccinated".into()),
                runtime_ms: start.elapsed().as_secs_f64() * 1e3,
            });
        }
        if spec.kind == InterventionKind::Sentinel {
            return Err(Error::Config("sentinel set covers every node".into()));
        }
    }
    let diameter = match spec.kind {
        InterventionKind::Sentinel => Some(net.diameter()?),
        _ => None,
    };
    let query = spec.oracle_query(n, horizon);
    let est: OracleEstimate = match method {
        OracleMethod::MonteCarlo { sims, seed } => oracle::mc_estimate(net, &query, sims, seed)?,
        OracleMethod::Exact => oracle::exact_enumerate(net, &query)?,
    };
    let (q, std_err, detection) = match spec.kind {
        InterventionKind::Influence => (est.expected_size, est.size_std_err, None),
        InterventionKind::Vaccination => (-est.expected_size, est.size_std_err, None),
        InterventionKind::Sentinel => {
            let det = est.detection.as_ref().expect("sentinel query records detection");
            let series = det.cumulative_series(horizon);
            let d = diameter.expect("computed above");
            let q = quality_sentinel(&series, d)?;
            (q, sentinel_std_err(det, horizon, d, est.n_sims), Some(series))
        }
    };
    Ok(QualityReport {
        spec: spec.clone(),
        method: report_method,
        q,
        marginals: est.marginals,
        detection,
        std_err: Some(std_err),
        converged: true,
        warning: None,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Standard error of the truncated, penalized detection time.
fn sentinel_std_err(det: &oracle::Detection, horizon: usize, diameter: usize, sims: Option<u64>) -> f64 {
    let Some(sims) = sims else { return 0.0 };
    // Per-cascade score: t if detected at t <= T, else D.
    let mut mean = 0.0;
    let mut second = 0.0;
    let mut covered = 0.0;
    for (t, &p) in det.pmf.iter().enumerate().take(horizon + 1) {
        mean += t as f64 * p;
        second += (t * t) as f64 * p;
        covered += p;
    }
    let d = diameter as f64;
    mean += (1.0 - covered) * d;
    second += (1.0 - covered) * d * d;
    ((second - mean * mean).max(0.0) / sims as f64).sqrt()
}
