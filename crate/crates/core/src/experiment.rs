//! Experiment sweeps: every intervention set of size `k` at every `p` and
//! radius, evaluated by message passing (several sampling replicates) and
//! once by an oracle, written as versioned CSV.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::EngineConfig;
use crate::error::{Error, Result};
use crate::interventions::{
    evaluate_oracle, kendall_tau_b, InterventionKind, InterventionSpec, NmpEvaluator,
    OracleMethod, QualityReport,
};
use crate::neighborhoods::{Neighborhoods, DEFAULT_MAX_RADIUS};
use crate::netgraph::{Network, NodeSet};
use crate::percolation::SamplerKind;
use crate::rng::derive_seed;

/// Critical transmission probability of the karate club, for annotation only.
pub const P_CRITICAL: f64 = 0.189;

pub const ROWS_HEADER: &str = "# cascade-nmp rows v1";
pub const SUMMARY_HEADER: &str = "# cascade-nmp summary v1";
pub const CORENESS_HEADER: &str = "# cascade-nmp coreness v1";
pub const TEMPORAL_HEADER: &str = "# cascade-nmp temporal v1";

const ROW_COLUMNS: [&str; 11] = [
    "intervention", "set", "p", "r", "M", "method", "replicate", "Q", "std_err", "runtime_ms",
    "mean_coreness",
];

/// Largest number of sets a single sweep may enumerate.
pub const MAX_SETS: usize = 1_000_000;
const MAX_P_VALUES: usize = 10_000;
const ORACLE_TAG: u64 = 0x6f72_6163;
const NMP_TAG: u64 = 0x6e6d_70;

#[derive(Clone, Debug, PartialEq)]
pub enum SetSelection {
    /// Every set of this size.
    Size(usize),
    Explicit(Vec<NodeSet>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleChoice {
    MonteCarlo { sims: u64 },
    Exact,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub intervention: InterventionKind,
    pub sets: SetSelection,
    pub p_values: Vec<f64>,
    pub radii: Vec<usize>,
    pub samples: usize,
    pub sampler: SamplerKind,
    pub oracle: OracleChoice,
    pub replicates: usize,
    /// Defaults to diameter + longest neighborhood path + 5.
    pub horizon: Option<usize>,
    pub master_seed: u64,
    pub max_radius: usize,
    pub tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            intervention: InterventionKind::Influence,
            sets: SetSelection::Size(1),
            p_values: vec![0.1],
            radii: vec![0, 1, 2],
            samples: 1500,
            sampler: SamplerKind::Bfs,
            oracle: OracleChoice::MonteCarlo { sims: 100_000 },
            replicates: 20,
            horizon: None,
            master_seed: 0,
            max_radius: DEFAULT_MAX_RADIUS,
            tol: 1e-6,
        }
    }
}

impl ExperimentConfig {
    /// Checks everything that can be checked before any sampling.
    pub fn validate(&self, net: &Network) -> Result<()> {
        let n = net.node_count();
        match &self.sets {
            SetSelection::Size(k) => {
                if *k == 0 || *k > n {
                    return Err(Error::Config(format!(
                        "set size {k} must be between 1 and the node count {n}"
                    )));
                }
                let count = binomial(n, *k);
                if count > MAX_SETS as u128 {
                    return Err(Error::Config(format!(
                        "{count} sets of size {k} exceed the limit of {MAX_SETS}"
                    )));
                }
            }
            SetSelection::Explicit(sets) => {
                if sets.is_empty() {
                    return Err(Error::Config("no intervention sets given".into()));
                }
                for set in sets {
                    if set.is_empty() {
                        return Err(Error::Config("empty intervention set".into()));
                    }
                    for i in set.iter() {
                        net.check_node(i).map_err(|e| Error::Config(e.to_string()))?;
                    }
                }
            }
        }
        if self.p_values.is_empty() {
            return Err(Error::Config("no p values".into()));
        }
        if let Some(p) = self.p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Config(format!("p value {p} outside [0, 1]")));
        }
        if self.radii.is_empty() {
            return Err(Error::Config("no radii".into()));
        }
        if let Some(&r) = self.radii.iter().find(|&&r| r > self.max_radius) {
            return Err(Error::RadiusTooLarge {
                radius: r,
                cap: self.max_radius,
            });
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicate count must be at least 1".into()));
        }
        if self.samples == 0 {
            return Err(Error::Config("sample count must be at least 1".into()));
        }
        if let OracleChoice::MonteCarlo { sims: 0 } = self.oracle {
            return Err(Error::Config("Monte Carlo simulation count must be at least 1".into()));
        }
        if self.horizon == Some(0) {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.intervention == InterventionKind::Sentinel && !net.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(())
    }

    pub fn sets(&self, n: usize) -> Vec<NodeSet> {
        match &self.sets {
            SetSelection::Size(k) => combinations(n, *k),
            SetSelection::Explicit(sets) => {
                let mut sets = sets.clone();
                sets.sort();
                sets.dedup();
                sets
            }
        }
    }

    /// Number of rows `run_experiment` emits.
    pub fn row_count(&self, n: usize) -> usize {
        let sets = self.sets(n).len();
        self.p_values.len() * sets * (1 + self.radii.len() * self.replicates)
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| {
        (acc * (n - i) as u128 / (i + 1) as u128).min(u128::MAX / (n as u128 + 1))
    })
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<NodeSet> {
    let mut out = Vec::new();
    if k == 0 || k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(NodeSet::new(idx.iter().copied(), n).expect("indices are in range"));
        let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Comma list (`0.1,0.2`) or inclusive range `start:stop:step`.
pub fn parse_p_values(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    let bad = |msg: String| Error::Config(msg);
    let values: Vec<f64> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').map(str::trim).collect();
        let [start, stop, step] = parts.as_slice() else {
            return Err(bad(format!("range '{text}' is not start:stop:step")));
        };
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| bad(format!("'{s}' is not a number")))
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if !(step > 0.0) || !step.is_finite() || !start.is_finite() || !stop.is_finite() {
            return Err(bad(format!("range '{text}' needs a positive finite step")));
        }
        if stop < start {
            return Err(bad(format!("range '{text}' ends before it starts")));
        }
        let steps = ((stop - start) / step + 1e-9).floor();
        if steps >= MAX_P_VALUES as f64 {
            return Err(bad(format!("range '{text}' has too many values")));
        }
        (0..=steps as usize)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect()
    } else {
        text.split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<f64>()
                    .map_err(|_| bad(format!("'{s}' is not a number")))
            })
            .collect::<Result<_>>()?
    };
    if values.len() > MAX_P_VALUES {
        return Err(bad("too many p values".into()));
    }
    if let Some(p) = values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(bad(format!("p value {p} outside [0, 1]")));
    }
    Ok(values)
}

/// Comma-separated non-negative integers.
pub fn parse_usize_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<usize>()
                .map_err(|_| Error::Config(format!("'{s}' is not a non-negative integer")))
        })
        .collect()
}

/// Sets separated by `,`, members by `;`, e.g. `0;5,2;3`.
pub fn parse_sets(text: &str, node_count: usize) -> Result<Vec<NodeSet>> {
    text.split(',')
        .map(|group| parse_set(group, node_count))
        .collect()
}

fn parse_set(text: &str, node_count: usize) -> Result<NodeSet> {
    let ids = text
        .split(';')
        .map(|s| {
            let s = s.trim();
            s.parse::<usize>()
                .map_err(|_| Error::Config(format!("'{s}' is not a node id")))
        })
        .collect::<Result<Vec<_>>>()?;
    if ids.is_empty() {
        return Err(Error::Config("empty set".into()));
    }
    NodeSet::new(ids, node_count).map_err(|e| Error::Config(e.to_string()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub intervention: InterventionKind,
    pub set: NodeSet,
    pub p: f64,
    pub radius: Option<usize>,
    pub samples: Option<usize>,
    /// `nmp`, `mc` or `exact`.
    pub method: String,
    pub replicate: Option<usize>,
    pub q: f64,
    pub std_err: Option<f64>,
    pub runtime_ms: f64,
    pub mean_coreness: f64,
}

impl ResultRow {
    pub fn is_oracle(&self) -> bool {
        self.method != "nmp"
    }

    fn sort_key(&self) -> (u64, &NodeSet, bool, Option<usize>, Option<usize>) {
        (self.p.to_bits(), &self.set, !self.is_oracle(), self.radius, self.replicate)
    }
}

/// Long-format `pi_S(t)` rows of sentinel experiments.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalRow {
    pub set: NodeSet,
    pub p: f64,
    pub radius: Option<usize>,
    pub method: String,
    pub replicate: Option<usize>,
    pub t: usize,
    pub detection: f64,
}

/// Output of one `p` value, emitted as soon as it is complete.
#[derive(Clone, Debug, Default)]
pub struct Block {
    pub rows: Vec<ResultRow>,
    pub temporal: Vec<TemporalRow>,
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt<T: ToString>(x: Option<T>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

/// Largest finite shortest-path distance; equals the diameter when connected.
fn max_eccentricity(net: &Network) -> usize {
    (0..net.node_count())
        .flat_map(|s| net.bfs_distances(s).into_iter().flatten())
        .max()
        .unwrap_or(0)
}

/// Horizon used for every run of `cfg` on `net`.
pub fn default_horizon(net: &Network, hoods: &[Neighborhoods]) -> usize {
    let longest = hoods
        .iter()
        .flat_map(|h| h.iter().map(|n| n.node_set.len().saturating_sub(1)))
        .max()
        .unwrap_or(0);
    max_eccentricity(net) + longest + 5
}

fn mean_coreness(coreness: &[usize], set: &NodeSet) -> f64 {
    set.iter().map(|i| coreness[i] as f64).sum::<f64>() / set.len() as f64
}

/// Runs the sweep, calling `emit` once per `p` value in input order.
/// Output is independent of the thread count.
pub fn run_experiment(
    net: &Network,
    cfg: &ExperimentConfig,
    mut emit: impl FnMut(Block) -> Result<()>,
) -> Result<()> {
    cfg.validate(net)?;
    let n = net.node_count();
    let sets = cfg.sets(n);
    let coreness = net.coreness();
    let hoods = cfg
        .radii
        .iter()
        .map(|&r| Neighborhoods::build(net, r, cfg.max_radius))
        .collect::<Result<Vec<_>>>()?;
    let horizon = cfg.horizon.unwrap_or_else(|| default_horizon(net, &hoods));
    let specs = sets
        .iter()
        .map(|s| InterventionSpec::new(cfg.intervention, s.clone(), net))
        .collect::<Result<Vec<_>>>()?;
    let temporal_wanted = cfg.intervention == InterventionKind::Sentinel;

    for &p in &cfg.p_values {
        let net_p = net.with_uniform_prob(p)?;
        let mut block = Block::default();
        let push = |block: &mut Block, report: &QualityReport, radius, replicate| {
            let set = report.spec.set.clone();
            if temporal_wanted {
                if let Some(series) = &report.detection {
                    block.temporal.extend(series.iter().enumerate().map(|(t, &d)| TemporalRow {
                        set: set.clone(),
                        p,
                        radius,
                        method: report.method.label().to_string(),
                        replicate,
                        t,
                        detection: d,
                    }));
                }
            }
            block.rows.push(ResultRow {
                intervention: cfg.intervention,
                mean_coreness: mean_coreness(&coreness, &set),
                set,
                p,
                radius,
                samples: radius.map(|_| cfg.samples),
                method: report.method.label().to_string(),
                replicate,
                q: report.q,
                std_err: report.std_err,
                runtime_ms: report.runtime_ms,
            });
        };

        let oracle_reports = specs
            .par_iter()
            .map(|spec| {
                let method = match cfg.oracle {
                    OracleChoice::Exact => OracleMethod::Exact,
                    OracleChoice::MonteCarlo { sims } => {
                        let mut tags = vec![ORACLE_TAG, p.to_bits()];
                        tags.extend(spec.set.iter().map(|i| i as u64));
                        OracleMethod::MonteCarlo {
                            sims,
                            seed: derive_seed(cfg.master_seed, &tags),
                        }
                    }
                };
                evaluate_oracle(&net_p, spec, method, horizon)
            })
            .collect::<Result<Vec<_>>>()?;
        for report in &oracle_reports {
            push(&mut block, report, None, None);
        }

        for (&radius, hood) in cfg.radii.iter().zip(&hoods) {
            for replicate in 0..cfg.replicates {
                let engine = EngineConfig {
                    radius,
                    samples: cfg.samples,
                    horizon,
                    tol: cfg.tol,
                    sampler: cfg.sampler,
                    master_seed: derive_seed(
                        cfg.master_seed,
                        &[NMP_TAG, p.to_bits(), radius as u64, replicate as u64],
                    ),
                    max_radius: cfg.max_radius,
                };
                let evaluator = NmpEvaluator::with_neighborhoods(&net_p, hood.clone(), engine);
                let reports = specs
                    .par_iter()
                    .map(|spec| evaluator.evaluate(spec))
                    .collect::<Result<Vec<_>>>()?;
                for report in &reports {
                    push(&mut block, report, Some(radius), Some(replicate));
                }
            }
        }
        block.rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        block.temporal.sort_by(|a, b| {
            (&a.set, a.method != "nmp", a.radius, a.replicate, a.t).cmp(&(
                &b.set,
                b.method != "nmp",
                b.radius,
                b.replicate,
                b.t,
            ))
        });
        emit(block)?;
    }
    Ok(())
}

/// Runs the sweep and keeps every block in memory.
pub fn run_experiment_collect(net: &Network, cfg: &ExperimentConfig) -> Result<Block> {
    let mut all = Block::default();
    run_experiment(net, cfg, |block| {
        all.rows.extend(block.rows);
        all.temporal.extend(block.temporal);
        Ok(())
    })?;
    Ok(all)
}

fn write_header_line<W: Write>(out: &mut W, header: &str) -> Result<()> {
    writeln!(out, "{header}")?;
    Ok(())
}

/// Streams rows as CSV, flushing after every block.
pub struct RowWriter<W: Write> {
    csv: csv::Writer<W>,
    runtime: bool,
}

impl<W: Write> RowWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        Self::with_runtime(out, true)
    }

    /// With `runtime = false` the runtime column is left empty, which makes
    /// the output a pure function of the configuration.
    pub fn with_runtime(mut out: W, runtime: bool) -> Result<Self> {
        write_header_line(&mut out, ROWS_HEADER)?;
        let mut csv = csv::Writer::from_writer(out);
        csv.write_record(ROW_COLUMNS)?;
        Ok(RowWriter { csv, runtime })
    }

    pub fn write_rows(&mut self, rows: &[ResultRow]) -> Result<()> {
        for row in rows {
            self.csv.write_record([
                row.intervention.as_str().to_string(),
                row.set.to_string(),
                fmt_f(row.p),
                fmt_opt(row.radius),
                fmt_opt(row.samples),
                row.method.clone(),
                fmt_opt(row.replicate),
                fmt_f(row.q),
                row.std_err.map(fmt_f).unwrap_or_default(),
                if self.runtime {
                    format!("{:.3}", row.runtime_ms)
                } else {
                    String::new()
                },
                fmt_f(row.mean_coreness),
            ])?;
        }
        self.csv.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.csv
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}

pub fn write_temporal<W: Write>(mut out: W, rows: &[TemporalRow], header: bool) -> Result<()> {
    if header {
        write_header_line(&mut out, TEMPORAL_HEADER)?;
    }
    let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    if header {
        csv.write_record(["set", "p", "r", "method", "replicate", "t", "pi_s"])?;
    }
    for row in rows {
        csv.write_record([
            row.set.to_string(),
            fmt_f(row.p),
            fmt_opt(row.radius),
            row.method.clone(),
            fmt_opt(row.replicate),
            row.t.to_string(),
            fmt_f(row.detection),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Reads a rows CSV written by [`RowWriter`].
pub fn read_rows<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    if first.trim_end() != ROWS_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected '{ROWS_HEADER}'"),
        });
    }
    let mut csv = csv::ReaderBuilder::new().from_reader(reader);
    let headers = csv.headers()?.clone();
    if headers.iter().ne(ROW_COLUMNS) {
        return Err(Error::Parse {
            line: 2,
            message: format!("unexpected columns: {}", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut rows = Vec::new();
    for (idx, record) in csv.records().enumerate() {
        let line = idx + 3;
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let err = |what: &str, value: &str| Error::Parse {
            line,
            message: format!("bad {what} '{value}'"),
        };
        let float = |i: usize, what: &str| -> Result<f64> {
            field(i).parse::<f64>().map_err(|_| err(what, field(i)))
        };
        let opt_float = |i: usize, what: &str| -> Result<Option<f64>> {
            if field(i).is_empty() {
                Ok(None)
            } else {
                float(i, what).map(Some)
            }
        };
        let opt_usize = |i: usize, what: &str| -> Result<Option<usize>> {
            if field(i).is_empty() {
                Ok(None)
            } else {
                field(i).parse::<usize>().map(Some).map_err(|_| err(what, field(i)))
            }
        };
        let intervention = field(0)
            .parse::<InterventionKind>()
            .map_err(|_| err("intervention", field(0)))?;
        let set = parse_set(field(1), crate::netgraph::MAX_NODE_ID + 1)
            .map_err(|_| err("set", field(1)))?;
        let method = field(5);
        if !matches!(method, "nmp" | "mc" | "exact") {
            return Err(err("method", method));
        }
        let row = ResultRow {
            intervention,
            set,
            p: float(2, "p")?,
            radius: opt_usize(3, "r")?,
            samples: opt_usize(4, "M")?,
            method: method.to_string(),
            replicate: opt_usize(6, "replicate")?,
            q: float(7, "Q")?,
            std_err: opt_float(8, "std_err")?,
            runtime_ms: opt_float(9, "runtime_ms")?.unwrap_or(0.0),
            mean_coreness: float(10, "mean_coreness")?,
        };
        if !(0.0..=1.0).contains(&row.p) {
            return Err(err("p", field(2)));
        }
        if (method == "nmp") != (row.radius.is_some() && row.replicate.is_some()) {
            return Err(Error::Parse {
                line,
                message: "nmp rows need r and replicate; oracle rows must leave them empty".into(),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub intervention: InterventionKind,
    pub k: usize,
    pub p: f64,
    pub radius: usize,
    pub n_sets: usize,
    pub n_replicates: usize,
    /// Mean of `Q_nmp(S) - Q*(S)` over sets and replicates.
    pub mean_eps: f64,
    /// 2.5 and 97.5 percentiles over replicates of the per-replicate mean.
    pub eps_lo: f64,
    pub eps_hi: f64,
    /// Oracle standard error of the mean over sets.
    pub mc_se_mean: f64,
    /// Mean over replicates of Kendall tau-b; `None` when undefined.
    pub tau: Option<f64>,
    pub tau_lo: Option<f64>,
    pub tau_hi: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub warnings: Vec<String>,
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

type GroupKey = (InterventionKind, usize, u64);

/// Per `(intervention, k, p, r)`: mean error, replicate band and rank agreement.
pub fn summarize(rows: &[ResultRow]) -> Summary {
    let mut summary = Summary::default();
    let mut oracle: BTreeMap<(GroupKey, &NodeSet), &ResultRow> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.is_oracle()) {
        let key = ((row.intervention, row.set.len(), row.p.to_bits()), &row.set);
        if oracle.insert(key, row).is_some() {
            summary
                .warnings
                .push(format!("duplicate oracle row for set {} at p={}", row.set, row.p));
        }
    }
    // (group, r) -> replicate -> set -> Q
    let mut nmp: BTreeMap<(GroupKey, usize), BTreeMap<usize, BTreeMap<&NodeSet, f64>>> =
        BTreeMap::new();
    for row in rows.iter().filter(|r| !r.is_oracle()) {
        let group = (row.intervention, row.set.len(), row.p.to_bits());
        if !oracle.contains_key(&(group, &row.set)) {
            summary.warnings.push(format!(
                "no oracle row for set {} at p={}; skipped",
                row.set, row.p
            ));
            continue;
        }
        nmp.entry((group, row.radius.unwrap_or(0)))
            .or_default()
            .entry(row.replicate.unwrap_or(0))
            .or_default()
            .insert(&row.set, row.q);
    }

    for ((group, radius), replicates) in nmp {
        let (intervention, k, p_bits) = group;
        let mut eps_per_rep = Vec::new();
        let mut taus = Vec::new();
        let mut all_eps = Vec::new();
        let mut sets_seen: BTreeMap<&NodeSet, ()> = BTreeMap::new();
        for by_set in replicates.values() {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for (&set, &q) in by_set {
                let star = oracle[&(group, set)].q;
                a.push(q);
                b.push(star);
                all_eps.push(q - star);
                sets_seen.insert(set, ());
            }
            eps_per_rep.push(a.iter().zip(&b).map(|(x, y)| x - y).sum::<f64>() / a.len() as f64);
            if let Ok(t) = kendall_tau_b(&a, &b) {
                taus.push(t);
            }
        }
        let se_sq: f64 = sets_seen
            .keys()
            .map(|set| oracle[&(group, *set)].std_err.unwrap_or(0.0).powi(2))
            .sum();
        let n_sets = sets_seen.len();
        let eps_sorted = sorted(eps_per_rep.clone());
        let tau_sorted = sorted(taus.clone());
        let defined = !taus.is_empty() && taus.len() == eps_per_rep.len();
        if !taus.is_empty() && !defined {
            summary.warnings.push(format!(
                "tau undefined for some replicates at p={}, r={radius}",
                f64::from_bits(p_bits)
            ));
        }
        summary.rows.push(SummaryRow {
            intervention,
            k,
            p: f64::from_bits(p_bits),
            radius,
            n_sets,
            n_replicates: eps_per_rep.len(),
            mean_eps: all_eps.iter().sum::<f64>() / all_eps.len() as f64,
            eps_lo: percentile(&eps_sorted, 0.025),
            eps_hi: percentile(&eps_sorted, 0.975),
            mc_se_mean: se_sq.sqrt() / n_sets as f64,
            tau: defined.then(|| taus.iter().sum::<f64>() / taus.len() as f64),
            tau_lo: defined.then(|| percentile(&tau_sorted, 0.025)),
            tau_hi: defined.then(|| percentile(&tau_sorted, 0.975)),
        });
    }
    summary
        .rows
        .sort_by(|a, b| (a.intervention, a.k, a.p.to_bits(), a.radius).cmp(&(b.intervention, b.k, b.p.to_bits(), b.radius)));
    summary
}

pub fn write_summary<W: Write>(mut out: W, summary: &Summary) -> Result<()> {
    write_header_line(&mut out, SUMMARY_HEADER)?;
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record([
        "intervention", "k", "p", "r", "n_sets", "n_replicates", "mean_eps", "eps_lo", "eps_hi",
        "mc_se_mean", "tau", "tau_lo", "tau_hi", "p_c",
    ])?;
    let na = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), fmt_f);
    for row in &summary.rows {
        csv.write_record([
            row.intervention.as_str().to_string(),
            row.k.to_string(),
            fmt_f(row.p),
            row.radius.to_string(),
            row.n_sets.to_string(),
            row.n_replicates.to_string(),
            fmt_f(row.mean_eps),
            fmt_f(row.eps_lo),
            fmt_f(row.eps_hi),
            fmt_f(row.mc_se_mean),
            na(row.tau),
            na(row.tau_lo),
            na(row.tau_hi),
            fmt_f(P_CRITICAL),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorenessRow {
    pub intervention: InterventionKind,
    pub set: NodeSet,
    pub p: f64,
    pub radius: usize,
    pub mean_coreness: f64,
    /// Mean over replicates.
    pub q_nmp: f64,
    pub q_oracle: f64,
    pub eps: f64,
}

/// One row per `(p, r, set)` with the set's mean coreness and its error.
pub fn coreness_scatter(rows: &[ResultRow]) -> Vec<CorenessRow> {
    let mut oracle: BTreeMap<(InterventionKind, u64, &NodeSet), f64> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.is_oracle()) {
        oracle.insert((row.intervention, row.p.to_bits(), &row.set), row.q);
    }
    let mut acc: BTreeMap<(InterventionKind, u64, usize, &NodeSet), (f64, usize, f64)> =
        BTreeMap::new();
    for row in rows.iter().filter(|r| !r.is_oracle()) {
        let entry = acc
            .entry((row.intervention, row.p.to_bits(), row.radius.unwrap_or(0), &row.set))
            .or_insert((0.0, 0, row.mean_coreness));
        entry.0 += row.q;
        entry.1 += 1;
    }
    acc.into_iter()
        .filter_map(|((kind, p_bits, radius, set), (sum, count, core))| {
            let q_oracle = *oracle.get(&(kind, p_bits, set))?;
            let q_nmp = sum / count as f64;
            Some(CorenessRow {
                intervention: kind,
                set: set.clone(),
                p: f64::from_bits(p_bits),
                radius,
                mean_coreness: core,
                q_nmp,
                q_oracle,
                eps: q_nmp - q_oracle,
            })
        })
        .collect()
}

pub fn write_coreness<W: Write>(mut out: W, rows: &[CorenessRow]) -> Result<()> {
    write_header_line(&mut out, CORENESS_HEADER)?;
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record([
        "intervention", "set", "p", "r", "mean_coreness", "q_nmp", "q_oracle", "eps",
    ])?;
    for row in rows {
        csv.write_record([
            row.intervention.as_str().to_string(),
            row.set.to_string(),
            fmt_f(row.p),
            row.radius.to_string(),
            fmt_f(row.mean_coreness),
            fmt_f(row.q_nmp),
            fmt_f(row.q_oracle),
            fmt_f(row.eps),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Kendall tau-b between mean coreness and error over scatter rows.
pub fn coreness_error_tau(rows: &[CorenessRow]) -> Result<f64> {
    let x: Vec<f64> = rows.iter().map(|r| r.mean_coreness).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    kendall_tau_b(&x, &y)
}
