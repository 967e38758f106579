//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Pass substrings as arguments to run a
//! subset, e.g. `cargo test --test acceptance -- sampler`.

mod common;

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use cascade_nmp::engine::MessageState;
use cascade_nmp::experiment::{
    coreness_error_tau, coreness_scatter, default_horizon, run_experiment_collect, summarize,
    ExperimentConfig, OracleChoice, ResultRow, RowWriter, SetSelection, SummaryRow,
};
use cascade_nmp::interventions::{
    detection_series, evaluate_oracle, InterventionKind, InterventionSpec, NmpEvaluator,
    OracleMethod,
};
use cascade_nmp::neighborhoods::Neighborhoods;
use cascade_nmp::oracle::{exact_enumerate, OracleQuery, Seeding};
use cascade_nmp::percolation::{LocalGraph, SampleSet, EXACT_EDGE_CAP};
use cascade_nmp::rng::stream;
use cascade_nmp::{
    classical_mp, karate_club, run_nmp, steady_state, EngineConfig, Network, NodeSet, NmpModel,
    SamplerKind, SeedVector,
};
use common::{random_graph, random_tree, set, with_random_p};
use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn exact_cfg(radius: usize, horizon: usize) -> EngineConfig {
    EngineConfig {
        radius,
        horizon,
        sampler: SamplerKind::Exact,
        ..EngineConfig::default()
    }
}

/// Single-seed marginals on a tree: product of edge probabilities along the
/// unique path.
fn tree_marginals(net: &Network, seed: usize) -> Vec<f64> {
    let mut pi = vec![0.0; net.node_count()];
    pi[seed] = 1.0;
    let mut stack = vec![seed];
    let mut seen = vec![false; net.node_count()];
    seen[seed] = true;
    while let Some(u) = stack.pop() {
        for &(v, e) in net.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                pi[v] = pi[u] * net.prob(e);
                stack.push(v);
            }
        }
    }
    pi
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn tree_exactness() -> Verdict {
    let start = Instant::now();
    let sizes = [4, 7, 10, 13, 16, 19, 21, 30, 40, 50];
    let mut worst: f64 = 0.0;
    let mut enumerated = 0;
    for (idx, &n) in sizes.iter().enumerate() {
        let seed_tag = 1000 + idx as u64;
        let net = with_random_p(n, &random_tree(n, seed_tag), 0.05, 0.95, seed_tag);
        let source = stream(seed_tag, 7).random_range(0..n);
        let seeds = SeedVector::indicator(n, &set(&[source], n));
        let mut truth = tree_marginals(&net, source);
        if net.edge_count() <= EXACT_EDGE_CAP {
            let query = OracleQuery::new(Seeding::Set(set(&[source], n)), n);
            let exact = exact_enumerate(&net, &query).unwrap().marginals;
            worst = worst.max(max_diff(&exact, &truth));
            truth = exact;
            enumerated += 1;
        }
        let (hist, _) = classical_mp(&net, &seeds, n).unwrap();
        worst = worst.max(max_diff(&hist.last(), &truth));
        for r in 0..=2 {
            let (hist, _) = run_nmp(&net, &seeds, &exact_cfg(r, n), None).unwrap();
            worst = worst.max(max_diff(&steady_state(&hist, 1e-12).values, &truth));
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst < 1e-9 && elapsed < Duration::from_secs(10),
        format!(
            "max |diff| {worst:.1e} over {} trees ({enumerated} enumerated, rest by path products), {:.2?}",
            sizes.len(),
            elapsed
        ),
    )
}

fn tiny_loop_exactness() -> Verdict {
    let start = Instant::now();
    let graphs: [(&str, usize, Vec<(usize, usize)>, usize); 4] = [
        ("triangle", 3, vec![(0, 1), (1, 2), (0, 2)], 1),
        ("4-cycle", 4, vec![(0, 1), (1, 2), (2, 3), (0, 3)], 2),
        ("bowtie", 5, vec![(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)], 1),
        ("K4", 4, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)], 2),
    ];
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for (_, n, edges, r_min) in &graphs {
        for p in [0.2, 0.5, 0.8] {
            let net = Network::uniform(*n, edges, p).unwrap();
            let mut seedings: Vec<(SeedVector, Seeding)> = (0..*n)
                .map(|s| (SeedVector::indicator(*n, &set(&[s], *n)), Seeding::Set(set(&[s], *n))))
                .collect();
            let uniform = SeedVector::uniform_excluding(*n, &NodeSet::empty());
            seedings.push((uniform.clone(), Seeding::Independent(uniform)));
            for (seeds, seeding) in seedings {
                let exact = exact_enumerate(&net, &OracleQuery::new(seeding, 4)).unwrap();
                for r in [*r_min, 4] {
                    let (hist, _) = run_nmp(&net, &seeds, &exact_cfg(r, 12), None).unwrap();
                    worst = worst.max(max_diff(&hist.last(), &exact.marginals));
                    for t in 0..=4 {
                        let col: Vec<f64> = exact.temporal.iter().map(|h| h[t]).collect();
                        worst = worst.max(max_diff(&hist.at(t), &col));
                    }
                    cases += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst < 1e-9 && elapsed < Duration::from_secs(10),
        format!("max |diff| {worst:.1e} over {cases} cases (static and t <= 4), {elapsed:.2?}"),
    )
}

fn messages_close(a: &MessageState, b: &MessageState) -> f64 {
    let mut worst: f64 = 0.0;
    for &(k, i) in &b.messages {
        let x = a.get(k, i).expect("same message set");
        let y = b.get(k, i).unwrap();
        worst = worst.max(max_diff(x, y));
    }
    assert_eq!(a.messages.len(), b.messages.len());
    worst
}

fn r0_reduction() -> Verdict {
    let mut worst: f64 = 0.0;
    for g in 0..20u64 {
        let mut rng = stream(2000 + g, 0);
        let n = rng.random_range(5..=30);
        let extra = rng.random_range(0..=n);
        let net = with_random_p(n, &random_graph(n, extra, 2000 + g), 0.05, 0.95, 2000 + g);
        let seeds = if g % 2 == 0 {
            SeedVector::indicator(n, &set(&[rng.random_range(0..n)], n))
        } else {
            SeedVector::new((0..n).map(|_| rng.random_range(0.0..0.3)).collect()).unwrap()
        };
        let horizon = 15;
        let (h_nmp, m_nmp) = run_nmp(&net, &seeds, &exact_cfg(0, horizon), None).unwrap();
        let (h_cl, m_cl) = classical_mp(&net, &seeds, horizon).unwrap();
        worst = worst.max(messages_close(&m_nmp, &m_cl));
        for i in 0..n {
            worst = worst.max(max_diff(&h_nmp.pi[i], &h_cl.pi[i]));
        }
    }
    verdict(
        worst < 1e-12,
        format!("max |diff| {worst:.1e} over all messages and sweeps of 20 graphs"),
    )
}

/// Estimates of `r_ij` for every non-focal node of a sample set.
fn estimates(set: &SampleSet, nodes: &[usize]) -> Vec<f64> {
    nodes.iter().map(|&j| set.estimate_reachability(j)).collect()
}

fn local_graphs(net: &Network, hoods: &Neighborhoods) -> Vec<(LocalGraph, Vec<usize>)> {
    hoods
        .iter()
        .map(|h| {
            let others: Vec<usize> = h.node_set.iter().filter(|&k| k != h.focal).collect();
            (LocalGraph::new(net, &h.edge_set, h.focal), others)
        })
        .collect()
}

fn sampler_unbiasedness() -> Verdict {
    let start = Instant::now();
    let net = karate_club(0.15);
    let hoods = Neighborhoods::build(&net, 1, 4).unwrap();
    let mut detail = Vec::new();
    let mut pass = true;
    for kind in [SamplerKind::Bfs, SamplerKind::NewmanZiff] {
        let (mut ok, mut total, mut skipped) = (0usize, 0usize, 0usize);
        for (focal, (local, others)) in local_graphs(&net, &hoods).into_iter().enumerate() {
            if local.edge_count() > EXACT_EDGE_CAP {
                skipped += 1;
                continue;
            }
            let exact = estimates(&local.enumerate_exact().unwrap(), &others);
            let reps: Vec<Vec<f64>> = (0..50u64)
                .map(|rep| {
                    let mut rng = stream(3000 + rep, focal as u64);
                    estimates(&local.sample(kind, 200, &mut rng).unwrap(), &others)
                })
                .collect();
            for (j, &truth) in exact.iter().enumerate() {
                let xs: Vec<f64> = reps.iter().map(|r| r[j]).collect();
                let mean = xs.iter().sum::<f64>() / 50.0;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 49.0;
                let se = (var / 50.0).sqrt();
                // Deterministic estimates (e.g. a single-edge neighborhood
                // under Newman-Ziff) only differ from the truth by rounding.
                let within = if se == 0.0 {
                    (mean - truth).abs() <= 1e-12
                } else {
                    (mean - truth).abs() <= 4.0 * se
                };
                ok += within as usize;
                total += 1;
            }
        }
        let frac = ok as f64 / total as f64;
        pass &= frac >= 0.99;
        detail.push(format!("{kind}: {ok}/{total} pairs within 4 SE ({skipped} hoods > 20 edges skipped)"));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(300);
    verdict(pass, format!("{}; {elapsed:.2?}", detail.join("; ")))
}

fn time_per_run(local: &[(LocalGraph, Vec<usize>)], kind: SamplerKind, m: usize) -> f64 {
    let mut best = f64::INFINITY;
    for round in 0..5u64 {
        let start = Instant::now();
        for (idx, (g, others)) in local.iter().enumerate() {
            let set = g.sample(kind, m, &mut stream(round, idx as u64)).unwrap();
            std::hint::black_box(estimates(&set, others));
        }
        best = best.min(start.elapsed().as_secs_f64());
    }
    best
}

fn sampler_variance_ordering() -> Verdict {
    let net = karate_club(0.15);
    let hoods = Neighborhoods::build(&net, 1, 4).unwrap();
    let local = local_graphs(&net, &hoods);
    let m_bfs = 200;
    // Match wall-clock: give Newman-Ziff as many sweeps as fit in BFS's time.
    let t_bfs = time_per_run(&local, SamplerKind::Bfs, m_bfs);
    let t_nz = time_per_run(&local, SamplerKind::NewmanZiff, m_bfs);
    let m_nz = ((m_bfs as f64 * t_bfs / t_nz).round() as usize).max(1);
    let per_sweep = t_nz / t_bfs;

    let stds = |kind: SamplerKind, m: usize| -> Vec<f64> {
        let mut out = Vec::new();
        for (focal, (g, others)) in local.iter().enumerate() {
            let reps: Vec<Vec<f64>> = (0..50u64)
                .map(|rep| estimates(&g.sample(kind, m, &mut stream(4000 + rep, focal as u64)).unwrap(), others))
                .collect();
            for j in 0..others.len() {
                let xs: Vec<f64> = reps.iter().map(|r| r[j]).collect();
                let mean = xs.iter().sum::<f64>() / 50.0;
                out.push((xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 49.0).sqrt());
            }
        }
        out
    };
    let s_bfs = stds(SamplerKind::Bfs, m_bfs);
    let s_nz = stds(SamplerKind::NewmanZiff, m_nz);
    let d: Vec<f64> = s_nz.iter().zip(&s_bfs).map(|(a, b)| a - b).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let t = mean / (sd / n.sqrt());
    let p_value = 1.0 - StudentsT::new(0.0, 1.0, n - 1.0).unwrap().cdf(t);
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    verdict(
        p_value < 0.01,
        format!(
            "one NZ sweep costs {per_sweep:.2} BFS samples; BFS M={m_bfs} mean std {:.4}, NZ M={m_nz} mean std {:.4}; paired t={t:.2}, one-sided p={p_value:.1e} over {} pairs",
            avg(&s_bfs),
            avg(&s_nz),
            d.len()
        ),
    )
}

/// Karate influence sweep shared by the error-onset and rank criteria.
fn karate_sweep() -> &'static (Vec<ResultRow>, Vec<SummaryRow>, Duration) {
    static SWEEP: OnceLock<(Vec<ResultRow>, Vec<SummaryRow>, Duration)> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let start = Instant::now();
        let cfg = ExperimentConfig {
            intervention: InterventionKind::Influence,
            sets: SetSelection::Size(1),
            p_values: vec![0.05, 0.10, 0.15, 0.25, 0.30, 0.35],
            radii: vec![0, 1, 2],
            samples: 1500,
            replicates: 20,
            oracle: OracleChoice::MonteCarlo { sims: 100_000 },
            master_seed: 20,
            ..ExperimentConfig::default()
        };
        let rows = run_experiment_collect(&karate_club(1.0), &cfg).unwrap().rows;
        let summary = summarize(&rows);
        assert!(summary.warnings.is_empty(), "{:?}", summary.warnings);
        archive("karate_influence_k1", &rows, &summary);
        (rows, summary.rows, start.elapsed())
    })
}

fn archive(name: &str, rows: &[ResultRow], summary: &cascade_nmp::experiment::Summary) {
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).unwrap();
    let mut w = RowWriter::new(std::fs::File::create(dir.join(format!("{name}_rows.csv"))).unwrap()).unwrap();
    w.write_rows(rows).unwrap();
    let out = std::fs::File::create(dir.join(format!("{name}_summary.csv"))).unwrap();
    cascade_nmp::experiment::write_summary(out, summary).unwrap();
}

/// Informational only: floating-point libraries may differ across platforms.
fn matches_archive(rows: &[SummaryRow]) -> bool {
    let summary = cascade_nmp::experiment::Summary {
        rows: rows.to_vec(),
        warnings: Vec::new(),
    };
    let mut out = Vec::new();
    cascade_nmp::experiment::write_summary(&mut out, &summary).unwrap();
    out == include_bytes!("../data/regression/karate_influence_k1_summary.csv")
}

fn summary_at(rows: &[SummaryRow], p: f64, r: usize) -> &SummaryRow {
    rows.iter()
        .find(|s| (s.p - p).abs() < 1e-12 && s.radius == r)
        .expect("swept combination")
}

fn error_onset() -> Verdict {
    let (_, summary, elapsed) = karate_sweep();
    let mut parts = Vec::new();
    let mut pass_i = true;
    for r in 0..=2 {
        let s = summary_at(summary, 0.10, r);
        let ok = s.mean_eps.abs() <= 2.0 * s.mc_se_mean;
        pass_i &= ok;
        parts.push(format!("r={r} eps={:.4} (2SE={:.4})", s.mean_eps, 2.0 * s.mc_se_mean));
    }
    let e25: Vec<f64> = (0..=2).map(|r| summary_at(summary, 0.25, r).mean_eps.abs()).collect();
    let pass_ii = e25[0] > e25[1] && e25[1] > e25[2];
    let (e30, e10) = (summary_at(summary, 0.30, 0).mean_eps, summary_at(summary, 0.10, 0).mean_eps);
    let pass_iii = e30 > e10;
    let pass_t = *elapsed < Duration::from_secs(1800);
    let archived = matches_archive(summary);
    verdict(
        pass_i && pass_ii && pass_iii && pass_t,
        format!(
            "(i) p=0.10 {} -> {}; (ii) |eps| at p=0.25 by r {:.3?} -> {}; (iii) r=0 eps(0.30)={e30:.3} > eps(0.10)={e10:.4} -> {}; sweep {elapsed:.1?}; summary identical to archived regression CSV: {archived}",
            parts.join(", "),
            ok_str(pass_i),
            e25,
            ok_str(pass_ii),
            ok_str(pass_iii)
        ),
    )
}

fn ok_str(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILED"
    }
}

fn rank_agreement() -> Verdict {
    let (_, summary, _) = karate_sweep();
    let mut parts = Vec::new();
    let mut pass = true;
    for p in [0.05, 0.10, 0.15] {
        let tau = summary_at(summary, p, 1).tau;
        pass &= tau.is_some_and(|t| t >= 0.8);
        parts.push(format!("tau(p={p}, r=1)={:.3}", tau.unwrap_or(f64::NAN)));
    }
    let hi = summary_at(summary, 0.35, 0).tau.unwrap_or(f64::NAN);
    let lo = summary_at(summary, 0.15, 0).tau.unwrap_or(f64::NAN);
    pass &= hi < lo;
    parts.push(format!("tau(0.35, r=0)={hi:.3} < tau(0.15, r=0)={lo:.3}"));
    verdict(pass, parts.join(", "))
}

fn coreness_bias() -> Verdict {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        intervention: InterventionKind::Influence,
        sets: SetSelection::Size(2),
        p_values: vec![0.30],
        radii: vec![1],
        samples: 1500,
        replicates: 5,
        oracle: OracleChoice::MonteCarlo { sims: 20_000 },
        master_seed: 30,
        ..ExperimentConfig::default()
    };
    let rows = run_experiment_collect(&karate_club(1.0), &cfg).unwrap().rows;
    let scatter = coreness_scatter(&rows);
    let tau = coreness_error_tau(&scatter).unwrap();
    verdict(
        tau < 0.0,
        format!(
            "tau(mean coreness, eps) = {tau:.3} over {} sets (5 replicates, 2e4 MC sims), {:.1?}",
            scatter.len(),
            start.elapsed()
        ),
    )
}

fn sentinel_machinery() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;

    // Explicit-seed examples, message passing with exact sampling.
    let mut worst: f64 = 0.0;
    let examples: [(usize, Vec<(usize, usize)>, Vec<f64>, usize); 2] = [
        (3, vec![(0, 1), (1, 2)], vec![1.0, 0.0, 0.0], 2),
        (3, vec![(0, 1), (1, 2), (0, 2)], vec![1.0, 0.0, 0.0], 2),
    ];
    for (n, edges, seeds, sentinel) in &examples {
        for p in [0.0, 0.2, 0.5, 0.8, 1.0] {
            let net = Network::uniform(*n, edges, p).unwrap();
            let spec = InterventionSpec::new(InterventionKind::Sentinel, set(&[*sentinel], *n), &net)
                .unwrap()
                .with_seeding(SeedVector::new(seeds.clone()).unwrap());
            let nmp = NmpEvaluator::new(&net, exact_cfg(2, 12)).unwrap().evaluate(&spec).unwrap();
            let exact = evaluate_oracle(&net, &spec, OracleMethod::Exact, 12).unwrap();
            worst = worst.max((nmp.q - exact.q).abs());
        }
    }
    pass &= worst < 1e-9;
    parts.push(format!("path/triangle |Q_nmp - Q_exact| <= {worst:.1e}"));

    // Karate: cumulative detection against Monte Carlo.
    let net = karate_club(0.15);
    let hoods = Neighborhoods::build(&net, 1, 4).unwrap();
    let horizon = default_horizon(&net, std::slice::from_ref(&hoods));
    let cfg = EngineConfig {
        radius: 1,
        samples: 1500,
        horizon,
        master_seed: 15,
        ..EngineConfig::default()
    };
    let mut gap: f64 = 0.0;
    let mut shape_ok = true;
    for nodes in [vec![0, 33], vec![2], vec![16], vec![5, 24]] {
        let s = set(&nodes, 34);
        let model = NmpModel::prepare(&net, &hoods, &cfg, Some(&s)).unwrap();
        let (hist, _) = model
            .run(&SeedVector::uniform_excluding(34, &s), horizon)
            .unwrap();
        let series = detection_series(&hist, &s);
        shape_ok &= series.windows(2).all(|w| w[0] <= w[1] + 1e-15) && series.iter().all(|&v| v <= 1.0);
        let spec = InterventionSpec::new(InterventionKind::Sentinel, s, &net).unwrap();
        let mc = evaluate_oracle(&net, &spec, OracleMethod::MonteCarlo { sims: 100_000, seed: 16 }, horizon)
            .unwrap()
            .detection
            .unwrap();
        for t in 0..=3 {
            gap = gap.max((series[t] - mc[t]).abs());
        }
    }
    pass &= shape_ok && gap <= 0.05;
    parts.push(format!(
        "karate p=0.15 r=1: pi_S(t) monotone and bounded: {}, max |NMP - MC| for t <= 3 = {gap:.4}",
        ok_str(shape_ok)
    ));
    verdict(pass, parts.join("; "))
}

fn determinism() -> Verdict {
    let net = karate_club(1.0);
    let configs = [
        ExperimentConfig {
            p_values: vec![0.2, 0.3],
            radii: vec![0, 1],
            samples: 300,
            replicates: 2,
            oracle: OracleChoice::MonteCarlo { sims: 3000 },
            master_seed: 99,
            ..ExperimentConfig::default()
        },
        ExperimentConfig {
            intervention: InterventionKind::Vaccination,
            sets: SetSelection::Explicit(vec![set(&[0], 34), set(&[33, 1], 34), set(&[5], 34)]),
            p_values: vec![0.25],
            radii: vec![1],
            samples: 300,
            sampler: SamplerKind::NewmanZiff,
            replicates: 2,
            oracle: OracleChoice::MonteCarlo { sims: 3000 },
            master_seed: 7,
            ..ExperimentConfig::default()
        },
        ExperimentConfig {
            intervention: InterventionKind::Sentinel,
            sets: SetSelection::Explicit(vec![set(&[0, 33], 34), set(&[2], 34)]),
            p_values: vec![0.15],
            radii: vec![1, 2],
            samples: 300,
            replicates: 2,
            oracle: OracleChoice::MonteCarlo { sims: 3000 },
            master_seed: 8,
            ..ExperimentConfig::default()
        },
    ];
    let render = |cfg: &ExperimentConfig, threads: usize| -> Vec<u8> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let rows = run_experiment_collect(&net, cfg).unwrap().rows;
            let mut w = RowWriter::with_runtime(Vec::new(), false).unwrap();
            w.write_rows(&rows).unwrap();
            w.into_inner().unwrap()
        })
    };
    let mut same = true;
    let mut bytes = 0;
    for cfg in &configs {
        let a = render(cfg, 1);
        let b = render(cfg, 4);
        let c = render(cfg, 1);
        same &= a == b && a == c;
        bytes += a.len();
    }
    verdict(
        same,
        format!("{} configurations, {bytes} bytes each run, 1 vs 4 vs 1 threads identical: {same}", configs.len()),
    )
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("tree_exactness", tree_exactness),
        ("tiny_loop_exactness", tiny_loop_exactness),
        ("r0_reduction", r0_reduction),
        ("sampler_unbiasedness", sampler_unbiasedness),
        ("sampler_variance_ordering", sampler_variance_ordering),
        ("error_onset", error_onset),
        ("rank_agreement", rank_agreement),
        ("coreness_bias_sign", coreness_bias),
        ("sentinel_machinery", sentinel_machinery),
        ("determinism", determinism),
    ];
    let mut results = BTreeMap::new();
    for (name, check) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let v = check();
        println!("acceptance {} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.insert(name, v.pass);
    }
    let failed: Vec<_> = results.iter().filter(|(_, &ok)| !ok).map(|(n, _)| *n).collect();
    println!(
        "acceptance summary: {} passed, {} failed{}",
        results.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" ({})", failed.join(", ")) }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
