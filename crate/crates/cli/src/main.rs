use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use cascade_nmp::engine::{classical_mp, run_nmp, EngineConfig, SeedVector};
use cascade_nmp::experiment::{
    coreness_scatter, parse_p_values, parse_sets, parse_usize_list, read_rows,
    run_experiment, summarize, write_coreness, write_summary, write_temporal, Block,
    ExperimentConfig, OracleChoice, RowWriter, SetSelection,
};
use cascade_nmp::interventions::InterventionKind;
use cascade_nmp::neighborhoods::{Neighborhoods, DEFAULT_MAX_RADIUS};
use cascade_nmp::netgraph::{karate_club, Network, NodeSet};
use cascade_nmp::oracle::{exact_enumerate, mc_estimate, OracleQuery, Seeding};
use cascade_nmp::percolation::{LocalGraph, SamplerKind};
use cascade_nmp::{rng, Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cascade-nmp", version, about = "Neighborhood message passing for the independent cascade model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep intervention sets over p and r, comparing message passing with an oracle.
    Run(RunArgs),
    /// Summary or coreness table from a rows CSV.
    Summarize(SummarizeArgs),
    /// Neighborhood sizes per node.
    Neighborhoods(NeighborhoodArgs),
    /// Time-resolved marginals as JSON.
    Marginals(MarginalArgs),
    /// Oracle marginals and detection distribution as CSV.
    Oracle(OracleArgs),
    /// Percolation sample statistics for one neighborhood as JSON.
    Samples(SampleArgs),
}

#[derive(Args)]
struct GraphArgs {
    /// Edge list "u v [p]" per line; the bundled karate club when omitted.
    #[arg(long)]
    graph: Option<PathBuf>,
}

impl GraphArgs {
    fn load(&self, p: f64) -> Result<Network> {
        match &self.graph {
            None => Ok(karate_club(1.0).with_uniform_prob(p)?),
            Some(path) => Network::load_edge_list(File::open(path)?, p)?.with_uniform_prob(p),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Rows,
    Summary,
    Coreness,
    Temporal,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Mc,
    Exact,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, default_value = "influence")]
    intervention: String,
    /// Evaluate every set of this size.
    #[arg(long, conflicts_with = "sets")]
    k: Option<usize>,
    /// Explicit sets, e.g. "0;5,2;3".
    #[arg(long)]
    sets: Option<String>,
    /// Comma list or start:stop:step.
    #[arg(long, default_value = "0.1")]
    p: String,
    #[arg(long, default_value = "0,1,2")]
    r: String,
    #[arg(long, default_value_t = 1500)]
    samples: usize,
    #[arg(long, default_value_t = 100_000)]
    mc_sims: u64,
    #[arg(long, value_enum, default_value = "mc")]
    oracle: OracleKind,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, default_value = "bfs")]
    sampler: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_RADIUS)]
    max_radius: usize,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "rows")]
    emit: Emit,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    rows: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-set coreness table instead of the summary.
    #[arg(long)]
    coreness: bool,
}

#[derive(Args)]
struct NeighborhoodArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, default_value_t = 1)]
    r: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_RADIUS)]
    max_radius: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MarginalArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    p: f64,
    /// Seed nodes, e.g. "0;5".
    #[arg(long)]
    seeds: String,
    #[arg(long, default_value_t = 1)]
    r: usize,
    #[arg(long, default_value_t = 1500)]
    samples: usize,
    #[arg(long, default_value = "bfs")]
    sampler: String,
    #[arg(long, default_value_t = 20)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use pairwise message passing instead.
    #[arg(long)]
    classical: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    seeds: String,
    #[arg(long)]
    vaccinated: Option<String>,
    #[arg(long)]
    sentinels: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    mc_sims: u64,
    #[arg(long, default_value_t = 10)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    node: usize,
    #[arg(long, default_value_t = 1)]
    r: usize,
    #[arg(long, default_value_t = 1500)]
    samples: usize,
    #[arg(long, default_value = "bfs")]
    sampler: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn node_set(text: &str, net: &Network) -> Result<NodeSet> {
    let mut sets = parse_sets(text, net.node_count())?;
    if sets.len() != 1 {
        return Err(Error::Config(format!("expected one set, got '{text}'")));
    }
    Ok(sets.remove(0))
}

fn run(args: RunArgs) -> Result<()> {
    let intervention: InterventionKind = args.intervention.parse()?;
    let p_values = parse_p_values(&args.p)?;
    let net = args.graph.load(1.0)?;
    let sets = match (&args.sets, args.k) {
        (Some(text), _) => SetSelection::Explicit(parse_sets(text, net.node_count())?),
        (None, k) => SetSelection::Size(k.unwrap_or(1)),
    };
    let cfg = ExperimentConfig {
        intervention,
        sets,
        p_values,
        radii: parse_usize_list(&args.r)?,
        samples: args.samples,
        sampler: args.sampler.parse()?,
        oracle: match args.oracle {
            OracleKind::Mc => OracleChoice::MonteCarlo { sims: args.mc_sims },
            OracleKind::Exact => OracleChoice::Exact,
        },
        replicates: args.replicates,
        horizon: args.horizon,
        master_seed: args.seed,
        max_radius: args.max_radius,
        tol: 1e-6,
    };
    cfg.validate(&net)?;
    if matches!(args.emit, Emit::Temporal) && intervention != InterventionKind::Sentinel {
        return Err(Error::Config(
            "temporal output is only produced by sentinel experiments".into(),
        ));
    }
    let mut out = output(&args.out)?;
    match args.emit {
        Emit::Rows => {
            let mut writer = RowWriter::new(&mut out)?;
            run_experiment(&net, &cfg, |block| writer.write_rows(&block.rows))?;
        }
        Emit::Temporal => {
            let mut first = true;
            run_experiment(&net, &cfg, |block| {
                write_temporal(&mut out, &block.temporal, first)?;
                first = false;
                out.flush()?;
                Ok(())
            })?;
        }
        Emit::Summary | Emit::Coreness => {
            let mut all = Block::default();
            run_experiment(&net, &cfg, |block| {
                all.rows.extend(block.rows);
                Ok(())
            })?;
            if matches!(args.emit, Emit::Summary) {
                let summary = summarize(&all.rows);
                warn_all(&summary.warnings);
                write_summary(&mut out, &summary)?;
            } else {
                write_coreness(&mut out, &coreness_scatter(&all.rows))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn summarize_cmd(args: SummarizeArgs) -> Result<()> {
    let rows = read_rows(File::open(&args.rows)?)?;
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 2,
            message: "no rows".into(),
        });
    }
    let mut out = output(&args.out)?;
    if args.coreness {
        write_coreness(&mut out, &coreness_scatter(&rows))?;
    } else {
        let summary = summarize(&rows);
        warn_all(&summary.warnings);
        write_summary(&mut out, &summary)?;
    }
    out.flush()?;
    Ok(())
}

fn neighborhoods_cmd(args: NeighborhoodArgs) -> Result<()> {
    let net = args.graph.load(1.0)?;
    let hoods = Neighborhoods::build(&net, args.r, args.max_radius)?;
    let mut out = output(&args.out)?;
    hoods.write_sizes_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn marginals_cmd(args: MarginalArgs) -> Result<()> {
    let net = args.graph.load(args.p)?;
    let seeds = SeedVector::indicator(net.node_count(), &node_set(&args.seeds, &net)?);
    let hist = if args.classical {
        classical_mp(&net, &seeds, args.horizon)?.0
    } else {
        let cfg = EngineConfig {
            radius: args.r,
            samples: args.samples,
            horizon: args.horizon,
            sampler: args.sampler.parse()?,
            master_seed: args.seed,
            ..EngineConfig::default()
        };
        run_nmp(&net, &seeds, &cfg, None)?.0
    };
    let mut out = output(&args.out)?;
    writeln!(out, "{}", hist.to_json()?)?;
    out.flush()?;
    Ok(())
}

fn oracle_cmd(args: OracleArgs) -> Result<()> {
    let net = args.graph.load(args.p)?;
    let mut query = OracleQuery::new(Seeding::Set(node_set(&args.seeds, &net)?), args.horizon);
    if let Some(v) = &args.vaccinated {
        query = query.vaccinated(node_set(v, &net)?);
    }
    if let Some(s) = &args.sentinels {
        query = query.sentinels(node_set(s, &net)?);
    }
    let est = if args.exact {
        exact_enumerate(&net, &query)?
    } else {
        mc_estimate(&net, &query, args.mc_sims, args.seed)?
    };
    let mut out = output(&args.out)?;
    writeln!(out, "# cascade-nmp oracle v1")?;
    writeln!(out, "quantity,node,t,value,std_err")?;
    for (i, (&m, &se)) in est.marginals.iter().zip(&est.marginal_std_err).enumerate() {
        writeln!(out, "final,{i},,{m:.16e},{se:.16e}")?;
    }
    for (i, series) in est.temporal.iter().enumerate() {
        for (t, v) in series.iter().enumerate() {
            writeln!(out, "temporal,{i},{t},{v:.16e},")?;
        }
    }
    if let Some(det) = &est.detection {
        for t in 0..=args.horizon {
            let se = est.detection_std_err.get(t).copied().unwrap_or(0.0);
            writeln!(out, "detection,,{t},{:.16e},{se:.16e}", det.cumulative(t))?;
        }
        writeln!(out, "never,,,{:.16e},", det.never)?;
    }
    writeln!(out, "size,,,{:.16e},{:.16e}", est.expected_size, est.size_std_err)?;
    out.flush()?;
    Ok(())
}

fn samples_cmd(args: SampleArgs) -> Result<()> {
    let net = args.graph.load(args.p)?;
    net.check_node(args.node)?;
    let hoods = Neighborhoods::build(&net, args.r, DEFAULT_MAX_RADIUS)?;
    let local = LocalGraph::new(&net, &hoods.get(args.node).edge_set, args.node);
    let kind: SamplerKind = args.sampler.parse()?;
    let set = local.sample(kind, args.samples, &mut rng::stream(args.seed, args.node as u64))?;
    let mut out = output(&args.out)?;
    writeln!(out, "{}", serde_json::to_string_pretty(&set.stats())?)?;
    out.flush()?;
    Ok(())
}

fn exit_code(err: &Error) -> ExitCode {
    if err.is_data_error() {
        ExitCode::from(3)
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Summarize(a) => summarize_cmd(a),
        Command::Neighborhoods(a) => neighborhoods_cmd(a),
        Command::Marginals(a) => marginals_cmd(a),
        Command::Oracle(a) => oracle_cmd(a),
        Command::Samples(a) => samples_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}
