//! Time-resolved infection marginals of the independent cascade model on
//! networks with short loops, computed by dynamic neighborhood message
//! passing, together with the intervention objectives built on them and the
//! Monte Carlo and exact oracles used to check them.

pub mod engine;
pub mod error;
pub mod experiment;
pub mod interventions;
pub mod neighborhoods;
pub mod netgraph;
pub mod oracle;
pub mod percolation;
pub mod rng;

pub use engine::{
    classical_mp, nmp_conditional_marginal, run_nmp, steady_state, EngineConfig, EvalTime,
    MarginalHistory, MessageState, NmpModel, SeedVector, SteadyState,
};
pub use error::{Error, Result};
pub use experiment::{
    run_experiment, run_experiment_collect, summarize, ExperimentConfig, OracleChoice, ResultRow,
    SetSelection,
};
pub use interventions::{
    error_eps, evaluate_oracle, kendall_tau, kendall_tau_b, quality_influence, quality_sentinel,
    quality_vaccination, InterventionKind, InterventionSpec, Method, NmpEvaluator, OracleMethod,
    QualityReport,
};
pub use neighborhoods::{
    build_conditional, build_neighborhood, ConditionalNeighborhood, MessageIndex, Neighborhood,
    Neighborhoods,
};
pub use netgraph::{karate_club, EdgeId, Network, NodeId, NodeSet};
pub use oracle::{
    exact_enumerate, mc_estimate, simulate_cascade, CascadeTrace, OracleEstimate, OracleQuery,
    Seeding,
};
pub use percolation::{
    enumerate_exact, sample_bfs, sample_newman_ziff, LocalGraph, PercolationSample, SampleSet,
    SamplerKind,
};
