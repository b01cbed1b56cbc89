//! Competitive influence propagation among `K` candidates over `n` voters.
//!
//! Voters hold preference probability vectors (PPVs). Undecided voters wake
//! on independent rate-1 Poisson clocks, compute the combined influence of
//! every other voter under a generalized-modularity influence matrix, and
//! update their PPV with a softmax step. Seeded voters never change.
//!
//! The crate is split into:
//!
//! * [`graph`]: stochastic block model generation, edge-list ingestion and
//!   block-probability estimation on a compressed sparse layout.
//! * [`influence`]: the influence weights and the `O(deg(u) + K)` combined
//!   influence query backed by degree-weighted preference aggregates.
//! * [`dynamics`]: seeded-voter placement and the event-driven simulation.
//! * [`meanfield`]: block-level closed forms, the nonnegativity condition,
//!   percolation thresholds and the deterministic mean-field trajectory.
//! * [`rng`]: positional derivation of independent random streams.

pub mod dynamics;
pub mod error;
pub mod graph;
pub mod influence;
pub mod meanfield;
pub mod rng;

pub use dynamics::{
    init_scenario, run_simulation, softmax_update, tally_votes, EarlyStop, ScenarioConfig,
    SeedFraction, SimulationResult, Simulator, TrajectoryPoint, UpdateEvent, WholeBlockSeed,
};
pub use error::{Error, Result};
pub use graph::{
    estimate_block_probs, generate_sbm, load_partitioned_edge_list, BlockModelParams,
    BlockProbEstimate, Estimator, Graph, IngestOptions, LoadedGraph, PruneStats,
};
pub use influence::{Influence, InfluenceModel, PreferenceState};
pub use meanfield::{
    edge_density, empirical_scaled_influence, lambda_vector, meanfield_trajectory, meanfield_z,
    nonnegativity_condition, percolation_threshold, AffineCoefficient, ConditionMargin,
    MeanFieldScenario, MeanFieldTrajectory, ThresholdReport,
};
