//! Benchmarks and baselines for conservative model-based imitation.

pub mod config;
pub mod error;
pub mod experiment;
pub mod gridworld;
pub mod suite;

pub use config::{DataSpec, DiversePolicy, EnvSpec, ExperimentConfig, WeightSpec};
pub use error::{BenchError, Result};
pub use experiment::{
    bc_policy, build_env, momax_train, pooled_stddev, reward_transfer_eval, run_experiment, Aggregate, RunReport,
    SeedRow,
};
pub use gridworld::gen_gridworld;
