//! Tabular conservative model-based reward learning for offline inverse
//! reinforcement learning.
//!
//! Every numeric type is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the bottom of this file fix the precision for callers that do
//! not need the generality.

pub mod data;
pub mod error;
mod linalg;
pub mod mdp;
pub mod model;
pub mod scalar;
pub mod solver;
pub mod weights;

pub use data::{
    behavior_policy, default_horizon, empirical_expert, empirical_union, sample_dataset,
    sample_dataset_from, state_marginal, Dataset, DatasetLabel, EmpiricalDistribution, Transition,
};
pub use error::{ClareError, Result};
pub use mdp::{
    bellman_flow_residual, causal_entropy, expected_return, occupancy_of_policy, optimal_policy,
    policy_of_occupancy, state_transition_matrix, state_visitation, tv_distance, Dims, OccupancyMeasure, Policy, TabularMdp,
};
pub use model::{
    concentration_constant, count_uncertainty, error_scale, fit_dynamics, true_model_error, ErrorTable,
    ModelEstimate, TRAINING_SMOOTHING,
};
pub use scalar::Scalar;
pub use solver::{
    clare_train, divergence, replay_reward_loss, reward_gradient, reward_loss, reward_step,
    soft_policy_solve, soft_value_iteration, ClareConfig, Regularizer, RewardFunction, SoftSolution,
    SoftSolve, TraceRow, TrainOutcome, TrainProblem, TrainTrace, BEHAVIOR_FLOOR,
};
pub use weights::{
    normalizer, optimal_occupancy, optimal_weights, practical_weights, target_interpolation,
    TargetDistribution, WeightTable,
};

pub type TabularMdpF64 = TabularMdp<f64>;
pub type PolicyF64 = Policy<f64>;
pub type OccupancyF64 = OccupancyMeasure<f64>;
pub type ModelEstimateF64 = ModelEstimate<f64>;
pub type ErrorTableF64 = ErrorTable<f64>;
pub type WeightTableF64 = WeightTable<f64>;
pub type RewardFunctionF64 = RewardFunction<f64>;
pub type ClareConfigF64 = ClareConfig<f64>;

pub type TabularMdpF32 = TabularMdp<f32>;
pub type PolicyF32 = Policy<f32>;
pub type OccupancyF32 = OccupancyMeasure<f32>;
pub type ModelEstimateF32 = ModelEstimate<f32>;
pub type ErrorTableF32 = ErrorTable<f32>;
pub type WeightTableF32 = WeightTable<f32>;
pub type RewardFunctionF32 = RewardFunction<f32>;
pub type ClareConfigF32 = ClareConfig<f32>;
