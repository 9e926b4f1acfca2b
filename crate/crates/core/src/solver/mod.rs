//! Reward learning and policy improvement.

pub mod reward;
pub mod soft;
pub mod train;

pub use reward::{
    divergence, replay_reward_loss, reward_gradient, reward_loss, reward_step, Regularizer,
    RewardFunction,
};
pub use soft::{soft_policy_solve, soft_value_iteration, SoftSolution, SoftSolve, BEHAVIOR_FLOOR};
pub use train::{clare_train, ClareConfig, TraceRow, TrainOutcome, TrainProblem, TrainTrace};
