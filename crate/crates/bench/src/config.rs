//! Experiment configuration.

use std::path::PathBuf;

use clare_core::ClareConfig;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// Environment generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    RandomMdp {
        num_states: usize,
        num_actions: usize,
        seed: u64,
        reward_scale: f64,
        gamma: f64,
    },
    Gridworld {
        width: usize,
        height: usize,
        slip: f64,
        goal: (usize, usize),
        gamma: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiversePolicy {
    Random,
    /// Expert action with probability `1 - epsilon`, uniform otherwise.
    EpsilonExpert { epsilon: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub expert_n: usize,
    pub diverse_n: usize,
    pub diverse_policy: DiversePolicy,
    /// Expert episodes start uniformly on these states instead of the
    /// environment's start distribution.
    #[serde(default)]
    pub expert_start: Option<Vec<usize>>,
}

fn default_delta() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    /// Closed-form weights from the true model error.
    Optimal,
    /// Closed-form weights from the count-based uncertainty.
    OptimalCounts {
        #[serde(default = "default_delta")]
        delta: f64,
    },
    /// Thresholded weights on count-based uncertainty rescaled to `[0, 1]`.
    Practical {
        u: f64,
        #[serde(default = "default_delta")]
        delta: f64,
    },
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub data: DataSpec,
    pub clare: ClareConfig<f64>,
    pub weights: WeightSpec,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// When set, rows also record the policy's model-occupancy mass on pairs
    /// whose rescaled count uncertainty exceeds this fixed level, so runs
    /// with different thresholds share one yardstick.
    #[serde(default)]
    pub reference_threshold: Option<f64>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.data.expert_n == 0 {
            return bad("expert_n must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        match &self.env {
            EnvSpec::RandomMdp {
                num_states,
                num_actions,
                reward_scale,
                gamma,
                ..
            } => {
                if *num_states == 0 || *num_actions == 0 {
                    return bad("random MDP needs at least one state and action".into());
                }
                if !(*reward_scale > 0.0 && *reward_scale <= 1.0) {
                    return bad(format!("reward_scale must lie in (0, 1], got {reward_scale}"));
                }
                if !(0.0..1.0).contains(gamma) {
                    return bad(format!("gamma must lie in [0, 1), got {gamma}"));
                }
            }
            EnvSpec::Gridworld { gamma, .. } => {
                if !(0.0..1.0).contains(gamma) {
                    return bad(format!("gamma must lie in [0, 1), got {gamma}"));
                }
            }
        }
        if let DiversePolicy::EpsilonExpert { epsilon } = self.data.diverse_policy {
            if !(0.0..=1.0).contains(&epsilon) {
                return bad(format!("epsilon must lie in [0, 1], got {epsilon}"));
            }
        }
        let delta = match self.weights {
            WeightSpec::Practical { u, delta } => {
                if !(u > 0.0) {
                    return bad(format!("threshold u must be positive, got {u}"));
                }
                Some(delta)
            }
            WeightSpec::OptimalCounts { delta } => Some(delta),
            _ => None,
        };
        if let Some(delta) = delta {
            if !(delta > 0.0 && delta < 1.0) {
                return bad(format!("delta must lie in (0, 1), got {delta}"));
            }
        }
        if matches!(self.data.expert_start.as_deref(), Some([])) {
            return bad("expert_start must not be empty".into());
        }
        self.clare.validate()?;
        Ok(())
    }
}
