//! The fixed covariate-shift gridworld suite.

use std::path::Path;

use clare_core::{ClareConfig, Regularizer};

use crate::config::{DataSpec, DiversePolicy, EnvSpec, ExperimentConfig, WeightSpec};
use crate::gridworld::cell;

pub const WIDTH: usize = 8;
pub const HEIGHT: usize = 8;
pub const SLIP: f64 = 0.1;
pub const GOAL: (usize, usize) = (7, 7);
pub const GAMMA: f64 = 0.9;
pub const SEEDS: usize = 7;
pub const EXPERT_N: usize = 200;
pub const DIVERSE_N: usize = 2000;
pub const TRANSFER_EXPERT_N: usize = 10_000;
/// Threshold of the main run.
pub const U: f64 = 0.4;
pub const U_SWEEP: [f64; 3] = [0.8, 0.6, 0.4];

/// Expert episodes start in the two rightmost columns only.
pub fn expert_region() -> Vec<usize> {
    (0..HEIGHT)
        .flat_map(|y| (WIDTH - 2..WIDTH).map(move |x| cell(WIDTH, x, y)))
        .collect()
}

/// Training settings used across the suite.
pub fn clare_config() -> ClareConfig<f64> {
    ClareConfig {
        alpha: 0.01,
        eta: 0.5,
        reward_steps: 5,
        outer_iters: 300,
        regularizer: Regularizer::Quadratic { weight: 1e-2 },
        ..ClareConfig::default()
    }
}

/// Suite configuration with the given data size and weights; seeds run
/// from `first_seed`.
pub fn config(expert_n: usize, weights: WeightSpec, first_seed: u64, output_dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        env: EnvSpec::Gridworld {
            width: WIDTH,
            height: HEIGHT,
            slip: SLIP,
            goal: GOAL,
            gamma: GAMMA,
        },
        data: DataSpec {
            expert_n,
            diverse_n: DIVERSE_N,
            diverse_policy: DiversePolicy::Random,
            expert_start: Some(expert_region()),
        },
        clare: clare_config(),
        weights,
        seeds: (first_seed..first_seed + SEEDS as u64).collect(),
        output_dir: output_dir.to_path_buf(),
        reference_threshold: None,
    }
}

/// Threshold sweep sharing the loosest threshold as the reference level.
pub fn u_sweep(first_seed: u64, root: &Path) -> Vec<(f64, ExperimentConfig)> {
    U_SWEEP
        .iter()
        .map(|&u| {
            let mut c = config(EXPERT_N, practical(u), first_seed, &root.join(format!("u_{u}")));
            c.reference_threshold = Some(U_SWEEP[0]);
            (u, c)
        })
        .collect()
}

pub fn practical(u: f64) -> WeightSpec {
    WeightSpec::Practical { u, delta: 0.05 }
}

/// Named runs of the suite: the main comparison, closed-form weights on
/// the same uncertainty, and abundant expert data for reward transfer.
pub fn runs(first_seed: u64, root: &Path) -> Vec<(&'static str, ExperimentConfig)> {
    vec![
        ("main", config(EXPERT_N, practical(U), first_seed, &root.join("main"))),
        (
            "closed_form",
            config(
                EXPERT_N,
                WeightSpec::OptimalCounts { delta: 0.05 },
                first_seed,
                &root.join("closed_form"),
            ),
        ),
        (
            "transfer",
            config(TRANSFER_EXPERT_N, practical(U), first_seed, &root.join("transfer")),
        ),
    ]
}
