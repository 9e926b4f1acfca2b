//! Per-seed pipeline, baselines and run reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use clare_core::{
    behavior_policy, clare_train, count_uncertainty, default_horizon, empirical_expert, empirical_union,
    expected_return, fit_dynamics, occupancy_of_policy, optimal_policy, optimal_weights, practical_weights,
    sample_dataset, sample_dataset_from, soft_policy_solve, state_marginal, true_model_error, ClareConfig,
    Dataset, DatasetLabel, Dims, ErrorTable, Policy, RewardFunction, SoftSolve, TabularMdp, TrainOutcome,
    TrainProblem, WeightTable, TRAINING_SMOOTHING,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DiversePolicy, EnvSpec, ExperimentConfig, WeightSpec};
use crate::error::{BenchError, Result};
use crate::gridworld::gen_gridworld;

pub fn build_env(spec: &EnvSpec) -> Result<TabularMdp<f64>> {
    match *spec {
        EnvSpec::RandomMdp {
            num_states,
            num_actions,
            seed,
            reward_scale,
            gamma,
        } => {
            let mut rng = clare_verify::gen::instance_rng(seed, "random_mdp", 0);
            let m = clare_verify::gen::mdp(&mut rng, Dims::new(num_states, num_actions), gamma, 0.3);
            let r = m.reward().iter().map(|x| x * reward_scale).collect();
            Ok(m.with_reward(r)?)
        }
        EnvSpec::Gridworld {
            width,
            height,
            slip,
            goal,
            gamma,
        } => gen_gridworld(width, height, slip, goal, gamma),
    }
}

/// Behavior cloning: empirical action frequencies of the expert data.
pub fn bc_policy(expert: &Dataset, dims: Dims) -> Result<Policy<f64>> {
    Ok(behavior_policy(expert, dims)?)
}

/// Model-based maximum-entropy IRL without conservatism: the training loop
/// with all weights zero.
pub fn momax_train(
    config: &ClareConfig<f64>,
    model: &TabularMdp<f64>,
    rho_e: &[f64],
    rho_d: &[f64],
    true_env: Option<&TabularMdp<f64>>,
) -> Result<TrainOutcome<f64>> {
    let weights = WeightTable::zeros(model.dims());
    Ok(clare_train(
        config,
        &TrainProblem {
            model,
            rho_e,
            rho_d,
            weights: &weights,
            behavior: None,
            true_env,
        },
    )?)
}

/// True return of the soft-optimal policy for `reward` in `mdp`.
pub fn reward_transfer_eval(reward: &RewardFunction<f64>, mdp: &TabularMdp<f64>, alpha: f64) -> Result<f64> {
    let params = SoftSolve {
        alpha,
        z_beta: 1.0,
        lambda: 0.0,
        iters: 1_000_000,
        tol: 1e-10,
    };
    let pi = soft_policy_solve(mdp, reward, &params, None)?;
    Ok(expected_return(mdp, &pi)?)
}

/// Mixes `policy` with the uniform policy.
fn epsilon_mix(policy: &Policy<f64>, epsilon: f64) -> Result<Policy<f64>> {
    let k = policy.dims().num_actions as f64;
    let probs = policy.table().iter().map(|p| (1.0 - epsilon) * p + epsilon / k).collect();
    Ok(Policy::new(policy.dims(), probs)?)
}

fn sub_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(stream.wrapping_mul(0xbf58_476d_1ce4_e5b9))
}

/// Everything derived from one seed's data.
pub struct SeedData {
    pub env: TabularMdp<f64>,
    pub expert_policy: Policy<f64>,
    pub expert: Dataset,
    pub diverse: Dataset,
}

pub fn generate_data(config: &ExperimentConfig, seed: u64) -> Result<SeedData> {
    let env = build_env(&config.env)?;
    let dims = env.dims();
    let expert_policy = optimal_policy(&env)?;
    let horizon = default_horizon(env.discount());
    let start = match &config.data.expert_start {
        Some(states) => {
            let mut start = vec![0.0; dims.num_states];
            for &s in states {
                if s >= dims.num_states {
                    return Err(BenchError::Config(format!("expert start state {s} out of range")));
                }
                start[s] = 1.0;
            }
            let n: f64 = start.iter().sum();
            start.iter().map(|x| x / n).collect()
        }
        None => env.initial().to_vec(),
    };
    let expert = sample_dataset_from(
        &env,
        &expert_policy,
        &start,
        config.data.expert_n,
        horizon,
        sub_seed(seed, 1),
        DatasetLabel::Expert,
    )?;
    let diverse = if config.data.diverse_n == 0 {
        Dataset::new(DatasetLabel::Diverse, Vec::new())
    } else {
        let policy = match config.data.diverse_policy {
            DiversePolicy::Random => Policy::uniform(dims),
            DiversePolicy::EpsilonExpert { epsilon } => epsilon_mix(&expert_policy, epsilon)?,
        };
        sample_dataset(&env, &policy, config.data.diverse_n, horizon, sub_seed(seed, 2), DatasetLabel::Diverse)?
    };
    Ok(SeedData {
        env,
        expert_policy,
        expert,
        diverse,
    })
}

/// One row of a run report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    pub return_clare: Option<f64>,
    pub return_bc: Option<f64>,
    pub return_momax: Option<f64>,
    pub return_expert: Option<f64>,
    /// True return after re-solving the true environment under the learned
    /// reward.
    pub return_transfer: Option<f64>,
    pub d_psi_final: Option<f64>,
    /// Model-occupancy mass of the final policies on pairs whose
    /// uncertainty exceeds the threshold (threshold weights only).
    pub unsafe_mass_clare: Option<f64>,
    pub unsafe_mass_momax: Option<f64>,
    /// Target mass on those pairs.
    pub unsafe_mass_target: Option<f64>,
    /// Model-occupancy mass above the configured reference threshold.
    pub reference_mass_clare: Option<f64>,
    pub reward_table_path: Option<String>,
    pub error: Option<String>,
}

impl SeedRow {
    fn failed(seed: u64, error: String) -> Self {
        Self {
            seed,
            return_clare: None,
            return_bc: None,
            return_momax: None,
            return_expert: None,
            return_transfer: None,
            d_psi_final: None,
            unsafe_mass_clare: None,
            unsafe_mass_momax: None,
            unsafe_mass_target: None,
            reference_mass_clare: None,
            reward_table_path: None,
            error: Some(error),
        }
    }
}

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub stddev: f64,
    pub count: usize,
}

impl Aggregate {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let stddev = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self {
            mean,
            stddev,
            count: xs.len(),
        })
    }
}

/// `sqrt((s1^2 + s2^2) / 2)`.
pub fn pooled_stddev(a: &Aggregate, b: &Aggregate) -> f64 {
    ((a.stddev.powi(2) + b.stddev.powi(2)) / 2.0).sqrt()
}

pub const METRICS: [&str; 10] = [
    "return_clare",
    "return_bc",
    "return_momax",
    "return_expert",
    "return_transfer",
    "d_psi_final",
    "unsafe_mass_clare",
    "unsafe_mass_momax",
    "unsafe_mass_target",
    "reference_mass_clare",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub rows: Vec<SeedRow>,
    pub aggregates: BTreeMap<String, Aggregate>,
}

impl RunReport {
    pub fn from_rows(rows: Vec<SeedRow>) -> Self {
        let mut aggregates = BTreeMap::new();
        for m in METRICS {
            let xs: Vec<f64> = rows.iter().filter_map(|r| r.metric(m)).collect();
            if let Some(a) = Aggregate::of(&xs) {
                aggregates.insert(m.to_string(), a);
            }
        }
        Self { rows, aggregates }
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.aggregates.get(metric).map(|a| a.mean)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

impl SeedRow {
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "return_clare" => self.return_clare,
            "return_bc" => self.return_bc,
            "return_momax" => self.return_momax,
            "return_expert" => self.return_expert,
            "return_transfer" => self.return_transfer,
            "d_psi_final" => self.d_psi_final,
            "unsafe_mass_clare" => self.unsafe_mass_clare,
            "unsafe_mass_momax" => self.unsafe_mass_momax,
            "unsafe_mass_target" => self.unsafe_mass_target,
            "reference_mass_clare" => self.reference_mass_clare,
            _ => None,
        }
        .filter(|x| x.is_finite())
    }
}

/// Model dynamics as an environment whose start distribution is the state
/// marginal of the pooled data.
pub fn model_env(data: &SeedData) -> Result<TabularMdp<f64>> {
    let dims = data.env.dims();
    let model = fit_dynamics(&data.expert, &data.diverse, dims, TRAINING_SMOOTHING)?;
    let start = state_marginal(&[&data.expert, &data.diverse], dims.num_states)?;
    Ok(model.environment(start, data.env.discount())?)
}

/// Weights for the configured scheme, with the mask of pairs the scheme
/// treats as unsafe: uncertainty above `u` for threshold weights, and more
/// than 2 above the minimum for closed-form weights.
pub fn weights_for(config: &ExperimentConfig, data: &SeedData) -> Result<(WeightTable<f64>, Option<Vec<bool>>)> {
    let dims = data.env.dims();
    let model = fit_dynamics(&data.expert, &data.diverse, dims, TRAINING_SMOOTHING)?;
    let expert = empirical_expert::<f64>(&data.expert, dims)?;
    let union = empirical_union::<f64>(&data.expert, &data.diverse, dims)?;
    let gamma = data.env.discount();
    let closed_form = |errors: ErrorTable<f64>| -> Result<(WeightTable<f64>, Option<Vec<bool>>)> {
        let w = optimal_weights(&errors, &expert.mass, &union.mass)?;
        let mask = errors.c.iter().map(|&c| c - errors.c_min > 2.0).collect();
        Ok((w, Some(mask)))
    };
    match config.weights {
        WeightSpec::Zero => Ok((WeightTable::zeros(dims), None)),
        WeightSpec::Optimal => closed_form(true_model_error(&data.env, &model)?),
        WeightSpec::OptimalCounts { delta } => closed_form(count_uncertainty(&model, delta, gamma)?),
        WeightSpec::Practical { u, delta } => {
            let errors = count_uncertainty(&model, delta, gamma)?.rescaled_to_unit_max()?;
            let w = practical_weights(&errors, u, &expert, &union)?;
            let mask = errors.c.iter().map(|&c| c > u).collect();
            Ok((w, Some(mask)))
        }
    }
}

fn reference_delta(config: &ExperimentConfig) -> f64 {
    match config.weights {
        WeightSpec::Practical { delta, .. } | WeightSpec::OptimalCounts { delta } => delta,
        _ => 0.05,
    }
}

fn masked_mass(mass: &[f64], mask: &[bool]) -> f64 {
    mass.iter().zip(mask).filter(|(_, &m)| m).map(|(x, _)| x).sum()
}

fn run_seed(config: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<SeedRow> {
    let data = generate_data(config, seed)?;
    let dims = data.env.dims();
    let env = &data.env;
    let model = model_env(&data)?;
    let expert = empirical_expert::<f64>(&data.expert, dims)?;
    let union = empirical_union::<f64>(&data.expert, &data.diverse, dims)?;
    let (weights, unsafe_pairs) = weights_for(config, &data)?;

    let problem = TrainProblem {
        model: &model,
        rho_e: &expert.mass,
        rho_d: &union.mass,
        weights: &weights,
        behavior: None,
        true_env: None,
    };
    let clare = clare_train(&config.clare, &problem)?;
    let momax = momax_train(&config.clare, &model, &expert.mass, &union.mass, None)?;
    let bc = bc_policy(&data.expert, dims)?;

    let occupancy_of = |out: &TrainOutcome<f64>| -> Result<Vec<f64>> {
        match &out.occupancy {
            Some(o) => Ok(o.mass().to_vec()),
            None => Ok(occupancy_of_policy(&model, &out.policy, 1e-10)?.mass().to_vec()),
        }
    };
    let (unsafe_clare, unsafe_momax, unsafe_target) = match &unsafe_pairs {
        Some(mask) => (
            Some(masked_mass(&occupancy_of(&clare)?, mask)),
            Some(masked_mass(&occupancy_of(&momax)?, mask)),
            Some(masked_mass(clare.target.mass(), mask)),
        ),
        None => (None, None, None),
    };

    let reference_mass = match config.reference_threshold {
        Some(level) => {
            let fit = fit_dynamics(&data.expert, &data.diverse, dims, TRAINING_SMOOTHING)?;
            let errors = count_uncertainty(&fit, reference_delta(config), env.discount())?.rescaled_to_unit_max()?;
            let mask: Vec<bool> = errors.c.iter().map(|&c| c > level).collect();
            Some(masked_mass(&occupancy_of(&clare)?, &mask))
        }
        None => None,
    };

    let rel = format!("rewards/seed_{seed}.json");
    fs::create_dir_all(out_dir.join("rewards"))?;
    fs::write(out_dir.join(&rel), clare.reward.to_json()?)?;

    Ok(SeedRow {
        seed,
        return_clare: Some(expected_return(env, &clare.policy)?),
        return_bc: Some(expected_return(env, &bc)?),
        return_momax: Some(expected_return(env, &momax.policy)?),
        return_expert: Some(expected_return(env, &data.expert_policy)?),
        return_transfer: Some(reward_transfer_eval(&clare.reward, env, config.clare.alpha)?),
        d_psi_final: clare.trace.last().map(|r| r.d_psi),
        unsafe_mass_clare: unsafe_clare,
        unsafe_mass_momax: unsafe_momax,
        unsafe_mass_target: unsafe_target,
        reference_mass_clare: reference_mass,
        reward_table_path: Some(rel),
        error: None,
    })
}

/// Runs every seed (in parallel), records per-seed failures without
/// aborting, and writes `report.json` and `report.csv` to the output
/// directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let out = &config.output_dir;
    fs::create_dir_all(out)?;
    let rows: Vec<SeedRow> = config
        .seeds
        .par_iter()
        .map(|&seed| run_seed(config, seed, out).unwrap_or_else(|e| SeedRow::failed(seed, e.to_string())))
        .collect();
    let report = RunReport::from_rows(rows);
    fs::write(out.join("report.json"), report.to_json()?)?;
    report.write_csv(fs::File::create(out.join("report.csv"))?)?;
    Ok(report)
}
