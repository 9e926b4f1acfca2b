//! The alternating CLARE loop: soft policy improvement under the learned
//! model followed by a few conservative reward-descent steps.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{ClareError, Result};
use crate::mdp::{
    causal_entropy, check_same_dims, expected_return, occupancy_of_policy, OccupancyMeasure, Policy,
    TabularMdp,
};
use crate::solver::reward::{
    divergence, loss_of_mass, replay_regularizer, step_on_mass, gradient_of_mass, Regularizer,
    RewardFunction,
};
use crate::solver::soft::{soft_value_iteration, SoftSolve};
use crate::scalar::Scalar;
use crate::weights::{target_interpolation, TargetDistribution, WeightTable};

fn default_vi_tol<T: Scalar>() -> T {
    T::tol(1e-10)
}

fn default_zero<T: Scalar>() -> T {
    T::zero()
}

/// Hyperparameters of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ClareConfig<T: Scalar> {
    /// Entropy weight.
    pub alpha: T,
    /// Behavior-policy weight (0 disables the term).
    #[serde(default = "default_zero")]
    pub lambda: T,
    /// Reward step size.
    pub eta: T,
    pub inner_vi_iters: usize,
    pub reward_steps: usize,
    pub outer_iters: usize,
    #[serde(default)]
    pub regularizer: Regularizer<T>,
    #[serde(default = "default_vi_tol")]
    pub vi_tol: T,
    /// Stop early once the reward gradient's sup-norm drops below this
    /// (0 runs every outer iteration).
    #[serde(default = "default_zero")]
    pub stop_tol: T,
    /// Fit the reward against the running mean of model occupancies instead
    /// of the latest one.
    #[serde(default)]
    pub use_replay: bool,
}

impl<T: Scalar> Default for ClareConfig<T> {
    fn default() -> Self {
        Self {
            alpha: T::lit(0.1),
            lambda: T::zero(),
            eta: T::lit(0.05),
            inner_vi_iters: 200,
            reward_steps: 5,
            outer_iters: 100,
            regularizer: Regularizer::default(),
            vi_tol: default_vi_tol(),
            stop_tol: T::zero(),
            use_replay: false,
        }
    }
}

impl<T: Scalar> ClareConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(ClareError::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("eta", self.eta)?;
        positive("vi_tol", self.vi_tol)?;
        if !(self.lambda >= T::zero()) || !(self.stop_tol >= T::zero()) {
            return Err(ClareError::InvalidParameter(
                "lambda and stop_tol must be nonnegative".into(),
            ));
        }
        if self.inner_vi_iters == 0 || self.reward_steps == 0 {
            return Err(ClareError::InvalidParameter(
                "iteration counts must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Everything a run trains against.
#[derive(Clone, Copy, Debug)]
pub struct TrainProblem<'a, T: Scalar> {
    /// Learned dynamics with the rollout start distribution; its reward
    /// table is ignored.
    pub model: &'a TabularMdp<T>,
    pub rho_e: &'a [T],
    pub rho_d: &'a [T],
    pub weights: &'a WeightTable<T>,
    pub behavior: Option<&'a Policy<T>>,
    /// When given, each trace row records the policy's return here.
    pub true_env: Option<&'a TabularMdp<T>>,
}

/// Per-iteration diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TraceRow<T: Scalar> {
    pub iteration: usize,
    /// Loss of the updated reward at this iteration's occupancy.
    pub reward_loss: T,
    /// `L(pi_k, r_{k-1})`, the best-response value of the previous reward.
    pub saddle_value: T,
    /// Divergence between the model occupancy and the target.
    pub d_psi: T,
    pub entropy: T,
    pub z_beta: T,
    pub return_true_env: Option<T>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrainTrace<T: Scalar> {
    pub rows: Vec<TraceRow<T>>,
}

impl<T: Scalar> TrainTrace<T> {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,reward_loss,saddle_value,d_psi,entropy,return_true_env")?;
        for r in &self.rows {
            let ret = r.return_true_env.map(|x| x.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.iteration, r.reward_loss, r.saddle_value, r.d_psi, r.entropy, ret
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn last(&self) -> Option<&TraceRow<T>> {
        self.rows.last()
    }
}

/// Output of [`clare_train`].
#[derive(Clone, Debug)]
pub struct TrainOutcome<T: Scalar> {
    pub policy: Policy<T>,
    pub reward: RewardFunction<T>,
    pub trace: TrainTrace<T>,
    pub target: TargetDistribution<T>,
    /// Occupancy of the final policy under the model.
    pub occupancy: Option<OccupancyMeasure<T>>,
    /// Sup-norm of the last reward gradient.
    pub gradient_norm: T,
}

/// Runs `outer_iters` rounds of policy improvement and reward descent from
/// the uniform policy and zero reward.
pub fn clare_train<T: Scalar>(config: &ClareConfig<T>, problem: &TrainProblem<'_, T>) -> Result<TrainOutcome<T>> {
    config.validate()?;
    let dims = problem.model.dims();
    check_same_dims(dims, problem.weights.dims())?;
    dims.check_len("rho_E", problem.rho_e.len())?;
    dims.check_len("rho_D", problem.rho_d.len())?;
    if let Some(env) = problem.true_env {
        check_same_dims(dims, env.dims())?;
    }
    let weights = problem.weights;
    let target = target_interpolation(problem.rho_e, problem.rho_d, weights)?;
    let spec = config.regularizer.with_default_reference(target.mass());
    spec.validate(dims)?;
    let z = weights.z_beta();
    let params = SoftSolve {
        alpha: config.alpha,
        z_beta: z,
        lambda: config.lambda,
        iters: config.inner_vi_iters,
        tol: config.vi_tol,
    };
    let occ_tol = T::tol(1e-10);

    let mut reward = RewardFunction::zeros(dims, spec.reward_bound());
    let mut policy = Policy::uniform(dims);
    let mut trace = TrainTrace::default();
    let mut values: Option<Vec<T>> = None;
    let mut replay: Option<Vec<T>> = None;
    let mut occupancy = None;
    let mut gradient_norm = T::infinity();

    for k in 1..=config.outer_iters {
        let sol = soft_value_iteration(problem.model, &reward, &params, problem.behavior, values.as_deref())?;
        values = Some(sol.values);
        policy = sol.policy;
        let occ = occupancy_of_policy(problem.model, &policy, occ_tol)?;
        let entropy = causal_entropy(&occ);
        let saddle_value =
            loss_of_mass(&reward, occ.mass(), problem.rho_e, problem.rho_d, weights, &spec)? + config.alpha * entropy;

        let fit_mass = if config.use_replay {
            let n = T::from_usize(k).unwrap();
            let avg: Vec<T> = match &replay {
                None => occ.mass().to_vec(),
                Some(prev) => prev
                    .iter()
                    .zip(occ.mass())
                    .map(|(&p, &x)| p + (x - p) / n)
                    .collect(),
            };
            replay = Some(avg.clone());
            avg
        } else {
            occ.mass().to_vec()
        };
        let fit_spec = if config.use_replay {
            replay_regularizer(&spec, &fit_mass, problem.rho_d)?
        } else {
            spec.clone()
        };

        let grad = gradient_of_mass(&reward, &fit_mass, problem.rho_e, problem.rho_d, weights, &fit_spec)?;
        gradient_norm = grad.iter().fold(T::zero(), |m, g| m.max(g.abs()));
        let stop = config.stop_tol > T::zero() && gradient_norm < config.stop_tol;
        if !stop {
            reward = step_on_mass(
                &reward,
                &fit_mass,
                problem.rho_e,
                problem.rho_d,
                weights,
                &fit_spec,
                config.eta,
                config.reward_steps,
            )?;
        }
        let reward_loss = loss_of_mass(&reward, &fit_mass, problem.rho_e, problem.rho_d, weights, &fit_spec)?;
        let d_psi = match divergence(&spec, occ.mass(), target.mass()) {
            Ok(d) => d,
            Err(ClareError::InfiniteDivergence(_)) => T::infinity(),
            Err(e) => return Err(e),
        };
        let return_true_env = match problem.true_env {
            Some(env) => Some(expected_return(env, &policy)?),
            None => None,
        };
        trace.rows.push(TraceRow {
            iteration: k,
            reward_loss,
            saddle_value,
            d_psi,
            entropy,
            z_beta: z,
            return_true_env,
        });
        occupancy = Some(occ);
        if stop {
            break;
        }
    }

    Ok(TrainOutcome {
        policy,
        reward,
        trace,
        target,
        occupancy,
        gradient_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::Dims;

    fn two_state() -> TabularMdp<f64> {
        let t = vec![0.9, 0.1, 0.2, 0.8, 0.3, 0.7, 0.6, 0.4];
        TabularMdp::new(Dims::new(2, 2), t, vec![1.0, 0.0, 0.0, 1.0], vec![0.5, 0.5], 0.8).unwrap()
    }

    #[test]
    fn zero_iterations_is_a_no_op() {
        let m = two_state();
        let rho = occupancy_of_policy(&m, &Policy::uniform(m.dims()), 1e-12).unwrap();
        let w = WeightTable::zeros(m.dims());
        let problem = TrainProblem {
            model: &m,
            rho_e: rho.mass(),
            rho_d: rho.mass(),
            weights: &w,
            behavior: None,
            true_env: None,
        };
        let config = ClareConfig {
            outer_iters: 0,
            ..ClareConfig::default()
        };
        let out = clare_train(&config, &problem).unwrap();
        assert_eq!(out.policy, Policy::uniform(m.dims()));
        assert!(out.reward.values().iter().all(|&x| x == 0.0));
        assert!(out.trace.rows.is_empty());
    }

    fn expert_run(outer: usize) -> TrainOutcome<f64> {
        let m = two_state();
        let expert = Policy::deterministic(m.dims(), &[0, 1]).unwrap();
        let rho_e = occupancy_of_policy(&m, &expert, 1e-12).unwrap();
        let w = WeightTable::zeros(m.dims());
        let problem = TrainProblem {
            model: &m,
            rho_e: rho_e.mass(),
            rho_d: rho_e.mass(),
            weights: &w,
            behavior: None,
            true_env: Some(&m),
        };
        let config = ClareConfig {
            alpha: 0.1,
            eta: 0.05,
            outer_iters: outer,
            regularizer: Regularizer::Quadratic { weight: 1.0 },
            ..ClareConfig::default()
        };
        clare_train(&config, &problem).unwrap()
    }

    #[test]
    fn follows_expert_without_diverse_weight() {
        let out = expert_run(50);
        let last = out.trace.last().unwrap();
        assert!(last.d_psi < 0.05, "d_psi = {}", last.d_psi);
        assert_eq!(out.policy.greedy_actions(), vec![0, 1]);
        assert!(out.trace.rows.iter().all(|r| r.reward_loss.is_finite()
            && r.saddle_value.is_finite()
            && r.return_true_env.unwrap().is_finite()));
    }

    #[test]
    fn saddle_value_settles_after_burn_in() {
        let out = expert_run(60);
        let rows = &out.trace.rows[10..];
        for pair in rows.windows(2) {
            assert!(pair[1].saddle_value <= pair[0].saddle_value + 1e-3);
        }
    }

    #[test]
    fn trace_csv_layout() {
        let out = expert_run(2);
        let mut buf = Vec::new();
        out.trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "iteration,reward_loss,saddle_value,d_psi,entropy,return_true_env"
        );
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn replay_mode_runs() {
        let m = two_state();
        let expert = Policy::deterministic(m.dims(), &[0, 1]).unwrap();
        let rho_e = occupancy_of_policy(&m, &expert, 1e-12).unwrap();
        let w = WeightTable::zeros(m.dims());
        let problem = TrainProblem {
            model: &m,
            rho_e: rho_e.mass(),
            rho_d: rho_e.mass(),
            weights: &w,
            behavior: None,
            true_env: None,
        };
        let config = ClareConfig {
            outer_iters: 30,
            use_replay: true,
            regularizer: Regularizer::Chi2 { delta: 1.0, reference: None },
            ..ClareConfig::default()
        };
        let out = clare_train(&config, &problem).unwrap();
        assert_eq!(out.trace.rows.len(), 30);
        assert!(out.trace.rows.iter().all(|r| r.reward_loss.is_finite()));
    }

    #[test]
    fn config_json_defaults() {
        let c: ClareConfig<f64> = serde_json::from_str(
            r#"{"alpha":0.1,"eta":0.5,"inner_vi_iters":200,"reward_steps":5,"outer_iters":10}"#,
        )
        .unwrap();
        assert_eq!(c.lambda, 0.0);
        assert_eq!(c.regularizer, Regularizer::Quadratic { weight: 1.0 });
        assert!(!c.use_replay);
        let bad = ClareConfig::<f64> {
            alpha: 0.0,
            ..ClareConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
