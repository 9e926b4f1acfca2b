//! Both sides of the min-max identity for a quadratic regularizer.

use clare_core::{
    clare_train, target_interpolation, ClareConfig, Regularizer, TabularMdp, TrainProblem, WeightTable,
};

use crate::oracle::fw::{FwProblem, Penalty};
use crate::report::InstanceRecord;

/// Sup-norm of the reward gradient at which the descent counts as converged.
pub(crate) const SADDLE_RESIDUAL: f64 = 1e-5;
const MAX_OUTER: usize = 400_000;
const FW_ITERS: usize = 50_000;
const FW_GAP: f64 = 1e-10;

pub(crate) struct SaddleInstance<'a> {
    pub model: &'a TabularMdp<f64>,
    pub rho_e: &'a [f64],
    pub rho_d: &'a [f64],
    pub weights: &'a WeightTable<f64>,
    pub alpha: f64,
    pub weight: f64,
}

pub(crate) struct SaddleValues {
    pub min_max: f64,
    pub max_direct: f64,
    pub direct_upper: f64,
    pub outer_iters: usize,
    pub residual: f64,
    pub fw_iters: usize,
}

impl SaddleValues {
    pub fn record(&self, index: usize) -> InstanceRecord {
        InstanceRecord::new(index)
            .violation((self.min_max - self.max_direct).abs())
            .value("min_max", self.min_max)
            .value("max_direct", self.max_direct)
            .value("direct_upper", self.direct_upper)
            .value("outer_iters", self.outer_iters as f64)
            .value("residual", self.residual)
            .value("fw_iters", self.fw_iters as f64)
    }
}

/// Runs reward descent to a stationary point and Frank-Wolfe on the direct
/// problem.
///
/// The step `1 / (Z (2w + Z / alpha))` is the inverse of a smoothness bound
/// on the outer objective; it is quartered on a failed attempt.
pub(crate) fn evaluate(inst: &SaddleInstance<'_>) -> Result<SaddleValues, String> {
    let z = inst.weights.z_beta();
    let mut eta = 1.0 / (z * (2.0 * inst.weight + z / inst.alpha));
    let problem = TrainProblem {
        model: inst.model,
        rho_e: inst.rho_e,
        rho_d: inst.rho_d,
        weights: inst.weights,
        behavior: None,
        true_env: None,
    };
    let mut last_err = String::new();
    let mut lhs = None;
    for _ in 0..3 {
        let config = ClareConfig {
            alpha: inst.alpha,
            eta,
            inner_vi_iters: 1_000_000,
            reward_steps: 1,
            outer_iters: MAX_OUTER,
            regularizer: Regularizer::Quadratic { weight: inst.weight },
            vi_tol: 1e-13,
            stop_tol: SADDLE_RESIDUAL,
            ..ClareConfig::default()
        };
        match clare_train(&config, &problem) {
            Ok(out) if out.gradient_norm < SADDLE_RESIDUAL => {
                let row = out.trace.last().expect("at least one iteration");
                lhs = Some((row.saddle_value, row.iteration, out.gradient_norm));
                break;
            }
            Ok(out) => last_err = format!("reward descent stalled at residual {:e}", out.gradient_norm),
            Err(e) => last_err = e.to_string(),
        }
        eta /= 4.0;
    }
    let (min_max, outer_iters, residual) = lhs.ok_or(last_err)?;
    let target = target_interpolation(inst.rho_e, inst.rho_d, inst.weights).map_err(|e| e.to_string())?;
    let fw = FwProblem {
        model: inst.model,
        alpha: inst.alpha,
        z,
        penalty: Penalty::Quadratic { weight: inst.weight },
        target: target.mass(),
    }
    .solve(FW_ITERS, FW_GAP);
    Ok(SaddleValues {
        min_max,
        max_direct: fw.value,
        direct_upper: fw.upper,
        outer_iters,
        residual,
        fw_iters: fw.iterations,
    })
}
