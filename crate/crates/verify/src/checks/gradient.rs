use clare_core::{reward_gradient, reward_loss, Dims, OccupancyMeasure, Regularizer, RewardFunction, WeightTable};
use rand::Rng;

use super::{record_or_failure, run};
use crate::error::Result;
use crate::gen;
use crate::report::{InstanceRecord, VerificationReport};

const TOL: f64 = 1e-6;
const STEP: f64 = 1e-5;

/// Analytic reward gradient against central differences of the loss.
///
/// Error per coordinate is `|fd - g| / max(|g|, 1)`; quadratic and
/// chi-squared regularizers alternate across instances.
pub fn verify_gradient(instances: usize, seed: u64) -> Result<VerificationReport> {
    run("gradient", instances, TOL, |i| record_or_failure(i, instance(seed, i)))
}

fn instance(seed: u64, i: usize) -> clare_core::Result<InstanceRecord> {
    let mut rng = gen::instance_rng(seed, "gradient", i);
    let dims: Dims = gen::dims(&mut rng, 6, 4);
    let k = dims.pairs();
    let rho_e = gen::distribution(&mut rng, k, 0.3);
    let rho_d = gen::distribution(&mut rng, k, 0.0);
    let occ = OccupancyMeasure::new(dims, gen::distribution(&mut rng, k, 0.2))?;
    let beta: Vec<f64> = (0..k)
        .map(|j| rng.random_range(-0.9 * rho_e[j] / rho_d[j]..2.0))
        .collect();
    let weights = WeightTable::new(dims, beta, &rho_d, None)?;
    let spec = if i % 2 == 0 {
        Regularizer::Quadratic {
            weight: rng.random_range(0.1..2.0),
        }
    } else {
        Regularizer::Chi2 {
            delta: rng.random_range(0.1..2.0),
            reference: Some(
                gen::distribution(&mut rng, k, 0.0)
                    .iter()
                    .map(|x| (x + 0.01) / (1.0 + 0.01 * k as f64))
                    .collect(),
            ),
        }
    };
    let values: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
    let r = RewardFunction::new(dims, values.clone(), None)?;
    let g = reward_gradient(&r, &occ, &rho_e, &rho_d, &weights, &spec)?;
    let mut worst = 0.0f64;
    for j in 0..k {
        let shifted = |h: f64| -> clare_core::Result<f64> {
            let mut v = values.clone();
            v[j] += h;
            reward_loss(&RewardFunction::new(dims, v, None)?, &occ, &rho_e, &rho_d, &weights, &spec)
        };
        let fd = (shifted(STEP)? - shifted(-STEP)?) / (2.0 * STEP);
        worst = worst.max((fd - g[j]).abs() / g[j].abs().max(1.0));
    }
    Ok(InstanceRecord::new(i).violation(worst).value("pairs", k as f64))
}
