use clare_core::{occupancy_of_policy, Dims, TabularMdp, WeightTable};
use rand::Rng;

use super::run;
use super::saddle::{evaluate, SaddleInstance};
use crate::error::Result;
use crate::gen;
use crate::oracle::fw::single_state_optimum;
use crate::report::{InstanceRecord, VerificationReport};

const TOL: f64 = 1e-3;

/// Min-max value of the conservative objective against the direct maximum
/// over the model's occupancy polytope, quadratic regularizer, up to 3
/// states and 2 actions.
///
/// Instance 0 has zero weights, a target realizable under the model and
/// `alpha = 1e-3`; instance 1 has a single state, where the direct side is
/// also solved in closed form and that gap enters the violation.
pub fn verify_theorem1(instances: usize, seed: u64) -> Result<VerificationReport> {
    run("theorem1", instances, TOL, |i| instance(seed, i))
}

fn instance(seed: u64, i: usize) -> InstanceRecord {
    let mut rng = gen::instance_rng(seed, "theorem1", i);
    let dims = if i == 1 {
        Dims::new(1, rng.random_range(2..=4))
    } else {
        Dims::new(rng.random_range(1..=3), 2)
    };
    let gamma = rng.random_range(0.5..0.9);
    let sparsity = rng.random_range(0.0..0.5);
    let model = gen::mdp(&mut rng, dims, gamma, sparsity);
    let model = model.with_reward(vec![0.0; dims.pairs()]).expect("same dims");
    let k = dims.pairs();
    let (rho_e, rho_d, beta, alpha) = if i == 0 {
        let pi = gen::policy(&mut rng, dims, 0.0);
        let rho = match occupancy_of_policy(&model, &pi, 1e-12) {
            Ok(o) => o.mass().to_vec(),
            Err(e) => return InstanceRecord::failure(i, e.to_string()),
        };
        (rho.clone(), rho, vec![0.0; k], 1e-3)
    } else {
        let rho_e = gen::distribution(&mut rng, k, 0.3);
        let rho_d = gen::distribution(&mut rng, k, 0.2);
        let beta = (0..k)
            .map(|j| {
                if rho_d[j] > 0.0 {
                    rng.random_range(-0.9 * rho_e[j] / rho_d[j]..1.5)
                } else {
                    0.0
                }
            })
            .collect();
        (rho_e, rho_d, beta, rng.random_range(0.1..1.0))
    };
    let weight = rng.random_range(0.25..2.0);
    let weights = match WeightTable::new(dims, beta, &rho_d, None) {
        Ok(w) => w,
        Err(e) => return InstanceRecord::failure(i, e.to_string()),
    };
    let inst = SaddleInstance {
        model: &model,
        rho_e: &rho_e,
        rho_d: &rho_d,
        weights: &weights,
        alpha,
        weight,
    };
    let values = match evaluate(&inst) {
        Ok(v) => v,
        Err(e) => return InstanceRecord::failure(i, e),
    };
    let mut rec = values.record(i).value("alpha", alpha).value("z_beta", weights.z_beta());
    if i == 0 {
        rec = rec.note("realizable target, zero weights");
    }
    if i == 1 {
        rec = single_state(rec, &model, &rho_e, &rho_d, &weights, alpha, weight);
    }
    rec
}

fn single_state(
    rec: InstanceRecord,
    model: &TabularMdp<f64>,
    rho_e: &[f64],
    rho_d: &[f64],
    weights: &WeightTable<f64>,
    alpha: f64,
    weight: f64,
) -> InstanceRecord {
    let z = weights.z_beta();
    let target: Vec<f64> = rho_e
        .iter()
        .zip(rho_d)
        .zip(weights.beta())
        .map(|((e, d), b)| (e + b * d) / z)
        .collect();
    let p = single_state_optimum(alpha, z, weight, &target);
    let closed = alpha * p.iter().filter(|&&x| x > 0.0).map(|x| -x * x.ln()).sum::<f64>()
        - z * p.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (4.0 * weight);
    debug_assert_eq!(model.num_states(), 1);
    let min_max = rec.values["min_max"];
    let max_direct = rec.values["max_direct"];
    let gap = (min_max - closed).abs().max((max_direct - closed).abs());
    let v = rec.violation.max(gap);
    rec.value("closed_form", closed).violation(v).note("single state")
}
