use clare_core::{
    behavior_policy, default_horizon, empirical_expert, expected_return, fit_dynamics, occupancy_of_policy,
    sample_dataset, tv_distance, DatasetLabel, Dims, Policy, TabularMdp,
};
use rand::Rng;

use super::{record_or_failure, run};
use crate::error::Result;
use crate::gen;
use crate::oracle::rollout::tv;
use crate::report::{InstanceRecord, VerificationReport};

const TOL: f64 = 1e-9;

/// Return-gap upper bound on random MDPs with rewards in `[-1, 1]`.
///
/// Each instance samples expert data, fits a model on expert plus uniform
/// data (every tenth instance instead pairs deterministic dynamics with a
/// uniform model), picks a policy, and evaluates both sides exactly.
/// Violation is `max(0, lhs - rhs)`; the slack is recorded.
pub fn verify_theorem2(instances: usize, seed: u64) -> Result<VerificationReport> {
    run("theorem2", instances, TOL, |i| record_or_failure(i, instance(seed, i)))
}

fn instance(seed: u64, i: usize) -> clare_core::Result<InstanceRecord> {
    let mut rng = gen::instance_rng(seed, "theorem2", i);
    let gamma = if i % 2 == 0 { 0.5 } else { 0.9 };
    let adversarial = i % 10 == 5;
    let dims = if adversarial {
        Dims::new(rng.random_range(2..=6), rng.random_range(1..=4))
    } else {
        gen::dims(&mut rng, 6, 4)
    };
    let sparsity = if adversarial { 1.0 } else { rng.random_range(0.0..0.6) };
    let mdp = gen::mdp(&mut rng, dims, gamma, sparsity);
    let policy_sparsity = rng.random_range(0.0..0.6);
    let expert = gen::policy(&mut rng, dims, policy_sparsity);
    let rho_true = occupancy_of_policy(&mdp, &expert, 1e-12)?;

    let (model, rho_emp, policy, kind) = if i == 0 {
        (mdp.clone(), rho_true.mass().to_vec(), expert.clone(), "exact")
    } else {
        let horizon = default_horizon(gamma);
        let n = rng.random_range(20..500);
        let data = sample_dataset(&mdp, &expert, n, horizon, rng.random(), DatasetLabel::Expert)?;
        let rho_emp = empirical_expert::<f64>(&data, dims)?.mass;
        let model = if adversarial {
            uniform_model(&mdp, dims)?
        } else {
            let m = rng.random_range(0..500);
            let uniform = Policy::uniform(dims);
            let diverse = sample_dataset(&mdp, &uniform, m.max(1), horizon, rng.random(), DatasetLabel::Diverse)?;
            let smoothing = [0.0, 1e-3, 0.5][rng.random_range(0..3)];
            fit_dynamics(&data, &diverse, dims, smoothing)?.environment(mdp.initial().to_vec(), gamma)?
        };
        let (policy, kind) = match i % 4 {
            0 => (expert.clone(), "expert"),
            1 => (Policy::uniform(dims), "uniform"),
            2 => (gen::policy(&mut rng, dims, 0.3), "random"),
            _ => (behavior_policy(&data, dims)?, "cloned"),
        };
        (model, rho_emp, policy, kind)
    };

    let lhs = expected_return(&mdp, &expert)? - expected_return(&mdp, &policy)?;
    let rho_model = occupancy_of_policy(&model, &policy, 1e-12)?;
    let mut model_term = 0.0;
    for s in 0..dims.num_states {
        for a in 0..dims.num_actions {
            let d = tv(mdp.transition_row(s, a), model.transition_row(s, a));
            model_term += rho_model.get(s, a) * d;
        }
    }
    model_term *= 2.0 * gamma / (1.0 - gamma);
    let policy_term = tv_distance(rho_model.mass(), &rho_emp)?;
    let sample_term = tv_distance(&rho_emp, rho_true.mass())?;
    let rhs = model_term + 2.0 * (policy_term + sample_term);
    let slack = rhs - lhs;
    let mut rec = InstanceRecord::new(i)
        .violation((-slack).max(0.0))
        .value("lhs", lhs)
        .value("rhs", rhs)
        .value("slack", slack)
        .value("model_term", model_term)
        .value("policy_term", policy_term)
        .value("sample_term", sample_term)
        .note(kind);
    if adversarial {
        rec = rec.note(format!("{kind}; deterministic dynamics, uniform model"));
    }
    Ok(rec)
}

fn uniform_model(mdp: &TabularMdp<f64>, dims: Dims) -> clare_core::Result<TabularMdp<f64>> {
    let ns = dims.num_states;
    TabularMdp::new(
        dims,
        vec![1.0 / ns as f64; dims.pairs() * ns],
        vec![0.0; dims.pairs()],
        mdp.initial().to_vec(),
        mdp.discount(),
    )
}
