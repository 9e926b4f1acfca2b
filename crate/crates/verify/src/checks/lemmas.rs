use clare_core::{causal_entropy, occupancy_of_policy, policy_of_occupancy, Dims, Policy, TabularMdp};
use rand::Rng;

use super::{record_or_failure, run};
use crate::error::Result;
use crate::gen;
use crate::oracle::rollout;
use crate::report::{InstanceRecord, VerificationReport};

const ROUNDTRIP_TOL: f64 = 1e-8;
const ENTROPY_TOL: f64 = 1e-6;

/// Occupancy/policy roundtrip and entropy equivalence on random MDPs with
/// up to 6 states and actions.
///
/// The two parts have different tolerances, so each instance's violation is
/// the larger of the two errors divided by its own tolerance and the report
/// tolerance is 1.
pub fn verify_lemmas(instances: usize, seed: u64) -> Result<VerificationReport> {
    run("lemmas", instances, 1.0, |i| record_or_failure(i, instance(seed, i)))
}

fn instance(seed: u64, i: usize) -> clare_core::Result<InstanceRecord> {
    let mut rng = gen::instance_rng(seed, "lemmas", i);
    let dims = gen::dims(&mut rng, 6, 6);
    let gamma = rng.random_range(0.3..0.99);
    // every tenth instance is fully deterministic
    let (mdp, pi) = if i % 10 == 0 {
        deterministic(&mut rng, dims, gamma)?
    } else {
        let sparsity = rng.random_range(0.0..0.6);
        (gen::mdp(&mut rng, dims, gamma, sparsity), gen::policy(&mut rng, dims, sparsity))
    };
    let occ = occupancy_of_policy(&mdp, &pi, 1e-12)?;
    let back = policy_of_occupancy(&occ);
    let reference = rollout::occupancy(&mdp, &pi);
    let mut roundtrip = 0.0f64;
    for s in 0..dims.num_states {
        let visited: f64 = reference[s * dims.num_actions..(s + 1) * dims.num_actions].iter().sum();
        if visited > 1e-12 {
            for a in 0..dims.num_actions {
                roundtrip = roundtrip.max((back.prob(s, a) - pi.prob(s, a)).abs());
            }
        }
    }
    let occupancy_gap = occ.mass().iter().zip(&reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let entropy_gap = (causal_entropy(&occ) - rollout::rollout_entropy(&mdp, &pi)).abs();
    let violation = (roundtrip.max(occupancy_gap) / ROUNDTRIP_TOL).max(entropy_gap / ENTROPY_TOL);
    Ok(InstanceRecord::new(i)
        .violation(violation)
        .value("roundtrip", roundtrip)
        .value("occupancy_gap", occupancy_gap)
        .value("entropy_gap", entropy_gap))
}

fn deterministic<R: Rng>(rng: &mut R, dims: Dims, gamma: f64) -> clare_core::Result<(TabularMdp<f64>, Policy<f64>)> {
    let ns = dims.num_states;
    let mut t = vec![0.0; dims.pairs() * ns];
    for row in t.chunks_mut(ns) {
        row[rng.random_range(0..ns)] = 1.0;
    }
    let mut mu = vec![0.0; ns];
    mu[rng.random_range(0..ns)] = 1.0;
    let mdp = TabularMdp::new(dims, t, vec![0.0; dims.pairs()], mu, gamma)?;
    let actions: Vec<usize> = (0..ns).map(|_| rng.random_range(0..dims.num_actions)).collect();
    Ok((mdp, Policy::deterministic(dims, &actions)?))
}
