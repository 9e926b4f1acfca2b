//! Seeded random instances.

use clare_core::{Dims, Policy, TabularMdp};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent stream for instance `index` of the check `name`.
pub fn instance_rng(seed: u64, name: &str, index: usize) -> ChaCha8Rng {
    // FNV-1a keeps streams distinct across checks without extra deps
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes().chain(index.to_le_bytes()) {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

/// Random point of the simplex; with `sparsity > 0` each entry is zeroed
/// with that probability (at least one entry survives).
pub fn distribution<R: Rng>(rng: &mut R, n: usize, sparsity: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random::<f64>() < sparsity {
                0.0
            } else {
                // exponential draws give a uniform point on the simplex
                -(1.0 - rng.random::<f64>()).ln()
            }
        })
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        let k = rng.random_range(0..n);
        v[k] = 1.0;
    }
    let t: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= t);
    v
}

pub fn transitions<R: Rng>(rng: &mut R, dims: Dims, sparsity: f64) -> Vec<f64> {
    (0..dims.pairs())
        .flat_map(|_| distribution(rng, dims.num_states, sparsity))
        .collect()
}

pub fn policy<R: Rng>(rng: &mut R, dims: Dims, sparsity: f64) -> Policy<f64> {
    let probs = (0..dims.num_states)
        .flat_map(|_| distribution(rng, dims.num_actions, sparsity))
        .collect();
    Policy::new(dims, probs).expect("rows are normalized")
}

/// Random MDP with rewards in `[-1, 1]`.
pub fn mdp<R: Rng>(rng: &mut R, dims: Dims, gamma: f64, sparsity: f64) -> TabularMdp<f64> {
    let t = transitions(rng, dims, sparsity);
    let r = (0..dims.pairs()).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mu = distribution(rng, dims.num_states, 0.0);
    TabularMdp::new(dims, t, r, mu, gamma).expect("valid random MDP")
}

pub fn dims<R: Rng>(rng: &mut R, max_states: usize, max_actions: usize) -> Dims {
    Dims::new(rng.random_range(1..=max_states), rng.random_range(1..=max_actions))
}
