//! Forward propagation of state distributions.

use clare_core::{Policy, TabularMdp};

/// Weight below which the discounted tail is dropped.
const TAIL: f64 = 1e-17;

/// One step of the state chain induced by `policy`.
pub fn step(mdp: &TabularMdp<f64>, policy: &Policy<f64>, p: &[f64]) -> Vec<f64> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut next = vec![0.0; ns];
    for s in 0..ns {
        if p[s] == 0.0 {
            continue;
        }
        for a in 0..na {
            let m = p[s] * policy.prob(s, a);
            for (x, t) in next.iter_mut().zip(mdp.transition_row(s, a)) {
                *x += m * t;
            }
        }
    }
    next
}

/// Normalized discounted occupancy as a truncated power series.
pub fn occupancy(mdp: &TabularMdp<f64>, policy: &Policy<f64>) -> Vec<f64> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let g = mdp.discount();
    let mut rho = vec![0.0; ns * na];
    let mut p = mdp.initial().to_vec();
    let mut w = 1.0 - g;
    while w > TAIL {
        for s in 0..ns {
            for a in 0..na {
                rho[s * na + a] += w * p[s] * policy.prob(s, a);
            }
        }
        p = step(mdp, policy, &p);
        w *= g;
    }
    rho
}

/// `sum rho * R` for the MDP's own reward.
pub fn expected_return(mdp: &TabularMdp<f64>, policy: &Policy<f64>) -> f64 {
    occupancy(mdp, policy).iter().zip(mdp.reward()).map(|(a, b)| a * b).sum()
}

/// `-sum rho log(rho / d)` with `0 log 0 = 0`.
pub fn entropy(rho: &[f64], num_actions: usize) -> f64 {
    rho.chunks(num_actions)
        .map(|row| {
            let d: f64 = row.iter().sum();
            row.iter().filter(|&&x| x > 0.0).map(|&x| -x * (x / d).ln()).sum::<f64>()
        })
        .sum()
}

/// Discounted entropy of per-state action distributions along the chain.
pub fn rollout_entropy(mdp: &TabularMdp<f64>, policy: &Policy<f64>) -> f64 {
    let h: Vec<f64> = (0..mdp.num_states())
        .map(|s| policy.row(s).iter().filter(|&&p| p > 0.0).map(|p| -p * p.ln()).sum())
        .collect();
    let mut p = mdp.initial().to_vec();
    let mut w = 1.0 - mdp.discount();
    let mut total = 0.0;
    while w > TAIL {
        total += w * p.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
        p = step(mdp, policy, &p);
        w *= mdp.discount();
    }
    total
}

pub fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use clare_core::Dims;

    #[test]
    fn two_state_swap_closed_form() {
        // deterministic swap from state 0: occupancy (1-g)/(1-g^2) vs g(1-g)/(1-g^2)
        let m = TabularMdp::new(Dims::new(2, 1), vec![0.0, 1.0, 1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0], 0.5).unwrap();
        let rho = occupancy(&m, &Policy::uniform(Dims::new(2, 1)));
        assert!((rho[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((rho[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_policy_entropy() {
        let m = TabularMdp::new(Dims::new(1, 4), vec![1.0; 4], vec![0.0; 4], vec![1.0], 0.9).unwrap();
        let pi = Policy::uniform(Dims::new(1, 4));
        assert!((rollout_entropy(&m, &pi) - 4f64.ln()).abs() < 1e-12);
        assert!((entropy(&occupancy(&m, &pi), 4) - 4f64.ln()).abs() < 1e-12);
    }
}
