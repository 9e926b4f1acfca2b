//! Entropy-regularized policy improvement by soft value iteration.

use crate::error::{ClareError, Result};
use crate::mdp::{check_same_dims, Policy, TabularMdp};
use crate::scalar::{dot, log_sum_exp, Scalar};
use crate::solver::reward::RewardFunction;

/// Floor applied to behavior probabilities before taking logs.
pub const BEHAVIOR_FLOOR: f64 = 1e-8;

/// Settings for [`soft_policy_solve`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SoftSolve<T> {
    /// Entropy weight.
    pub alpha: T,
    /// Scale on the reward term.
    pub z_beta: T,
    /// Weight pulling the policy towards the behavior policy.
    pub lambda: T,
    pub iters: usize,
    /// Sup-norm change in the soft values that counts as converged.
    pub tol: T,
}

/// Result of a soft value-iteration run.
#[derive(Clone, Debug)]
pub struct SoftSolution<T: Scalar> {
    pub policy: Policy<T>,
    /// Unnormalized soft state values.
    pub values: Vec<T>,
    pub iterations: usize,
    /// Sup-norm change of the last sweep.
    pub residual: T,
    pub converged: bool,
}

/// Soft-optimal policy for `reward` under `model` (its own reward table is
/// ignored).
///
/// Iterates `Q = Z r + lambda' log pi_b + gamma T V`, `V = alpha logsumexp(Q /
/// alpha)` with `lambda' = lambda (1 - gamma)` and returns `pi ∝ exp(Q /
/// alpha)`. Fails when the sweep limit is reached before `tol`.
pub fn soft_policy_solve<T: Scalar>(
    model: &TabularMdp<T>,
    reward: &RewardFunction<T>,
    params: &SoftSolve<T>,
    behavior: Option<&Policy<T>>,
) -> Result<Policy<T>> {
    let sol = soft_value_iteration(model, reward, params, behavior, None)?;
    if !sol.converged {
        return Err(ClareError::NotConverged {
            what: "soft value iteration",
            iters: sol.iterations,
            residual: sol.residual.to_f64_lossy(),
        });
    }
    Ok(sol.policy)
}

/// Soft value iteration from an optional warm start; never fails on the
/// sweep limit, reporting convergence in the result instead.
pub fn soft_value_iteration<T: Scalar>(
    model: &TabularMdp<T>,
    reward: &RewardFunction<T>,
    params: &SoftSolve<T>,
    behavior: Option<&Policy<T>>,
    warm_start: Option<&[T]>,
) -> Result<SoftSolution<T>> {
    let dims = model.dims();
    check_same_dims(dims, reward.dims())?;
    if !(params.alpha > T::zero()) {
        return Err(ClareError::InvalidParameter(format!(
            "entropy weight must be positive, got {}",
            params.alpha
        )));
    }
    if !(params.tol > T::zero()) {
        return Err(ClareError::InvalidParameter("tolerance must be positive".into()));
    }
    if params.lambda < T::zero() {
        return Err(ClareError::InvalidParameter(format!(
            "behavior weight must be nonnegative, got {}",
            params.lambda
        )));
    }
    let gamma = model.discount();
    let alpha = params.alpha;
    let mut base: Vec<T> = reward.values().iter().map(|&r| params.z_beta * r).collect();
    if params.lambda > T::zero() {
        let pb = behavior.ok_or_else(|| {
            ClareError::InvalidParameter("behavior weight set without a behavior policy".into())
        })?;
        check_same_dims(dims, pb.dims())?;
        let lam = params.lambda * (T::one() - gamma);
        let floor = T::lit(BEHAVIOR_FLOOR);
        for (b, &p) in base.iter_mut().zip(pb.table()) {
            *b = *b + lam * p.max(floor).ln();
        }
    }
    let mut v = match warm_start {
        Some(w) if w.len() == dims.num_states => w.to_vec(),
        _ => vec![T::zero(); dims.num_states],
    };
    let na = dims.num_actions;
    let mut q = vec![T::zero(); dims.pairs()];
    let mut scaled = vec![T::zero(); na];
    let mut residual = T::infinity();
    let mut iterations = 0;
    let fill_q = |v: &[T], q: &mut [T]| {
        for s in 0..dims.num_states {
            for a in 0..na {
                let i = dims.index(s, a);
                q[i] = base[i] + gamma * dot(model.transition_row(s, a), v);
            }
        }
    };
    while iterations < params.iters {
        fill_q(&v, &mut q);
        residual = T::zero();
        for s in 0..dims.num_states {
            for (x, &qa) in scaled.iter_mut().zip(&q[s * na..(s + 1) * na]) {
                *x = qa / alpha;
            }
            let next = alpha * log_sum_exp(&scaled);
            residual = residual.max((next - v[s]).abs());
            v[s] = next;
        }
        iterations += 1;
        if !residual.is_finite() {
            return Err(ClareError::NotConverged {
                what: "soft value iteration (diverged)",
                iters: iterations,
                residual: f64::INFINITY,
            });
        }
        if residual <= params.tol {
            break;
        }
    }
    fill_q(&v, &mut q);
    let mut probs = Vec::with_capacity(dims.pairs());
    for s in 0..dims.num_states {
        for (x, &qa) in scaled.iter_mut().zip(&q[s * na..(s + 1) * na]) {
            *x = qa / alpha;
        }
        let lse = log_sum_exp(&scaled);
        let row: Vec<T> = scaled.iter().map(|&x| (x - lse).exp()).collect();
        let total: T = row.iter().copied().sum();
        probs.extend(row.into_iter().map(|p| p / total));
    }
    Ok(SoftSolution {
        policy: Policy::new(dims, probs)?,
        values: v,
        iterations,
        residual,
        converged: residual <= params.tol,
    })
}
