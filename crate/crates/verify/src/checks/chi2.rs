use clare_core::{divergence, Regularizer};
use rand::Rng;

use super::{record_or_failure, run};
use crate::error::Result;
use crate::gen;
use crate::report::{InstanceRecord, VerificationReport};

const TOL: f64 = 1e-10;
const CANDIDATES: usize = 1000;

/// Variational form of the chi-squared divergence.
///
/// Per instance: the candidate `r* = 2 (1 - rho1 / rho2)` must attain
/// `sum (rho1 - rho2)^2 / rho2`, the library's chi-squared divergence with
/// `delta = 1` and reference `rho2` must agree, and 1000 random `r` must not
/// exceed it by more than 1e-12.
pub fn verify_chi2(instances: usize, seed: u64) -> Result<VerificationReport> {
    run("chi2", instances, TOL, |i| record_or_failure(i, instance(seed, i)))
}

fn objective(rho1: &[f64], rho2: &[f64], r: &[f64]) -> f64 {
    rho1.iter()
        .zip(rho2)
        .zip(r)
        .map(|((p, q), x)| q * x - p * x - 0.25 * q * x * x)
        .sum()
}

fn instance(seed: u64, i: usize) -> clare_core::Result<InstanceRecord> {
    let mut rng = gen::instance_rng(seed, "chi2", i);
    let n = rng.random_range(1..=12);
    let rho2: Vec<f64> = gen::distribution(&mut rng, n, 0.0).iter().map(|x| x.max(1e-6)).collect();
    let t: f64 = rho2.iter().sum();
    let rho2: Vec<f64> = rho2.iter().map(|x| x / t).collect();
    let rho1 = if i == 0 { rho2.clone() } else { gen::distribution(&mut rng, n, 0.3) };
    let chi2: f64 = rho1.iter().zip(&rho2).map(|(p, q)| (p - q).powi(2) / q).sum();
    let r_star: Vec<f64> = rho1.iter().zip(&rho2).map(|(p, q)| 2.0 * (1.0 - p / q)).collect();
    let attained = objective(&rho1, &rho2, &r_star);
    let library = divergence(
        &Regularizer::Chi2 {
            delta: 1.0,
            reference: Some(rho2.clone()),
        },
        &rho1,
        &rho2,
    )?;
    let scale = r_star.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut best = f64::NEG_INFINITY;
    for k in 0..CANDIDATES {
        let r: Vec<f64> = if k % 2 == 0 {
            (0..n).map(|_| rng.random_range(-2.0 * scale..2.0 * scale)).collect()
        } else {
            let eps = 10f64.powf(rng.random_range(-6.0..0.0));
            r_star.iter().map(|x| x + eps * rng.random_range(-1.0..1.0)).collect()
        };
        best = best.max(objective(&rho1, &rho2, &r));
    }
    let excess = (best - chi2 - 1e-12).max(0.0);
    let violation = (attained - chi2).abs().max((library - chi2).abs()).max(excess);
    Ok(InstanceRecord::new(i)
        .violation(violation)
        .value("chi2", chi2)
        .value("attained", attained)
        .value("library", library)
        .value("best_random", best))
}
