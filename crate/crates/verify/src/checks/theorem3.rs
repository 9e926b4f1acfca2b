use clare_core::{optimal_occupancy, optimal_weights, target_interpolation, Dims, ErrorTable};
use rand::Rng;

use super::run;
use super::saddle::{evaluate, SaddleInstance};
use crate::error::Result;
use crate::gen;
use crate::oracle::lp::{conservative_objective, conservative_occupancy};
use crate::oracle::rollout::tv;
use crate::report::{InstanceRecord, VerificationReport};

const OBJECTIVE_TOL: f64 = 1e-8;
const IDENTITY_TOL: f64 = 1e-12;
const SADDLE_TOL: f64 = 1e-3;
/// Instances of the corollary that also get the min-max comparison.
const SADDLE_INSTANCES: usize = 20;

struct Case {
    dims: Dims,
    c: Vec<f64>,
    rho_e: Vec<f64>,
    rho_d: Vec<f64>,
}

/// Error tables mixing tied grid values and continuous values; data
/// occupancy covers the expert support and every minimal-error pair.
fn case<R: Rng>(rng: &mut R, i: usize, max_states: usize, max_actions: usize) -> Case {
    if i == 0 {
        return Case {
            dims: Dims::new(1, 2),
            c: vec![0.0, 3.0],
            rho_e: vec![0.6, 0.4],
            rho_d: vec![0.5, 0.5],
        };
    }
    let ns = rng.random_range(1..=max_states);
    let na = rng.random_range(1..=max_actions.min(12 / ns));
    let dims = Dims::new(ns, na);
    let k = dims.pairs();
    let c: Vec<f64> = match i {
        1 => vec![1.0; k],
        _ if i % 2 == 0 => (0..k).map(|_| 0.5 * rng.random_range(0..9) as f64).collect(),
        _ => (0..k).map(|_| rng.random_range(0.0..5.0)).collect(),
    };
    let c_min = c.iter().copied().fold(f64::INFINITY, f64::min);
    let mut rho_e = gen::distribution(rng, k, 0.3);
    if i == 2 {
        // all expert mass already on minimal pairs
        for (x, &ci) in rho_e.iter_mut().zip(&c) {
            if ci > c_min {
                *x = 0.0;
            }
        }
        let t: f64 = rho_e.iter().sum();
        if t > 0.0 {
            rho_e.iter_mut().for_each(|x| *x /= t);
        } else {
            let j = c.iter().position(|&x| x == c_min).unwrap();
            rho_e[j] = 1.0;
        }
    }
    // data includes the expert's, so it covers the expert support
    let other = gen::distribution(rng, k, 0.5);
    let share = rng.random_range(0.05..0.95);
    let mut rho_d: Vec<f64> = rho_e.iter().zip(&other).map(|(e, o)| share * e + (1.0 - share) * o).collect();
    for (x, &ci) in rho_d.iter_mut().zip(&c) {
        if ci == c_min && *x == 0.0 {
            *x = rng.random_range(0.01..0.3);
        }
    }
    let t: f64 = rho_d.iter().sum();
    rho_d.iter_mut().for_each(|x| *x /= t);
    Case { dims, c, rho_e, rho_d }
}

/// Whether the minimizer is unique: no pair sits exactly on the transfer
/// threshold and moved mass has a single destination.
fn unique(c: &[f64], rho_e: &[f64]) -> bool {
    let c_min = c.iter().copied().fold(f64::INFINITY, f64::min);
    let minimal = c.iter().filter(|&&x| x == c_min).count();
    let moves = c.iter().zip(rho_e).any(|(&ci, &e)| e > 0.0 && ci - c_min > 2.0);
    let boundary = c.iter().zip(rho_e).any(|(&ci, &e)| e > 0.0 && ci - c_min == 2.0);
    !boundary && (minimal == 1 || !moves)
}

/// `max |target(beta*) - rho*|` and the closed-form minimizer.
fn identity(case: &Case) -> clare_core::Result<(f64, Vec<f64>, f64)> {
    let errors = ErrorTable::new(case.dims, case.c.clone(), 0.9)?;
    let closed = optimal_occupancy(&errors, &case.rho_e, &vec![true; case.dims.pairs()])?;
    let weights = optimal_weights(&errors, &case.rho_e, &case.rho_d)?;
    weights.check_hypothesis(&case.rho_e, &case.rho_d)?;
    let target = target_interpolation(&case.rho_e, &case.rho_d, &weights)?;
    let gap = target.mass().iter().zip(closed.mass()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok((gap, closed.mass().to_vec(), weights.z_beta()))
}

/// Closed-form conservative occupancy against a simplex solve of the same
/// linear program, together with the weight identity.
///
/// Violation is the largest of: objective gap over 1e-8, solution TV over
/// 1e-8 when the minimizer is unique, and the weight identity gap over
/// 1e-12. The report tolerance is 1.
pub fn verify_theorem3(instances: usize, seed: u64) -> Result<VerificationReport> {
    run("theorem3", instances, 1.0, |i| {
        let mut rng = gen::instance_rng(seed, "theorem3", i);
        let case = case(&mut rng, i, 6, 4);
        let (id_gap, closed, _) = match identity(&case) {
            Ok(v) => v,
            Err(e) => return InstanceRecord::failure(i, e.to_string()),
        };
        let lp = match conservative_occupancy(&case.c, &case.rho_e) {
            Ok(v) => v,
            Err(e) => return InstanceRecord::failure(i, e.to_string()),
        };
        let f_closed = conservative_objective(&case.c, &case.rho_e, &closed);
        let f_lp = conservative_objective(&case.c, &case.rho_e, &lp);
        let obj_gap = (f_closed - f_lp).abs();
        let solution_tv = tv(&closed, &lp);
        let is_unique = unique(&case.c, &case.rho_e);
        let mut v = (obj_gap / OBJECTIVE_TOL).max(id_gap / IDENTITY_TOL);
        if is_unique {
            v = v.max(solution_tv / OBJECTIVE_TOL);
        }
        let rec = InstanceRecord::new(i)
            .violation(v)
            .value("objective_closed", f_closed)
            .value("objective_lp", f_lp)
            .value("objective_gap", obj_gap)
            .value("solution_tv", solution_tv)
            .value("identity_gap", id_gap);
        if is_unique {
            rec
        } else {
            rec.note("tied minimizers")
        }
    })
}

/// Weight identity on every instance and, on the first 20 (up to 3 states
/// and 2 actions), the min-max value with optimal weights against the
/// direct maximum toward the conservative occupancy.
///
/// Violation is the larger of the identity gap over 1e-12 and the value gap
/// over 1e-3. The report tolerance is 1.
pub fn verify_corollary1(instances: usize, seed: u64) -> Result<VerificationReport> {
    run("corollary1", instances, 1.0, |i| {
        let mut rng = gen::instance_rng(seed, "corollary1", i);
        let small = i < SADDLE_INSTANCES;
        let case = if small { case(&mut rng, i, 3, 2) } else { case(&mut rng, i, 6, 4) };
        let (id_gap, _, z) = match identity(&case) {
            Ok(v) => v,
            Err(e) => return InstanceRecord::failure(i, e.to_string()),
        };
        let mut rec = InstanceRecord::new(i).value("identity_gap", id_gap).value("z_beta", z);
        let mut v = id_gap / IDENTITY_TOL;
        if small {
            let gamma = rng.random_range(0.5..0.9);
            let sparsity = rng.random_range(0.0..0.5);
            let model = gen::mdp(&mut rng, case.dims, gamma, sparsity);
            let errors = ErrorTable::new(case.dims, case.c.clone(), 0.9).expect("checked above");
            let weights = optimal_weights(&errors, &case.rho_e, &case.rho_d).expect("checked above");
            let inst = SaddleInstance {
                model: &model,
                rho_e: &case.rho_e,
                rho_d: &case.rho_d,
                weights: &weights,
                alpha: rng.random_range(0.1..1.0),
                weight: rng.random_range(0.25..2.0),
            };
            match evaluate(&inst) {
                Ok(s) => {
                    let gap = (s.min_max - s.max_direct).abs();
                    v = v.max(gap / SADDLE_TOL);
                    rec = rec
                        .value("min_max", s.min_max)
                        .value("max_direct", s.max_direct)
                        .value("saddle_gap", gap)
                        .value("outer_iters", s.outer_iters as f64);
                }
                Err(e) => return InstanceRecord::failure(i, e),
            }
        }
        rec.violation(v)
    })
}
