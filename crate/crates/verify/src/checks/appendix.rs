use rand::Rng;

use super::run;
use crate::error::Result;
use crate::gen;
use crate::oracle::rollout::tv;
use crate::report::{InstanceRecord, VerificationReport};

const TOL: f64 = 1e-10;
const MAX_HORIZON: usize = 10;

/// Total-variation bounds for joint distributions and for the marginals of
/// two Markov chains sharing a start distribution.
///
/// Instance `i` checks a random joint pair and, for `i < 2 instances / 5`,
/// also a random chain pair over horizons 1 to 10 (500 instances give 500
/// joints and 200 chains). Violation is `max(0, lhs - rhs)`.
pub fn verify_appendix_lemmas(instances: usize, seed: u64) -> Result<VerificationReport> {
    let chains = (2 * instances).div_ceil(5);
    run("appendix_lemmas", instances, TOL, |i| {
        let mut rng = gen::instance_rng(seed, "appendix_lemmas", i);
        let (joint_slack, identical) = joint(&mut rng, i == 0);
        let mut rec = InstanceRecord::new(i).value("joint_slack", joint_slack);
        let mut worst = -joint_slack;
        if i < chains {
            let chain_slack = markov(&mut rng, i == 1);
            rec = rec.value("chain_slack", chain_slack);
            worst = worst.max(-chain_slack);
            if i == 1 {
                rec = rec.note("deterministic chains differing at one state");
            }
        }
        if identical {
            rec = rec.note("identical marginals and conditionals");
        }
        rec.violation(worst.max(0.0))
    })
}

/// Returns `rhs - lhs` for the joint bound.
fn joint<R: Rng>(rng: &mut R, identical: bool) -> (f64, bool) {
    let nx = rng.random_range(1..=6);
    let ny = rng.random_range(1..=6);
    let sparsity = rng.random_range(0.0..0.5);
    let q1 = gen::distribution(rng, nx, sparsity);
    let c1: Vec<Vec<f64>> = (0..nx).map(|_| gen::distribution(rng, ny, sparsity)).collect();
    let (q2, c2) = if identical {
        (q1.clone(), c1.clone())
    } else {
        (
            gen::distribution(rng, nx, sparsity),
            (0..nx).map(|_| gen::distribution(rng, ny, sparsity)).collect(),
        )
    };
    let flat = |q: &[f64], c: &[Vec<f64>]| -> Vec<f64> {
        q.iter().zip(c).flat_map(|(qx, row)| row.iter().map(move |y| qx * y)).collect()
    };
    let lhs = tv(&flat(&q1, &c1), &flat(&q2, &c2));
    let rhs = q1.iter().zip(c1.iter().zip(&c2)).map(|(qx, (a, b))| qx * tv(a, b)).sum::<f64>() + tv(&q1, &q2);
    (rhs - lhs, identical)
}

/// Smallest `rhs - lhs` of the chain bound over horizons 1..=10.
fn markov<R: Rng>(rng: &mut R, one_state_apart: bool) -> f64 {
    let n = rng.random_range(1..=6);
    let sparsity = rng.random_range(0.0..0.7);
    let (t1, t2) = if one_state_apart {
        let det = |rng: &mut R| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| {
                    let mut row = vec![0.0; n];
                    row[rng.random_range(0..n)] = 1.0;
                    row
                })
                .collect()
        };
        let t1 = det(rng);
        let mut t2 = t1.clone();
        let s = rng.random_range(0..n);
        t2[s] = vec![0.0; n];
        t2[s][(t1[s].iter().position(|&x| x == 1.0).unwrap() + 1) % n] = 1.0;
        (t1, t2)
    } else {
        (
            (0..n).map(|_| gen::distribution(rng, n, sparsity)).collect::<Vec<_>>(),
            (0..n).map(|_| gen::distribution(rng, n, sparsity)).collect::<Vec<_>>(),
        )
    };
    let step = |p: &[f64], t: &[Vec<f64>]| -> Vec<f64> {
        let mut next = vec![0.0; n];
        for (ps, row) in p.iter().zip(t) {
            for (x, y) in next.iter_mut().zip(row) {
                *x += ps * y;
            }
        }
        next
    };
    let row_tv: Vec<f64> = t1.iter().zip(&t2).map(|(a, b)| tv(a, b)).collect();
    let mu = gen::distribution(rng, n, 0.0);
    let (mut p1, mut p2) = (mu.clone(), mu);
    let mut bound = 0.0;
    let mut slack = f64::INFINITY;
    for _ in 0..MAX_HORIZON {
        // the sum runs over marginals of the second chain before each step
        bound += p2.iter().zip(&row_tv).map(|(p, d)| p * d).sum::<f64>();
        p1 = step(&p1, &t1);
        p2 = step(&p2, &t2);
        slack = slack.min(bound - tv(&p1, &p2));
    }
    slack
}
