//! Pairwise Frank-Wolfe over the occupancy polytope of a model.
//!
//! Maximizes `h(rho) = alpha H(rho) - Z D(rho, t)` where `H` is the causal
//! entropy and `D` a divergence to a target. Vertices are occupancies of
//! deterministic policies found by hard value iteration.

use clare_core::{Policy, TabularMdp};

use super::rollout;

/// Divergence term of the objective.
#[derive(Clone, Debug)]
pub enum Penalty {
    /// `sum (rho - t)^2 / (4 w)`.
    Quadratic { weight: f64 },
    /// `delta sum (rho - t)^2 / q`.
    Chi2 { delta: f64, reference: Vec<f64> },
}

impl Penalty {
    fn value(&self, rho: &[f64], t: &[f64]) -> f64 {
        match self {
            Penalty::Quadratic { weight } => {
                rho.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (4.0 * weight)
            }
            Penalty::Chi2 { delta, reference } => {
                delta
                    * rho
                        .iter()
                        .zip(t)
                        .zip(reference)
                        .map(|((a, b), q)| (a - b).powi(2) / q)
                        .sum::<f64>()
            }
        }
    }

    fn gradient(&self, rho: &[f64], t: &[f64]) -> Vec<f64> {
        match self {
            Penalty::Quadratic { weight } => rho.iter().zip(t).map(|(a, b)| (a - b) / (2.0 * weight)).collect(),
            Penalty::Chi2 { delta, reference } => rho
                .iter()
                .zip(t)
                .zip(reference)
                .map(|((a, b), q)| 2.0 * delta * (a - b) / q)
                .collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FwProblem<'a> {
    pub model: &'a TabularMdp<f64>,
    pub alpha: f64,
    pub z: f64,
    pub penalty: Penalty,
    pub target: &'a [f64],
}

#[derive(Clone, Debug)]
pub struct FwResult {
    pub rho: Vec<f64>,
    /// Objective at the final iterate.
    pub value: f64,
    /// Certified bound: value plus the linearization gap.
    pub upper: f64,
    pub iterations: usize,
}

impl FwProblem<'_> {
    pub fn objective(&self, rho: &[f64]) -> f64 {
        self.alpha * rollout::entropy(rho, self.model.num_actions()) - self.z * self.penalty.value(rho, self.target)
    }

    fn gradient(&self, rho: &[f64]) -> Vec<f64> {
        let na = self.model.num_actions();
        let pen = self.penalty.gradient(rho, self.target);
        let mut g = vec![0.0; rho.len()];
        for (s, row) in rho.chunks(na).enumerate() {
            let d: f64 = row.iter().sum();
            for (a, &x) in row.iter().enumerate() {
                let i = s * na + a;
                let ratio = if d > 0.0 { (x / d).max(1e-300) } else { 1.0 };
                g[i] = -self.alpha * ratio.ln() - self.z * pen[i];
            }
        }
        g
    }

    /// Best deterministic policy for the linear reward `g`, with the optimal
    /// normalized value `(1 - gamma) mu V`.
    fn linear_oracle(&self, g: &[f64]) -> (Vec<usize>, f64) {
        let m = self.model;
        let (ns, na) = (m.num_states(), m.num_actions());
        let gamma = m.discount();
        let mut v = vec![0.0; ns];
        let q = |v: &[f64], s: usize, a: usize| {
            g[s * na + a] + gamma * m.transition_row(s, a).iter().zip(v).map(|(t, x)| t * x).sum::<f64>()
        };
        let scale = g.iter().fold(1.0f64, |acc, x| acc.max(x.abs())) / (1.0 - gamma);
        for _ in 0..100_000 {
            let mut delta = 0.0f64;
            let next: Vec<f64> = (0..ns)
                .map(|s| (0..na).map(|a| q(&v, s, a)).fold(f64::NEG_INFINITY, f64::max))
                .collect();
            for (x, y) in v.iter().zip(&next) {
                delta = delta.max((x - y).abs());
            }
            v = next;
            if delta <= 1e-15 * scale {
                break;
            }
        }
        let actions = (0..ns)
            .map(|s| {
                let mut best = 0;
                for a in 1..na {
                    if q(&v, s, a) > q(&v, s, best) {
                        best = a;
                    }
                }
                best
            })
            .collect();
        let value = (1.0 - gamma) * m.initial().iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        (actions, value)
    }

    fn vertex(&self, actions: &[usize]) -> Vec<f64> {
        let pi = Policy::deterministic(self.model.dims(), actions).expect("actions in range");
        rollout::occupancy(self.model, &pi)
    }

    /// Runs until the linearization gap is below `gap_tol` or `max_iters`.
    pub fn solve(&self, max_iters: usize, gap_tol: f64) -> FwResult {
        let (ns, na) = (self.model.num_states(), self.model.num_actions());
        let mut active: Vec<(Vec<usize>, Vec<f64>, f64)> = Vec::new();
        let count = na.checked_pow(ns as u32).filter(|&c| c <= 256);
        match count {
            Some(c) => {
                // every vertex with equal weight puts mass on all reachable pairs
                for k in 0..c {
                    let mut rest = k;
                    let actions: Vec<usize> = (0..ns)
                        .map(|_| {
                            let a = rest % na;
                            rest /= na;
                            a
                        })
                        .collect();
                    let occ = self.vertex(&actions);
                    active.push((actions, occ, 1.0 / c as f64));
                }
            }
            None => {
                let (actions, _) = self.linear_oracle(&vec![0.0; ns * na]);
                let occ = self.vertex(&actions);
                active.push((actions, occ, 1.0));
            }
        }
        let combine = |active: &[(Vec<usize>, Vec<f64>, f64)]| {
            let mut rho = vec![0.0; ns * na];
            for (_, occ, w) in active {
                for (r, o) in rho.iter_mut().zip(occ) {
                    *r += w * o;
                }
            }
            rho
        };
        let mut rho = combine(&active);
        let mut upper = f64::INFINITY;
        let mut iterations = 0;
        while iterations < max_iters {
            iterations += 1;
            let g = self.gradient(&rho);
            let dot = |x: &[f64]| x.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
            let (actions, best) = self.linear_oracle(&g);
            let gap = (best - dot(&rho)).max(0.0);
            upper = upper.min(self.objective(&rho) + gap);
            if gap <= gap_tol {
                break;
            }
            let fw = match active.iter().position(|(a, _, _)| *a == actions) {
                Some(i) => i,
                None => {
                    let occ = self.vertex(&actions);
                    active.push((actions, occ, 0.0));
                    active.len() - 1
                }
            };
            let away = (0..active.len())
                .filter(|&i| active[i].2 > 0.0)
                .min_by(|&i, &j| dot(&active[i].1).total_cmp(&dot(&active[j].1)))
                .expect("active set is nonempty");
            if away == fw {
                break;
            }
            let dir: Vec<f64> = active[fw].1.iter().zip(&active[away].1).map(|(a, b)| a - b).collect();
            let max_step = active[away].2;
            let slope = |t: f64| {
                let p: Vec<f64> = rho.iter().zip(&dir).map(|(r, d)| r + t * d).collect();
                self.gradient(&p).iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>()
            };
            let step = if slope(max_step) >= 0.0 {
                max_step
            } else {
                let (mut lo, mut hi) = (0.0, max_step);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if slope(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            };
            active[fw].2 += step;
            active[away].2 -= step;
            if active[away].2 <= 0.0 || step == max_step {
                active[away].2 = 0.0;
            }
            active.retain(|(_, _, w)| *w > 0.0);
            rho = combine(&active);
        }
        let value = self.objective(&rho);
        FwResult {
            rho,
            value,
            upper: upper.max(value),
            iterations,
        }
    }
}

/// Closed-form maximizer on a single state, where the polytope is the
/// action simplex and the stationarity conditions reduce to one multiplier.
pub fn single_state_optimum(alpha: f64, z: f64, weight: f64, target: &[f64]) -> Vec<f64> {
    // -alpha (log p + 1) - z (p - t) / (2w) = nu, solved per action for p(nu)
    let k = z / (2.0 * weight);
    let p_of = |nu: f64, t: f64| {
        let f = |p: f64| -alpha * (p.ln() + 1.0) - k * (p - t) - nu;
        let (mut lo, mut hi) = (1e-300f64, 1.0f64);
        if f(hi) >= 0.0 {
            return hi;
        }
        for _ in 0..400 {
            let mid = if hi > 4.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let total = |nu: f64| target.iter().map(|&t| p_of(nu, t)).sum::<f64>();
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while total(lo) < 1.0 {
        lo *= 2.0;
    }
    while total(hi) > 1.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nu = 0.5 * (lo + hi);
    target.iter().map(|&t| p_of(nu, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use clare_core::Dims;

    fn bandit(na: usize) -> TabularMdp<f64> {
        TabularMdp::new(Dims::new(1, na), vec![1.0; na], vec![0.0; na], vec![1.0], 0.9).unwrap()
    }

    #[test]
    fn uniform_target_gives_uniform_policy() {
        let m = bandit(3);
        let t = vec![1.0 / 3.0; 3];
        let p = FwProblem { model: &m, alpha: 0.5, z: 1.0, penalty: Penalty::Quadratic { weight: 1.0 }, target: &t };
        let r = p.solve(2000, 1e-12);
        assert!((r.value - 0.5 * 3f64.ln()).abs() < 1e-9);
        assert!(r.upper - r.value < 1e-9);
    }

    #[test]
    fn matches_single_state_closed_form() {
        let m = bandit(3);
        let t = vec![0.7, 0.2, 0.1];
        let p = FwProblem { model: &m, alpha: 0.05, z: 1.3, penalty: Penalty::Quadratic { weight: 0.1 }, target: &t };
        let r = p.solve(5000, 1e-13);
        let exact = single_state_optimum(0.05, 1.3, 0.1, &t);
        assert!(rollout::tv(&r.rho, &exact) < 1e-6, "{:?} {:?}", r.rho, exact);
        assert!((r.value - p.objective(&exact)).abs() < 1e-9);
    }
}
