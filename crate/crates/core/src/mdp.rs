//! Finite-MDP primitives: environments, policies, normalized occupancy
//! measures, causal entropy, returns and the Bellman-flow constraints.
//!
//! Occupancies are normalized: `rho(s, a) = (1 - gamma) * sum_h gamma^h
//! Pr(s_h = s) * pi(a | s)`, so every occupancy sums to one and the flow
//! constraint carries a `(1 - gamma) * mu(s)` source term.

use serde::{Deserialize, Serialize};

use crate::error::{ClareError, Result};
use crate::linalg::solve_dense;
use crate::scalar::{dot, xlogx, Scalar};

/// Sizes of the state and action spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub num_states: usize,
    pub num_actions: usize,
}

impl Dims {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
        }
    }

    /// Number of state-action pairs.
    #[inline]
    pub fn pairs(&self) -> usize {
        self.num_states * self.num_actions
    }

    /// Row-major index of the pair `(s, a)`.
    #[inline]
    pub fn index(&self, state: usize, action: usize) -> usize {
        state * self.num_actions + action
    }

    #[inline]
    pub fn pair(&self, index: usize) -> (usize, usize) {
        (index / self.num_actions, index % self.num_actions)
    }

    pub(crate) fn check_nonempty(&self) -> Result<()> {
        if self.num_states == 0 || self.num_actions == 0 {
            return Err(ClareError::InvalidParameter(format!(
                "need at least one state and one action, got {}x{}",
                self.num_states, self.num_actions
            )));
        }
        Ok(())
    }

    pub(crate) fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.pairs() {
            return Err(ClareError::DimensionMismatch(format!(
                "{what} has {len} entries, expected {}",
                self.pairs()
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_same_dims(a: Dims, b: Dims) -> Result<()> {
    if a != b {
        return Err(ClareError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.num_states, a.num_actions, b.num_states, b.num_actions
        )));
    }
    Ok(())
}

/// Checks that `v` is a probability vector within `tol`.
pub(crate) fn check_distribution<T: Scalar>(what: &str, v: &[T], tol: T) -> Result<()> {
    if let Some(x) = v.iter().find(|x| !x.is_finite() || **x < T::zero()) {
        return Err(ClareError::InvalidDistribution(format!(
            "{what} has a negative or non-finite entry {x}"
        )));
    }
    let total: T = v.iter().copied().sum();
    if (total - T::one()).abs() > tol {
        return Err(ClareError::InvalidDistribution(format!(
            "{what} sums to {total}"
        )));
    }
    Ok(())
}

pub(crate) fn nest<T: Copy>(flat: &[T], width: usize) -> Vec<Vec<T>> {
    flat.chunks(width.max(1)).map(|c| c.to_vec()).collect()
}

pub(crate) fn flatten_table<T: Copy>(what: &str, rows: &[Vec<T>], width: usize) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(rows.len() * width);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(ClareError::DimensionMismatch(format!(
                "{what} row {i} has {} entries, expected {width}",
                row.len()
            )));
        }
        out.extend_from_slice(row);
    }
    Ok(out)
}

/// A finite discounted MDP `<S, A, T, R, mu, gamma>` with dense tables.
///
/// `transition` is stored as `T[s][a][s']` flattened row-major, `reward` as
/// `R[s][a]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "MdpWire<T>",
    into = "MdpWire<T>",
    bound = "T: Scalar"
)]
pub struct TabularMdp<T: Scalar> {
    dims: Dims,
    transition: Vec<T>,
    reward: Vec<T>,
    initial: Vec<T>,
    discount: T,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct MdpWire<T: Scalar> {
    num_states: usize,
    num_actions: usize,
    transition: Vec<Vec<Vec<T>>>,
    reward: Vec<Vec<T>>,
    initial: Vec<T>,
    discount: T,
}

impl<T: Scalar> TryFrom<MdpWire<T>> for TabularMdp<T> {
    type Error = ClareError;

    fn try_from(w: MdpWire<T>) -> Result<Self> {
        let dims = Dims::new(w.num_states, w.num_actions);
        if w.transition.len() != dims.num_states || w.reward.len() != dims.num_states {
            return Err(ClareError::DimensionMismatch(
                "transition/reward must have one entry per state".into(),
            ));
        }
        let mut transition = Vec::with_capacity(dims.pairs() * dims.num_states);
        for rows in &w.transition {
            transition.extend(flatten_table("transition", rows, dims.num_states)?);
        }
        let reward = flatten_table("reward", &w.reward, dims.num_actions)?;
        TabularMdp::new(dims, transition, reward, w.initial, w.discount)
    }
}

impl<T: Scalar> From<TabularMdp<T>> for MdpWire<T> {
    fn from(m: TabularMdp<T>) -> Self {
        let ns = m.dims.num_states;
        let transition = m
            .transition
            .chunks(m.dims.num_actions * ns)
            .map(|block| nest(block, ns))
            .collect();
        MdpWire {
            num_states: ns,
            num_actions: m.dims.num_actions,
            transition,
            reward: nest(&m.reward, m.dims.num_actions),
            initial: m.initial,
            discount: m.discount,
        }
    }
}

impl<T: Scalar> TabularMdp<T> {
    /// Builds a validated MDP.
    pub fn new(
        dims: Dims,
        transition: Vec<T>,
        reward: Vec<T>,
        initial: Vec<T>,
        discount: T,
    ) -> Result<Self> {
        dims.check_nonempty()?;
        let ns = dims.num_states;
        if transition.len() != dims.pairs() * ns {
            return Err(ClareError::DimensionMismatch(format!(
                "transition has {} entries, expected {}",
                transition.len(),
                dims.pairs() * ns
            )));
        }
        dims.check_len("reward", reward.len())?;
        if initial.len() != ns {
            return Err(ClareError::DimensionMismatch(format!(
                "initial distribution has {} entries, expected {ns}",
                initial.len()
            )));
        }
        if !(discount > T::zero() && discount < T::one()) {
            return Err(ClareError::InvalidParameter(format!(
                "discount must lie in (0, 1), got {discount}"
            )));
        }
        let tol = T::tol(1e-12);
        for (idx, row) in transition.chunks(ns).enumerate() {
            let (s, a) = dims.pair(idx);
            check_distribution(&format!("T(.|{s},{a})"), row, tol)?;
        }
        check_distribution("initial distribution", &initial, tol)?;
        if let Some(r) = reward.iter().find(|r| !r.is_finite()) {
            return Err(ClareError::InvalidParameter(format!(
                "reward contains non-finite value {r}"
            )));
        }
        Ok(Self {
            dims,
            transition,
            reward,
            initial,
            discount,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn num_states(&self) -> usize {
        self.dims.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.dims.num_actions
    }

    pub fn discount(&self) -> T {
        self.discount
    }

    pub fn initial(&self) -> &[T] {
        &self.initial
    }

    /// Reward table `R[s][a]`, row-major.
    pub fn reward(&self) -> &[T] {
        &self.reward
    }

    /// Flattened `T[s][a][s']`.
    pub fn transitions(&self) -> &[T] {
        &self.transition
    }

    /// Next-state distribution `T(. | s, a)`.
    #[inline]
    pub fn transition_row(&self, state: usize, action: usize) -> &[T] {
        let ns = self.dims.num_states;
        let start = self.dims.index(state, action) * ns;
        &self.transition[start..start + ns]
    }

    /// Same dynamics and discount with a different reward table.
    pub fn with_reward(&self, reward: Vec<T>) -> Result<Self> {
        Self::new(
            self.dims,
            self.transition.clone(),
            reward,
            self.initial.clone(),
            self.discount,
        )
    }

    /// Same dynamics and reward with a different initial distribution.
    pub fn with_initial(&self, initial: Vec<T>) -> Result<Self> {
        Self::new(
            self.dims,
            self.transition.clone(),
            self.reward.clone(),
            initial,
            self.discount,
        )
    }

    /// Largest absolute reward.
    pub fn reward_bound(&self) -> T {
        self.reward.iter().fold(T::zero(), |m, r| m.max(r.abs()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// A stationary stochastic policy `pi(a | s)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolicyWire<T>", into = "PolicyWire<T>", bound = "T: Scalar")]
pub struct Policy<T: Scalar> {
    dims: Dims,
    probs: Vec<T>,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct PolicyWire<T: Scalar> {
    num_states: usize,
    num_actions: usize,
    probs: Vec<Vec<T>>,
}

impl<T: Scalar> TryFrom<PolicyWire<T>> for Policy<T> {
    type Error = ClareError;

    fn try_from(w: PolicyWire<T>) -> Result<Self> {
        let dims = Dims::new(w.num_states, w.num_actions);
        if w.probs.len() != dims.num_states {
            return Err(ClareError::DimensionMismatch(
                "policy must have one row per state".into(),
            ));
        }
        Policy::new(dims, flatten_table("policy", &w.probs, dims.num_actions)?)
    }
}

impl<T: Scalar> From<Policy<T>> for PolicyWire<T> {
    fn from(p: Policy<T>) -> Self {
        PolicyWire {
            num_states: p.dims.num_states,
            num_actions: p.dims.num_actions,
            probs: nest(&p.probs, p.dims.num_actions),
        }
    }
}

impl<T: Scalar> Policy<T> {
    pub fn new(dims: Dims, probs: Vec<T>) -> Result<Self> {
        dims.check_nonempty()?;
        dims.check_len("policy", probs.len())?;
        let tol = T::tol(1e-12);
        for (s, row) in probs.chunks(dims.num_actions).enumerate() {
            check_distribution(&format!("pi(.|{s})"), row, tol)?;
        }
        Ok(Self { dims, probs })
    }

    pub fn uniform(dims: Dims) -> Self {
        let p = T::one() / T::from_usize(dims.num_actions).unwrap();
        Self {
            dims,
            probs: vec![p; dims.pairs()],
        }
    }

    /// Deterministic policy choosing `actions[s]` in state `s`.
    pub fn deterministic(dims: Dims, actions: &[usize]) -> Result<Self> {
        if actions.len() != dims.num_states {
            return Err(ClareError::DimensionMismatch(format!(
                "{} actions for {} states",
                actions.len(),
                dims.num_states
            )));
        }
        let mut probs = vec![T::zero(); dims.pairs()];
        for (s, &a) in actions.iter().enumerate() {
            if a >= dims.num_actions {
                return Err(ClareError::IndexOutOfRange(format!("action {a} in state {s}")));
            }
            probs[dims.index(s, a)] = T::one();
        }
        Ok(Self { dims, probs })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn prob(&self, state: usize, action: usize) -> T {
        self.probs[self.dims.index(state, action)]
    }

    #[inline]
    pub fn row(&self, state: usize) -> &[T] {
        let na = self.dims.num_actions;
        &self.probs[state * na..(state + 1) * na]
    }

    /// Row-major `pi[s][a]`.
    pub fn table(&self) -> &[T] {
        &self.probs
    }

    /// Most likely action in each state; ties go to the lowest index.
    pub fn greedy_actions(&self) -> Vec<usize> {
        (0..self.dims.num_states)
            .map(|s| argmax(self.row(s)))
            .collect()
    }

    /// Largest per-state sup-norm difference against another policy.
    pub fn max_abs_diff(&self, other: &Policy<T>) -> T {
        self.probs
            .iter()
            .zip(&other.probs)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }
}

pub(crate) fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Normalized state-action occupancy measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct OccupancyMeasure<T: Scalar> {
    dims: Dims,
    mass: Vec<T>,
}

impl<T: Scalar> OccupancyMeasure<T> {
    /// Validates nonnegativity and unit mass (within `1e-10`).
    pub fn new(dims: Dims, mass: Vec<T>) -> Result<Self> {
        dims.check_nonempty()?;
        dims.check_len("occupancy", mass.len())?;
        check_distribution("occupancy", &mass, T::tol(1e-10))?;
        Ok(Self { dims, mass })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn get(&self, state: usize, action: usize) -> T {
        self.mass[self.dims.index(state, action)]
    }

    /// Row-major `rho[s][a]`.
    pub fn mass(&self) -> &[T] {
        &self.mass
    }

    /// `sum_a rho(s, a)` for every state.
    pub fn state_marginal(&self) -> Vec<T> {
        self.mass
            .chunks(self.dims.num_actions)
            .map(|row| row.iter().copied().sum())
            .collect()
    }

    /// Convex combination `t * self + (1 - t) * other`.
    pub fn mix(&self, other: &Self, t: T) -> Result<Self> {
        check_same_dims(self.dims, other.dims)?;
        let mass = self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(&a, &b)| t * a + (T::one() - t) * b)
            .collect();
        Self::new(self.dims, mass)
    }
}

/// Discounted state visitation `d(s) = sum_a rho(s, a)` of `policy`,
/// obtained from `(I - gamma P_pi^T) d = (1 - gamma) mu`.
pub fn state_visitation<T: Scalar>(mdp: &TabularMdp<T>, policy: &Policy<T>) -> Result<Vec<T>> {
    check_same_dims(mdp.dims(), policy.dims())?;
    let ns = mdp.num_states();
    let gamma = mdp.discount();
    let p = state_transition_matrix(mdp, policy);
    // a[s'][s] = delta - gamma * P[s][s']
    let mut a = vec![T::zero(); ns * ns];
    for s in 0..ns {
        for s2 in 0..ns {
            a[s2 * ns + s] = -gamma * p[s * ns + s2];
        }
    }
    for s in 0..ns {
        a[s * ns + s] = a[s * ns + s] + T::one();
    }
    let b: Vec<T> = mdp
        .initial()
        .iter()
        .map(|&m| (T::one() - gamma) * m)
        .collect();
    solve_dense(a, b, ns)
}

/// `P_pi[s][s'] = sum_a pi(a|s) T(s'|s,a)`, row-major.
pub fn state_transition_matrix<T: Scalar>(mdp: &TabularMdp<T>, policy: &Policy<T>) -> Vec<T> {
    let ns = mdp.num_states();
    let mut p = vec![T::zero(); ns * ns];
    for s in 0..ns {
        let row = &mut p[s * ns..(s + 1) * ns];
        for (a, &pa) in policy.row(s).iter().enumerate() {
            if pa == T::zero() {
                continue;
            }
            for (dst, &t) in row.iter_mut().zip(mdp.transition_row(s, a)) {
                *dst = *dst + pa * t;
            }
        }
    }
    p
}

fn occupancy_from_visitation<T: Scalar>(policy: &Policy<T>, d: &[T]) -> Vec<T> {
    let dims = policy.dims();
    let mut mass = Vec::with_capacity(dims.pairs());
    for (s, &ds) in d.iter().enumerate() {
        let ds = ds.max(T::zero());
        mass.extend(policy.row(s).iter().map(|&p| ds * p));
    }
    mass
}

/// Occupancy measure of `policy` under `mdp`.
///
/// Solves the state-visitation system by LU; when the flow residual of the
/// result exceeds `tol` a fixed-point iteration on the flow equation is run
/// from the LU solution as a backstop.
pub fn occupancy_of_policy<T: Scalar>(
    mdp: &TabularMdp<T>,
    policy: &Policy<T>,
    tol: T,
) -> Result<OccupancyMeasure<T>> {
    if tol <= T::zero() {
        return Err(ClareError::InvalidParameter("tolerance must be positive".into()));
    }
    let dims = mdp.dims();
    let mut d = match state_visitation(mdp, policy) {
        Ok(d) => d,
        Err(ClareError::Singular(_)) => mdp
            .initial()
            .to_vec(),
        Err(e) => return Err(e),
    };
    let mut mass = occupancy_from_visitation(policy, &d);
    let occ = OccupancyMeasure { dims, mass: mass.clone() };
    let mut residual = bellman_flow_residual(mdp, &occ)?;
    if residual > tol {
        let gamma = mdp.discount();
        let p = state_transition_matrix(mdp, policy);
        let ns = mdp.num_states();
        let max_iters = 200_000;
        for _ in 0..max_iters {
            let mut next: Vec<T> = mdp
                .initial()
                .iter()
                .map(|&m| (T::one() - gamma) * m)
                .collect();
            for s in 0..ns {
                let ds = gamma * d[s];
                for (s2, n) in next.iter_mut().enumerate() {
                    *n = *n + ds * p[s * ns + s2];
                }
            }
            let change = next
                .iter()
                .zip(&d)
                .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
            d = next;
            if change <= tol * (T::one() - gamma) * T::lit(0.5) {
                break;
            }
        }
        mass = occupancy_from_visitation(policy, &d);
        residual = bellman_flow_residual(mdp, &OccupancyMeasure { dims, mass: mass.clone() })?;
        if residual > tol {
            return Err(ClareError::NotConverged {
                what: "occupancy fixed-point iteration",
                iters: max_iters,
                residual: residual.to_f64_lossy(),
            });
        }
    }
    OccupancyMeasure::new(dims, mass)
}

/// Policy `pi_rho(a|s) = rho(s,a) / sum_a' rho(s,a')`; states with zero
/// visitation get a uniform row.
pub fn policy_of_occupancy<T: Scalar>(occ: &OccupancyMeasure<T>) -> Policy<T> {
    let dims = occ.dims();
    let na = dims.num_actions;
    let uniform = T::one() / T::from_usize(na).unwrap();
    let mut probs = Vec::with_capacity(dims.pairs());
    for row in occ.mass().chunks(na) {
        let total: T = row.iter().copied().sum();
        if total > T::zero() {
            probs.extend(row.iter().map(|&x| x / total));
        } else {
            probs.extend(std::iter::repeat(uniform).take(na));
        }
    }
    Policy { dims, probs }
}

/// Causal entropy `-sum rho(s,a) log(rho(s,a) / sum_a' rho(s,a'))`.
pub fn causal_entropy<T: Scalar>(occ: &OccupancyMeasure<T>) -> T {
    causal_entropy_of_mass(occ.mass(), occ.dims().num_actions)
}

pub(crate) fn causal_entropy_of_mass<T: Scalar>(mass: &[T], num_actions: usize) -> T {
    let mut h = T::zero();
    for row in mass.chunks(num_actions) {
        let total: T = row.iter().copied().sum();
        // -sum x log(x/m) = m log m - sum x log x
        h = h + xlogx(total) - row.iter().map(|&x| xlogx(x)).sum::<T>();
    }
    h
}

/// Normalized return `J(pi) = E_{rho^pi}[R]`.
pub fn expected_return<T: Scalar>(mdp: &TabularMdp<T>, policy: &Policy<T>) -> Result<T> {
    let occ = occupancy_of_policy(mdp, policy, T::tol(1e-10))?;
    Ok(dot(occ.mass(), mdp.reward()))
}

/// Total variation distance `1/2 sum |p - q|`.
pub fn tv_distance<T: Scalar>(p: &[T], q: &[T]) -> Result<T> {
    if p.len() != q.len() {
        return Err(ClareError::DimensionMismatch(format!(
            "distributions of length {} and {}",
            p.len(),
            q.len()
        )));
    }
    let half = T::lit(0.5);
    Ok(half * p.iter().zip(q).map(|(&a, &b)| (a - b).abs()).sum::<T>())
}

/// Largest per-state violation of the normalized Bellman-flow constraints
/// `sum_a rho(s,a) = (1-gamma) mu(s) + gamma sum_{s',a} T(s|s',a) rho(s',a)`.
pub fn bellman_flow_residual<T: Scalar>(mdp: &TabularMdp<T>, occ: &OccupancyMeasure<T>) -> Result<T> {
    check_same_dims(mdp.dims(), occ.dims())?;
    flow_residual_of_mass(mdp, occ.mass())
}

pub(crate) fn flow_residual_of_mass<T: Scalar>(mdp: &TabularMdp<T>, mass: &[T]) -> Result<T> {
    let dims = mdp.dims();
    dims.check_len("occupancy", mass.len())?;
    let gamma = mdp.discount();
    let mut inflow: Vec<T> = mdp
        .initial()
        .iter()
        .map(|&m| (T::one() - gamma) * m)
        .collect();
    for s in 0..dims.num_states {
        for a in 0..dims.num_actions {
            let r = mass[dims.index(s, a)];
            if r == T::zero() {
                continue;
            }
            for (dst, &t) in inflow.iter_mut().zip(mdp.transition_row(s, a)) {
                *dst = *dst + gamma * t * r;
            }
        }
    }
    Ok(mass
        .chunks(dims.num_actions)
        .zip(&inflow)
        .fold(T::zero(), |m, (row, &inf)| {
            m.max((row.iter().copied().sum::<T>() - inf).abs())
        }))
}

/// Optimal deterministic policy for the MDP's own reward, by value iteration
/// followed by exact policy-iteration polishing. Ties go to the lowest action.
pub fn optimal_policy<T: Scalar>(mdp: &TabularMdp<T>) -> Result<Policy<T>> {
    let dims = mdp.dims();
    let gamma = mdp.discount();
    let mut v = vec![T::zero(); dims.num_states];
    let q_of = |v: &[T], s: usize, a: usize| {
        mdp.reward()[dims.index(s, a)] + gamma * dot(mdp.transition_row(s, a), v)
    };
    let tol = T::tol(1e-12);
    for _ in 0..100_000 {
        let mut change = T::zero();
        let next: Vec<T> = (0..dims.num_states)
            .map(|s| {
                (0..dims.num_actions)
                    .map(|a| q_of(&v, s, a))
                    .fold(T::neg_infinity(), T::max)
            })
            .collect();
        for (a, b) in next.iter().zip(&v) {
            change = change.max((*a - *b).abs());
        }
        v = next;
        if change <= tol {
            break;
        }
    }
    let greedy = |v: &[T]| -> Vec<usize> {
        (0..dims.num_states)
            .map(|s| {
                let q: Vec<T> = (0..dims.num_actions).map(|a| q_of(v, s, a)).collect();
                let best = q.iter().copied().fold(T::neg_infinity(), T::max);
                // first action within rounding of the maximum
                q.iter()
                    .position(|&x| x >= best - T::tol(1e-12) * (T::one() + best.abs()))
                    .unwrap_or(0)
            })
            .collect()
    };
    let mut actions = greedy(&v);
    for _ in 0..1000 {
        let policy = Policy::deterministic(dims, &actions)?;
        // Policy evaluation: v = R_pi + gamma P_pi v.
        let ns = dims.num_states;
        let p = state_transition_matrix(mdp, &policy);
        let mut a = vec![T::zero(); ns * ns];
        let mut b = vec![T::zero(); ns];
        for s in 0..ns {
            for s2 in 0..ns {
                a[s * ns + s2] = -gamma * p[s * ns + s2];
            }
            a[s * ns + s] = a[s * ns + s] + T::one();
            b[s] = mdp.reward()[dims.index(s, actions[s])];
        }
        let values = solve_dense(a, b, ns)?;
        let next = greedy(&values);
        if next == actions {
            return Ok(policy);
        }
        actions = next;
    }
    Policy::deterministic(dims, &actions)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two states, action `a` moves deterministically to state `a`.
    pub(crate) fn chain(gamma: f64) -> TabularMdp<f64> {
        let dims = Dims::new(2, 2);
        let transition = vec![
            1.0, 0.0, 0.0, 1.0, // from 0
            1.0, 0.0, 0.0, 1.0, // from 1
        ];
        let reward = vec![0.0, 1.0, 0.0, 1.0];
        TabularMdp::new(dims, transition, reward, vec![1.0, 0.0], gamma).unwrap()
    }

    fn single() -> TabularMdp<f64> {
        TabularMdp::new(Dims::new(1, 1), vec![1.0], vec![0.5], vec![1.0], 0.9).unwrap()
    }

    /// Truncated-rollout oracle: propagate the state distribution for `h`
    /// steps and bound the tail by gamma^h.
    fn rollout_occupancy(mdp: &TabularMdp<f64>, pi: &Policy<f64>, h: usize) -> (Vec<f64>, f64) {
        let dims = mdp.dims();
        let g = mdp.discount();
        let mut p = mdp.initial().to_vec();
        let mut rho = vec![0.0; dims.pairs()];
        let mut w = 1.0 - g;
        for _ in 0..h {
            let mut next = vec![0.0; dims.num_states];
            for s in 0..dims.num_states {
                for a in 0..dims.num_actions {
                    let m = p[s] * pi.prob(s, a);
                    rho[dims.index(s, a)] += w * m;
                    for (s2, t) in mdp.transition_row(s, a).iter().enumerate() {
                        next[s2] += m * t;
                    }
                }
            }
            p = next;
            w *= g;
        }
        (rho, g.powi(h as i32))
    }

    #[test]
    fn chain_occupancy_matches_rollout_oracle() {
        let mdp = chain(0.5);
        let pi = Policy::deterministic(mdp.dims(), &[1, 1]).unwrap();
        let (oracle, tail) = rollout_occupancy(&mdp, &pi, 64);
        assert!(tail < 1e-18);
        // frozen from the oracle: rho(0,1) = 0.5, rho(1,1) = 0.5
        assert!((oracle[1] - 0.5).abs() < 1e-15 && (oracle[3] - 0.5).abs() < 1e-15);
        let occ = occupancy_of_policy(&mdp, &pi, 1e-12).unwrap();
        assert_eq!(occ.mass().len(), 4);
        assert!((occ.get(0, 1) - 0.5).abs() < 1e-14);
        assert!((occ.get(1, 1) - 0.5).abs() < 1e-14);
        assert_eq!(occ.get(0, 0), 0.0);
        assert_eq!(occ.get(1, 0), 0.0);
    }

    #[test]
    fn trivial_occupancies() {
        let occ = occupancy_of_policy(&single(), &Policy::uniform(Dims::new(1, 1)), 1e-12).unwrap();
        assert!((occ.get(0, 0) - 1.0).abs() < 1e-15);

        let mdp = chain(0.5);
        let pi = Policy::deterministic(mdp.dims(), &[0, 0]).unwrap();
        let occ = occupancy_of_policy(&mdp, &pi, 1e-12).unwrap();
        assert!((occ.get(0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn occupancy_rejects_bad_input() {
        let mdp = chain(0.5);
        let wrong = Policy::<f64>::uniform(Dims::new(3, 2));
        assert!(matches!(
            occupancy_of_policy(&mdp, &wrong, 1e-10),
            Err(ClareError::DimensionMismatch(_))
        ));
        assert!(occupancy_of_policy(&mdp, &Policy::uniform(mdp.dims()), 0.0).is_err());
    }

    #[test]
    fn policy_of_occupancy_examples() {
        let d = Dims::new(2, 2);
        let occ = OccupancyMeasure::new(d, vec![0.0, 0.5, 0.0, 0.5]).unwrap();
        let pi = policy_of_occupancy(&occ);
        assert_eq!(pi.prob(0, 1), 1.0);
        assert_eq!(pi.prob(1, 1), 1.0);

        let occ = OccupancyMeasure::new(d, vec![0.25; 4]).unwrap();
        assert_eq!(policy_of_occupancy(&occ).table(), &[0.5; 4]);

        // state 1 unvisited -> uniform row; visited state round-trips
        let occ = OccupancyMeasure::<f64>::new(d, vec![0.75, 0.25, 0.0, 0.0]).unwrap();
        let pi = policy_of_occupancy(&occ);
        assert_eq!(pi.row(1), &[0.5, 0.5]);
        assert!((pi.prob(0, 0) - 0.75).abs() < 1e-15);
        assert!((pi.row(1).iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn causal_entropy_examples() {
        let d12 = Dims::new(1, 2);
        let det = OccupancyMeasure::new(Dims::new(2, 2), vec![0.0, 0.5, 0.0, 0.5]).unwrap();
        assert_eq!(causal_entropy(&det), 0.0);
        let coin = OccupancyMeasure::new(d12, vec![0.5, 0.5]).unwrap();
        assert!((causal_entropy(&coin) - 2f64.ln()).abs() < 1e-15);
        // hand arithmetic: state 0 has marginal 0.75 split (2/3, 1/3),
        // -0.5 ln(2/3) - 0.25 ln(1/3) = 0.477386...
        let occ = OccupancyMeasure::new(Dims::new(2, 2), vec![0.5, 0.25, 0.25, 0.0]).unwrap();
        let expected = -0.5 * (2.0f64 / 3.0).ln() - 0.25 * (1.0f64 / 3.0).ln();
        assert!((causal_entropy(&occ) - expected).abs() < 1e-15);
        assert!((causal_entropy(&occ) - 0.4774).abs() < 1e-4);
    }

    #[test]
    fn expected_return_examples() {
        let mdp = chain(0.5);
        let ones = Policy::deterministic(mdp.dims(), &[1, 1]).unwrap();
        let zeros = Policy::deterministic(mdp.dims(), &[0, 0]).unwrap();
        assert!((expected_return(&mdp, &ones).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(expected_return(&mdp, &zeros).unwrap(), 0.0);
        let flat = mdp.with_reward(vec![0.0; 4]).unwrap();
        assert_eq!(expected_return(&flat, &ones).unwrap(), 0.0);
    }

    #[test]
    fn tv_distance_examples() {
        assert_eq!(tv_distance(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((tv_distance::<f64>(&[0.7, 0.3], &[0.4, 0.6]).unwrap() - 0.3).abs() < 1e-15);
        assert!(tv_distance(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn flow_residual_examples() {
        let mdp = chain(0.5);
        let pi = Policy::deterministic(mdp.dims(), &[1, 0]).unwrap();
        let occ = occupancy_of_policy(&mdp, &pi, 1e-12).unwrap();
        assert!(bellman_flow_residual(&mdp, &occ).unwrap() <= 1e-10);
        // uniform rho: inflow to state 0 = 0.5*1 + 0.5*(0.25+0.25) = 0.75, mass 0.5
        let uni = OccupancyMeasure::new(mdp.dims(), vec![0.25; 4]).unwrap();
        assert!((bellman_flow_residual(&mdp, &uni).unwrap() - 0.25).abs() < 1e-15);
        let one = OccupancyMeasure::new(Dims::new(1, 1), vec![1.0]).unwrap();
        assert_eq!(bellman_flow_residual(&single(), &one).unwrap(), 0.0);
    }

    #[test]
    fn mdp_validation() {
        let d = Dims::new(1, 1);
        assert!(TabularMdp::new(d, vec![0.9], vec![0.0], vec![1.0], 0.5).is_err());
        assert!(TabularMdp::new(d, vec![1.0], vec![0.0], vec![1.0], 1.0).is_err());
        assert!(TabularMdp::new(d, vec![1.0], vec![0.0], vec![0.5], 0.5).is_err());
        assert!(TabularMdp::new(d, vec![1.0, 0.0], vec![0.0], vec![1.0], 0.5).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_stable() {
        let dims = Dims::new(2, 1);
        let t = vec![0.1, 0.9, 1.0 / 3.0, 2.0 / 3.0];
        let mdp = TabularMdp::<f64>::new(dims, t, vec![0.123456789012345678, -1.0], vec![0.7, 0.3], 0.99).unwrap();
        let s = mdp.to_json().unwrap();
        assert!(s.contains("\"num_states\":2"));
        let back = TabularMdp::<f64>::from_json(&s).unwrap();
        for (a, b) in mdp.transitions().iter().zip(back.transitions()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back, mdp);
        assert_eq!(back.to_json().unwrap(), s);
    }

    #[test]
    fn single_precision_occupancy() {
        let dims = Dims::new(2, 2);
        let t: Vec<f32> = vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        let mdp = TabularMdp::new(dims, t, vec![0.0, 1.0, 0.0, 1.0], vec![1.0, 0.0], 0.5f32).unwrap();
        let pi = Policy::deterministic(dims, &[1, 1]).unwrap();
        let occ = occupancy_of_policy(&mdp, &pi, 1e-5).unwrap();
        assert!((occ.get(1, 1) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn optimal_policy_on_chain() {
        let pi = optimal_policy(&chain(0.9)).unwrap();
        assert_eq!(pi.greedy_actions(), vec![1, 1]);
    }
}
