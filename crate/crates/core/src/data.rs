//! Offline datasets of `(s, a, s')` transitions and the empirical
//! distributions they induce.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ClareError, Result};
use crate::mdp::{check_distribution, check_same_dims, Dims, Policy, TabularMdp};
use crate::scalar::Scalar;

/// One logged transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 3]", into = "[usize; 3]")]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
}

impl From<[usize; 3]> for Transition {
    fn from([state, action, next_state]: [usize; 3]) -> Self {
        Self {
            state,
            action,
            next_state,
        }
    }
}

impl From<Transition> for [usize; 3] {
    fn from(t: Transition) -> Self {
        [t.state, t.action, t.next_state]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetLabel {
    Expert,
    Diverse,
}

/// A static offline dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub label: DatasetLabel,
    pub transitions: Vec<Transition>,
}

impl Dataset {
    pub fn new(label: DatasetLabel, transitions: Vec<Transition>) -> Self {
        Self { label, transitions }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Rejects indices outside `dims`.
    pub fn validate(&self, dims: Dims) -> Result<()> {
        for (i, t) in self.transitions.iter().enumerate() {
            if t.state >= dims.num_states
                || t.next_state >= dims.num_states
                || t.action >= dims.num_actions
            {
                return Err(ClareError::IndexOutOfRange(format!(
                    "transition {i} = ({}, {}, {}) outside {}x{}",
                    t.state, t.action, t.next_state, dims.num_states, dims.num_actions
                )));
            }
        }
        Ok(())
    }

    /// Concatenation `self ∪ other`, keeping this dataset's label.
    pub fn union(&self, other: &Dataset) -> Dataset {
        let mut transitions = self.transitions.clone();
        transitions.extend_from_slice(&other.transitions);
        Dataset::new(self.label, transitions)
    }

    /// Same tuples in a seeded random order (the "shuffled tuples" layout).
    pub fn shuffled(&self, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut transitions = self.transitions.clone();
        transitions.shuffle(&mut rng);
        Dataset::new(self.label, transitions)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// CSV with header `s,a,s_next`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "s,a,s_next")?;
        for t in &self.transitions {
            writeln!(out, "{},{},{}", t.state, t.action, t.next_state)?;
        }
        Ok(())
    }
}

/// Horizon `ceil(4 / (1 - gamma))`; the truncated tail carries `gamma^H`
/// of the discounted mass (under 2%).
pub fn default_horizon<T: Scalar>(discount: T) -> usize {
    // the slack keeps 4 / (1 - 0.9) from rounding up to 41
    let h = (4.0 / (1.0 - discount.to_f64_lossy()) - 1e-9).ceil();
    h.max(1.0) as usize
}

pub(crate) fn sample_index<T: Scalar, R: Rng>(rng: &mut R, probs: &[T]) -> usize {
    let u = T::lit(rng.random::<f64>());
    let mut acc = T::zero();
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= T::zero() {
            continue;
        }
        acc = acc + p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Episodic rollouts of `policy` under the true dynamics, starting from the
/// MDP's initial distribution and truncated at `horizon`, until
/// `num_transitions` tuples are collected.
pub fn sample_dataset<T: Scalar>(
    mdp: &TabularMdp<T>,
    policy: &Policy<T>,
    num_transitions: usize,
    horizon: usize,
    seed: u64,
    label: DatasetLabel,
) -> Result<Dataset> {
    sample_dataset_from(mdp, policy, mdp.initial(), num_transitions, horizon, seed, label)
}

/// As [`sample_dataset`] but episodes start from `start` instead of the
/// MDP's initial distribution.
pub fn sample_dataset_from<T: Scalar>(
    mdp: &TabularMdp<T>,
    policy: &Policy<T>,
    start: &[T],
    num_transitions: usize,
    horizon: usize,
    seed: u64,
    label: DatasetLabel,
) -> Result<Dataset> {
    check_same_dims(mdp.dims(), policy.dims())?;
    if num_transitions == 0 || horizon == 0 {
        return Err(ClareError::InvalidParameter(format!(
            "need num_transitions >= 1 and horizon >= 1, got {num_transitions} and {horizon}"
        )));
    }
    if start.len() != mdp.num_states() {
        return Err(ClareError::DimensionMismatch("start distribution".into()));
    }
    check_distribution("start distribution", start, T::tol(1e-12))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transitions = Vec::with_capacity(num_transitions);
    'outer: loop {
        let mut s = sample_index(&mut rng, start);
        for _ in 0..horizon {
            let a = sample_index(&mut rng, policy.row(s));
            let s2 = sample_index(&mut rng, mdp.transition_row(s, a));
            transitions.push(Transition {
                state: s,
                action: a,
                next_state: s2,
            });
            if transitions.len() == num_transitions {
                break 'outer;
            }
            s = s2;
        }
    }
    Ok(Dataset::new(label, transitions))
}

/// Empirical distribution over state-action pairs with its visit counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EmpiricalDistribution<T: Scalar> {
    pub dims: Dims,
    pub mass: Vec<T>,
    pub counts: Vec<u64>,
}

impl<T: Scalar> EmpiricalDistribution<T> {
    fn from_counts(dims: Dims, counts: Vec<u64>) -> Self {
        let total: u64 = counts.iter().sum();
        let denom = T::from_u64(total).unwrap();
        let mass = counts
            .iter()
            .map(|&c| T::from_u64(c).unwrap() / denom)
            .collect();
        Self { dims, mass, counts }
    }

    /// Number of tuples behind the distribution.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Pairs with at least one tuple.
    pub fn support(&self) -> Vec<bool> {
        self.counts.iter().map(|&c| c > 0).collect()
    }
}

fn pair_counts(datasets: &[&Dataset], dims: Dims) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; dims.pairs()];
    for d in datasets {
        d.validate(dims)?;
        for t in &d.transitions {
            counts[dims.index(t.state, t.action)] += 1;
        }
    }
    Ok(counts)
}

/// `rho_E(s,a) = |D_E(s,a)| / D_E`.
pub fn empirical_expert<T: Scalar>(expert: &Dataset, dims: Dims) -> Result<EmpiricalDistribution<T>> {
    if expert.is_empty() {
        return Err(ClareError::EmptyDataset("expert"));
    }
    Ok(EmpiricalDistribution::from_counts(dims, pair_counts(&[expert], dims)?))
}

/// `rho_D(s,a) = (|D_E(s,a)| + |D_B(s,a)|) / (D_E + D_B)`.
pub fn empirical_union<T: Scalar>(
    expert: &Dataset,
    diverse: &Dataset,
    dims: Dims,
) -> Result<EmpiricalDistribution<T>> {
    if expert.is_empty() && diverse.is_empty() {
        return Err(ClareError::EmptyDataset("expert and diverse"));
    }
    Ok(EmpiricalDistribution::from_counts(
        dims,
        pair_counts(&[expert, diverse], dims)?,
    ))
}

/// Empirical behavior policy `pi_b(a|s)`; unvisited states get uniform rows.
pub fn behavior_policy<T: Scalar>(dataset: &Dataset, dims: Dims) -> Result<Policy<T>> {
    if dataset.is_empty() {
        return Err(ClareError::EmptyDataset("behavior"));
    }
    let counts = pair_counts(&[dataset], dims)?;
    let na = dims.num_actions;
    let uniform = T::one() / T::from_usize(na).unwrap();
    let mut probs = Vec::with_capacity(dims.pairs());
    for row in counts.chunks(na) {
        let total: u64 = row.iter().sum();
        if total == 0 {
            probs.extend(std::iter::repeat(uniform).take(na));
        } else {
            let denom = T::from_u64(total).unwrap();
            probs.extend(row.iter().map(|&c| T::from_u64(c).unwrap() / denom));
        }
    }
    Policy::new(dims, probs)
}

/// State marginal of the dataset's starting states `s` (used as the rollout
/// start distribution under a learned model).
pub fn state_marginal<T: Scalar>(datasets: &[&Dataset], num_states: usize) -> Result<Vec<T>> {
    let mut counts = vec![0u64; num_states];
    let mut total = 0u64;
    for d in datasets {
        for t in &d.transitions {
            if t.state >= num_states {
                return Err(ClareError::IndexOutOfRange(format!("state {}", t.state)));
            }
            counts[t.state] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(ClareError::EmptyDataset("state marginal"));
    }
    let denom = T::from_u64(total).unwrap();
    Ok(counts.iter().map(|&c| T::from_u64(c).unwrap() / denom).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(s: usize, a: usize, s2: usize) -> Transition {
        Transition::from([s, a, s2])
    }

    fn chain() -> TabularMdp<f64> {
        let t = vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        TabularMdp::new(Dims::new(2, 2), t, vec![0.0, 1.0, 0.0, 1.0], vec![1.0, 0.0], 0.5).unwrap()
    }

    #[test]
    fn sampling_examples() {
        let one = TabularMdp::new(Dims::new(1, 1), vec![1.0], vec![0.0], vec![1.0], 0.9).unwrap();
        let d = sample_dataset(&one, &Policy::uniform(one.dims()), 5, 3, 1, DatasetLabel::Expert).unwrap();
        assert_eq!(d.transitions, vec![tr(0, 0, 0); 5]);

        let mdp = chain();
        let pi = Policy::deterministic(mdp.dims(), &[1, 1]).unwrap();
        let d = sample_dataset(&mdp, &pi, 3, 3, 9, DatasetLabel::Expert).unwrap();
        assert_eq!(d.transitions, vec![tr(0, 1, 1), tr(1, 1, 1), tr(1, 1, 1)]);

        let uni = Policy::uniform(mdp.dims());
        let a = sample_dataset(&mdp, &uni, 50, 4, 42, DatasetLabel::Diverse).unwrap();
        let b = sample_dataset(&mdp, &uni, 50, 4, 42, DatasetLabel::Diverse).unwrap();
        assert_eq!(a, b);
        assert!(sample_dataset(&mdp, &uni, 0, 4, 42, DatasetLabel::Diverse).is_err());
        assert!(sample_dataset(&mdp, &uni, 4, 0, 42, DatasetLabel::Diverse).is_err());
    }

    #[test]
    fn horizon_restarts_episodes() {
        let mdp = chain();
        let pi = Policy::deterministic(mdp.dims(), &[1, 1]).unwrap();
        let d = sample_dataset(&mdp, &pi, 4, 2, 0, DatasetLabel::Expert).unwrap();
        assert_eq!(d.transitions, vec![tr(0, 1, 1), tr(1, 1, 1), tr(0, 1, 1), tr(1, 1, 1)]);
        assert_eq!(default_horizon(0.9), 40);
    }

    #[test]
    fn empirical_expert_examples() {
        let dims = Dims::new(2, 2);
        let d = Dataset::new(DatasetLabel::Expert, vec![tr(0, 1, 1), tr(1, 1, 1)]);
        let e = empirical_expert::<f64>(&d, dims).unwrap();
        assert_eq!(e.mass, vec![0.0, 0.5, 0.0, 0.5]);

        let d = Dataset::new(DatasetLabel::Expert, vec![tr(1, 0, 0)]);
        assert_eq!(empirical_expert::<f64>(&d, dims).unwrap().mass, vec![0.0, 0.0, 1.0, 0.0]);

        let d = Dataset::new(
            DatasetLabel::Expert,
            vec![tr(0, 0, 0), tr(0, 0, 1), tr(0, 1, 0), tr(0, 0, 0)],
        );
        let e = empirical_expert::<f64>(&d, dims).unwrap();
        assert_eq!(e.mass, vec![0.75, 0.25, 0.0, 0.0]);
        assert_eq!(e.counts, vec![3, 1, 0, 0]);

        let empty = Dataset::new(DatasetLabel::Expert, vec![]);
        assert!(matches!(
            empirical_expert::<f64>(&empty, dims),
            Err(ClareError::EmptyDataset(_))
        ));
        let bad = Dataset::new(DatasetLabel::Expert, vec![tr(2, 0, 0)]);
        assert!(empirical_expert::<f64>(&bad, dims).is_err());
    }

    #[test]
    fn empirical_union_examples() {
        let dims = Dims::new(2, 2);
        let e = Dataset::new(DatasetLabel::Expert, vec![tr(0, 1, 1), tr(1, 1, 1)]);
        let empty = Dataset::new(DatasetLabel::Diverse, vec![]);
        let ex = empirical_expert::<f64>(&e, dims).unwrap();
        assert_eq!(empirical_union::<f64>(&e, &empty, dims).unwrap().mass, ex.mass);
        let same = Dataset::new(DatasetLabel::Diverse, e.transitions.clone());
        assert_eq!(empirical_union::<f64>(&e, &same, dims).unwrap().mass, ex.mass);

        let e = Dataset::new(DatasetLabel::Expert, vec![tr(0, 0, 0)]);
        let b = Dataset::new(DatasetLabel::Diverse, vec![tr(0, 1, 0); 3]);
        let u = empirical_union::<f64>(&e, &b, dims).unwrap();
        assert_eq!(u.mass, vec![0.25, 0.75, 0.0, 0.0]);
        let empty_e = Dataset::new(DatasetLabel::Expert, vec![]);
        assert!(empirical_union::<f64>(&empty_e, &empty, dims).is_err());
    }

    #[test]
    fn behavior_policy_examples() {
        let dims = Dims::new(2, 2);
        let d = Dataset::new(DatasetLabel::Expert, vec![tr(0, 1, 0)]);
        let pi = behavior_policy::<f64>(&d, dims).unwrap();
        assert_eq!(pi.prob(0, 1), 1.0);
        assert_eq!(pi.row(1), &[0.5, 0.5]);

        let d = Dataset::new(DatasetLabel::Expert, vec![tr(0, 0, 0), tr(0, 1, 0)]);
        let pi = behavior_policy::<f64>(&d, dims).unwrap();
        assert_eq!(pi.row(0), &[0.5, 0.5]);
        for s in 0..2 {
            assert!((pi.row(s).iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
        let empty = Dataset::new(DatasetLabel::Expert, vec![]);
        assert!(behavior_policy::<f64>(&empty, dims).is_err());
    }

    #[test]
    fn json_and_csv_layout() {
        let d = Dataset::new(DatasetLabel::Expert, vec![tr(0, 1, 1), tr(1, 0, 0)]);
        let json = d.to_json().unwrap();
        assert_eq!(json, r#"{"label":"expert","transitions":[[0,1,1],[1,0,0]]}"#);
        assert_eq!(Dataset::from_json(&json).unwrap(), d);
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "s,a,s_next\n0,1,1\n1,0,0\n");
    }

    #[test]
    fn shuffled_keeps_multiset() {
        let mdp = chain();
        let d = sample_dataset(&mdp, &Policy::uniform(mdp.dims()), 40, 5, 3, DatasetLabel::Diverse).unwrap();
        let s = d.shuffled(11);
        let a = empirical_expert::<f64>(&d, mdp.dims()).unwrap();
        let b = empirical_expert::<f64>(&s, mdp.dims()).unwrap();
        assert_eq!(a.counts, b.counts);
    }
}
