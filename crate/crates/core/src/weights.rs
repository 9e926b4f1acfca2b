//! Data weights `beta(s,a)`, the normalizer `Z_beta`, the interpolated target
//! distribution and the two weighting rules: the error-optimal closed form
//! and the thresholded practical rule.

use serde::{Deserialize, Serialize};

use crate::data::EmpiricalDistribution;
use crate::error::{ClareError, Result};
use crate::mdp::{check_distribution, check_same_dims, flatten_table, nest, Dims};
use crate::model::ErrorTable;
use crate::scalar::{dot, Scalar};

/// Per-pair weights on the union data together with their normalizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightWire<T>", into = "WeightWire<T>", bound = "T: Scalar")]
pub struct WeightTable<T: Scalar> {
    dims: Dims,
    beta: Vec<T>,
    z_beta: T,
    u: Option<T>,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct WeightWire<T: Scalar> {
    num_states: usize,
    num_actions: usize,
    beta: Vec<Vec<T>>,
    z_beta: T,
    u: Option<T>,
}

impl<T: Scalar> TryFrom<WeightWire<T>> for WeightTable<T> {
    type Error = ClareError;

    fn try_from(w: WeightWire<T>) -> Result<Self> {
        let dims = Dims::new(w.num_states, w.num_actions);
        dims.check_nonempty()?;
        let beta = flatten_table("beta", &w.beta, dims.num_actions)?;
        dims.check_len("beta", beta.len())?;
        if !(w.z_beta >= T::zero()) {
            return Err(ClareError::InvalidParameter(format!("z_beta = {}", w.z_beta)));
        }
        Ok(Self {
            dims,
            beta,
            z_beta: w.z_beta,
            u: w.u,
        })
    }
}

impl<T: Scalar> From<WeightTable<T>> for WeightWire<T> {
    fn from(w: WeightTable<T>) -> Self {
        WeightWire {
            num_states: w.dims.num_states,
            num_actions: w.dims.num_actions,
            beta: nest(&w.beta, w.dims.num_actions),
            z_beta: w.z_beta,
            u: w.u,
        }
    }
}

impl<T: Scalar> WeightTable<T> {
    /// Builds a table and computes `Z_beta` against `rho_d`.
    pub fn new(dims: Dims, beta: Vec<T>, rho_d: &[T], u: Option<T>) -> Result<Self> {
        dims.check_nonempty()?;
        dims.check_len("beta", beta.len())?;
        let z_beta = normalizer(&beta, rho_d)?;
        if !z_beta.is_finite() || z_beta < -T::tol(1e-12) {
            return Err(ClareError::DegenerateTarget(z_beta.to_f64_lossy()));
        }
        Ok(Self {
            dims,
            beta,
            z_beta: z_beta.max(T::zero()),
            u,
        })
    }

    /// `beta = 0` everywhere, so `Z_beta = 1`.
    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            beta: vec![T::zero(); dims.pairs()],
            z_beta: T::one(),
            u: None,
        }
    }

    /// The same scalar weight on every pair.
    pub fn constant(dims: Dims, beta: T, rho_d: &[T]) -> Result<Self> {
        Self::new(dims, vec![beta; dims.pairs()], rho_d, None)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Row-major `beta[s][a]`.
    pub fn beta(&self) -> &[T] {
        &self.beta
    }

    #[inline]
    pub fn get(&self, state: usize, action: usize) -> T {
        self.beta[self.dims.index(state, action)]
    }

    pub fn z_beta(&self) -> T {
        self.z_beta
    }

    pub fn threshold(&self) -> Option<T> {
        self.u
    }

    /// Checks `beta >= -rho_e / rho_d` wherever `rho_d > 0`.
    pub fn check_hypothesis(&self, rho_e: &[T], rho_d: &[T]) -> Result<()> {
        self.dims.check_len("rho_E", rho_e.len())?;
        self.dims.check_len("rho_D", rho_d.len())?;
        let tol = T::tol(1e-12);
        for (i, ((&b, &e), &d)) in self.beta.iter().zip(rho_e).zip(rho_d).enumerate() {
            if d > T::zero() && e + b * d < -tol {
                let (state, action) = self.dims.pair(i);
                return Err(ClareError::HypothesisViolated {
                    state,
                    action,
                    reason: format!("beta = {b} is below -rho_E/rho_D = {}", -e / d),
                });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Normalized distribution over state-action pairs that the learned policy
/// is pulled towards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TargetDistribution<T: Scalar> {
    dims: Dims,
    mass: Vec<T>,
}

impl<T: Scalar> TargetDistribution<T> {
    /// Validates unit mass within `1e-10` after clearing rounding-level
    /// negatives.
    pub fn new(dims: Dims, mut mass: Vec<T>) -> Result<Self> {
        dims.check_len("target", mass.len())?;
        let tol = T::tol(1e-12);
        for x in mass.iter_mut() {
            if *x < T::zero() && *x >= -tol {
                *x = T::zero();
            }
        }
        check_distribution("target", &mass, T::tol(1e-10))?;
        Ok(Self { dims, mass })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn mass(&self) -> &[T] {
        &self.mass
    }

    #[inline]
    pub fn get(&self, state: usize, action: usize) -> T {
        self.mass[self.dims.index(state, action)]
    }
}

/// `Z_beta = 1 + sum rho_d * beta`.
pub fn normalizer<T: Scalar>(beta: &[T], rho_d: &[T]) -> Result<T> {
    if beta.len() != rho_d.len() {
        return Err(ClareError::DimensionMismatch(format!(
            "beta has {} entries, rho_D has {}",
            beta.len(),
            rho_d.len()
        )));
    }
    Ok(T::one() + dot(rho_d, beta))
}

/// `(rho_e + beta * rho_d) / Z_beta`.
pub fn target_interpolation<T: Scalar>(
    rho_e: &[T],
    rho_d: &[T],
    weights: &WeightTable<T>,
) -> Result<TargetDistribution<T>> {
    weights.check_hypothesis(rho_e, rho_d)?;
    let z = weights.z_beta();
    if z <= T::tol(1e-12) {
        return Err(ClareError::DegenerateTarget(z.to_f64_lossy()));
    }
    let mass = rho_e
        .iter()
        .zip(rho_d)
        .zip(weights.beta())
        .map(|((&e, &d), &b)| (e + b * d) / z)
        .collect();
    TargetDistribution::new(weights.dims(), mass)
}

/// Shape of the error-optimal occupancy: which pairs are minimal-error
/// (`N_min`), which are dropped, and the mass moved onto each minimal pair.
struct OptimalSplit<T> {
    minimal: Vec<bool>,
    dropped: Vec<bool>,
    delta: T,
}

fn optimal_split<T: Scalar>(errors: &ErrorTable<T>, rho_e: &[T], support: &[bool]) -> Result<OptimalSplit<T>> {
    let dims = errors.dims;
    dims.check_len("rho_E", rho_e.len())?;
    dims.check_len("support", support.len())?;
    let c_min = errors
        .c
        .iter()
        .zip(support)
        .filter(|(_, &s)| s)
        .map(|(&c, _)| c)
        .fold(T::infinity(), T::min);
    if !c_min.is_finite() {
        return Err(ClareError::EmptyDataset("support of the error table"));
    }
    let two = T::lit(2.0);
    let minimal: Vec<bool> = errors
        .c
        .iter()
        .zip(support)
        .map(|(&c, &s)| s && c <= c_min)
        .collect();
    let dropped: Vec<bool> = errors
        .c
        .iter()
        .zip(support)
        .map(|(&c, &s)| !s || c - c_min > two)
        .collect();
    let n_min = minimal.iter().filter(|&&m| m).count();
    assert!(n_min > 0, "the support minimum is attained on the support");
    let moved: T = rho_e
        .iter()
        .zip(&dropped)
        .filter(|(_, &d)| d)
        .map(|(&e, _)| e)
        .sum();
    Ok(OptimalSplit {
        minimal,
        dropped,
        delta: moved / T::from_usize(n_min).unwrap(),
    })
}

/// Occupancy minimizing `sum c * rho + sum |rho - rho_e|` over the simplex.
///
/// Mass of pairs whose error exceeds the support minimum by more than 2 is
/// moved evenly onto the minimal-error pairs; pairs outside `support` count
/// as infinitely uncertain.
pub fn optimal_occupancy<T: Scalar>(
    errors: &ErrorTable<T>,
    rho_e: &[T],
    support: &[bool],
) -> Result<TargetDistribution<T>> {
    let split = optimal_split(errors, rho_e, support)?;
    let mass = rho_e
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            if split.minimal[i] {
                e + split.delta
            } else if split.dropped[i] {
                T::zero()
            } else {
                e
            }
        })
        .collect();
    TargetDistribution::new(errors.dims, mass)
}

/// Weights whose interpolated target equals [`optimal_occupancy`] on the
/// support of `rho_d`, with `Z_beta = 1`.
pub fn optimal_weights<T: Scalar>(
    errors: &ErrorTable<T>,
    rho_e: &[T],
    rho_d: &[T],
) -> Result<WeightTable<T>> {
    let dims = errors.dims;
    dims.check_len("rho_D", rho_d.len())?;
    let support: Vec<bool> = rho_d.iter().map(|&d| d > T::zero()).collect();
    let split = optimal_split(errors, rho_e, &support)?;
    let c_min = errors
        .c
        .iter()
        .zip(&support)
        .filter(|(_, &s)| s)
        .map(|(&c, _)| c)
        .fold(T::infinity(), T::min);
    for i in 0..dims.pairs() {
        if support[i] {
            continue;
        }
        let (state, action) = dims.pair(i);
        if rho_e[i] > T::zero() {
            return Err(ClareError::HypothesisViolated {
                state,
                action,
                reason: "expert mass outside the union data".into(),
            });
        }
        if errors.c[i] <= c_min {
            return Err(ClareError::HypothesisViolated {
                state,
                action,
                reason: format!("unsupported pair has minimal error c = {}", errors.c[i]),
            });
        }
    }
    let beta = (0..dims.pairs())
        .map(|i| {
            if !support[i] {
                T::zero()
            } else if split.minimal[i] {
                split.delta / rho_d[i]
            } else if split.dropped[i] {
                -rho_e[i] / rho_d[i]
            } else {
                T::zero()
            }
        })
        .collect();
    WeightTable::new(dims, beta, rho_d, None)
}

/// Thresholded weights from tuple counts.
///
/// With `N' = #{tuples in D with c <= u}` and `N'' = #{tuples in D_E with
/// c > u}`, safe pairs get `N'' D / (N' D_E)` and unsafe expert pairs get
/// `-(D / D_E) * n_E(s,a) / n_D(s,a)`, which cancels their expert mass
/// exactly. Everything else gets 0, and `Z_beta = 1`.
pub fn practical_weights<T: Scalar>(
    errors: &ErrorTable<T>,
    u: T,
    expert: &EmpiricalDistribution<T>,
    union: &EmpiricalDistribution<T>,
) -> Result<WeightTable<T>> {
    let dims = errors.dims;
    check_same_dims(dims, expert.dims)?;
    check_same_dims(dims, union.dims)?;
    if !(u > T::zero()) {
        return Err(ClareError::InvalidParameter(format!("threshold u must be positive, got {u}")));
    }
    let d_e = expert.total();
    let d = union.total();
    if d_e == 0 {
        return Err(ClareError::EmptyDataset("expert"));
    }
    for i in 0..dims.pairs() {
        if expert.counts[i] > union.counts[i] {
            let (state, action) = dims.pair(i);
            return Err(ClareError::HypothesisViolated {
                state,
                action,
                reason: "expert tuples missing from the union data".into(),
            });
        }
    }
    let safe = |i: usize| errors.c[i] <= u;
    let n_safe: u64 = (0..dims.pairs()).filter(|&i| safe(i)).map(|i| union.counts[i]).sum();
    let n_unsafe_expert: u64 = (0..dims.pairs())
        .filter(|&i| !safe(i))
        .map(|i| expert.counts[i])
        .sum();
    if n_safe == 0 {
        return Err(ClareError::NoSafePair(u.to_f64_lossy()));
    }
    let f = |n: u64| T::from_u64(n).unwrap();
    let ratio = f(d) / f(d_e);
    let up = f(n_unsafe_expert) * ratio / f(n_safe);
    let beta = (0..dims.pairs())
        .map(|i| {
            let (n_e, n_d) = (expert.counts[i], union.counts[i]);
            if n_d == 0 {
                T::zero()
            } else if safe(i) {
                up
            } else if n_e > 0 {
                -ratio * f(n_e) / f(n_d)
            } else {
                T::zero()
            }
        })
        .collect();
    WeightTable::new(dims, beta, &union.mass, Some(u))
}
