//! Learned rewards, the regularizer family and the conservative reward loss.

use serde::{Deserialize, Serialize};

use crate::error::{ClareError, Result};
use crate::mdp::{flatten_table, nest, Dims, OccupancyMeasure};
use crate::scalar::{dot, Scalar};
use crate::weights::WeightTable;

/// Reward table `r[s][a]`, optionally confined to `[-bound, bound]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RewardWire<T>", into = "RewardWire<T>", bound = "T: Scalar")]
pub struct RewardFunction<T: Scalar> {
    dims: Dims,
    values: Vec<T>,
    bound: Option<T>,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct RewardWire<T: Scalar> {
    num_states: usize,
    num_actions: usize,
    reward: Vec<Vec<T>>,
    bound: Option<T>,
}

impl<T: Scalar> TryFrom<RewardWire<T>> for RewardFunction<T> {
    type Error = ClareError;

    fn try_from(w: RewardWire<T>) -> Result<Self> {
        let dims = Dims::new(w.num_states, w.num_actions);
        RewardFunction::new(dims, flatten_table("reward", &w.reward, dims.num_actions)?, w.bound)
    }
}

impl<T: Scalar> From<RewardFunction<T>> for RewardWire<T> {
    fn from(r: RewardFunction<T>) -> Self {
        RewardWire {
            num_states: r.dims.num_states,
            num_actions: r.dims.num_actions,
            reward: nest(&r.values, r.dims.num_actions),
            bound: r.bound,
        }
    }
}

impl<T: Scalar> RewardFunction<T> {
    pub fn new(dims: Dims, values: Vec<T>, bound: Option<T>) -> Result<Self> {
        dims.check_nonempty()?;
        dims.check_len("reward", values.len())?;
        if let Some(x) = values.iter().find(|x| !x.is_finite()) {
            return Err(ClareError::InvalidParameter(format!("non-finite reward {x}")));
        }
        if let Some(b) = bound {
            if !(b > T::zero()) {
                return Err(ClareError::InvalidParameter(format!("reward bound {b}")));
            }
            if let Some(x) = values.iter().find(|x| x.abs() > b) {
                return Err(ClareError::InvalidParameter(format!(
                    "reward {x} exceeds bound {b}"
                )));
            }
        }
        Ok(Self { dims, values, bound })
    }

    pub fn zeros(dims: Dims, bound: Option<T>) -> Self {
        Self {
            dims,
            values: vec![T::zero(); dims.pairs()],
            bound,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Row-major `r[s][a]`.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn get(&self, state: usize, action: usize) -> T {
        self.values[self.dims.index(state, action)]
    }

    pub fn bound(&self) -> Option<T> {
        self.bound
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Convex reward regularizer `psi` and, through its conjugate, the
/// divergence `D_psi(rho1, rho2) = psi*(rho2 - rho1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", bound = "T: Scalar")]
pub enum Regularizer<T: Scalar> {
    /// `psi(r) = w * sum r^2`.
    Quadratic { weight: T },
    /// Indicator of the box `|r| <= r_max`.
    Bounded { r_max: T },
    /// `psi(r) = sum q * r^2 / (4 delta)` for a reference distribution `q`;
    /// a missing reference is filled with the training target.
    Chi2 {
        delta: T,
        #[serde(default)]
        reference: Option<Vec<T>>,
    },
}

impl<T: Scalar> Default for Regularizer<T> {
    fn default() -> Self {
        Regularizer::Quadratic { weight: T::one() }
    }
}

impl<T: Scalar> Regularizer<T> {
    pub fn validate(&self, dims: Dims) -> Result<()> {
        let (name, w) = match self {
            Regularizer::Quadratic { weight } => ("quadratic weight", *weight),
            Regularizer::Bounded { r_max } => ("bound", *r_max),
            Regularizer::Chi2 { delta, reference } => {
                if let Some(q) = reference {
                    dims.check_len("chi2 reference", q.len())?;
                    crate::mdp::check_distribution("chi2 reference", q, T::tol(1e-10))?;
                }
                ("chi2 delta", *delta)
            }
        };
        if !(w > T::zero()) || !w.is_finite() {
            return Err(ClareError::InvalidParameter(format!("{name} must be positive, got {w}")));
        }
        Ok(())
    }

    /// Fills a missing chi-squared reference with `target`.
    pub fn with_default_reference(&self, target: &[T]) -> Self {
        match self {
            Regularizer::Chi2 { delta, reference: None } => Regularizer::Chi2 {
                delta: *delta,
                reference: Some(target.to_vec()),
            },
            other => other.clone(),
        }
    }

    /// Box the reward must stay in, if any.
    pub fn reward_bound(&self) -> Option<T> {
        match self {
            Regularizer::Bounded { r_max } => Some(*r_max),
            _ => None,
        }
    }

    fn reference(&self) -> Result<&[T]> {
        match self {
            Regularizer::Chi2 { reference: Some(q), .. } => Ok(q),
            _ => Err(ClareError::InvalidParameter(
                "chi2 regularizer has no reference distribution".into(),
            )),
        }
    }

    /// `psi(r)`; infinite outside the box for the bounded kind.
    pub fn psi(&self, r: &[T]) -> Result<T> {
        Ok(match self {
            Regularizer::Quadratic { weight } => *weight * dot(r, r),
            Regularizer::Bounded { r_max } => {
                let slack = *r_max * (T::one() + T::tol(1e-12));
                if r.iter().all(|x| x.abs() <= slack) {
                    T::zero()
                } else {
                    T::infinity()
                }
            }
            Regularizer::Chi2 { delta, .. } => {
                let q = self.reference()?;
                check_len(q.len(), r.len())?;
                q.iter().zip(r).map(|(&q, &x)| q * x * x).sum::<T>() / (T::lit(4.0) * *delta)
            }
        })
    }

    /// A (sub)gradient of `psi` at `r`; zero inside the box for the bounded kind.
    pub fn gradient(&self, r: &[T]) -> Result<Vec<T>> {
        Ok(match self {
            Regularizer::Quadratic { weight } => r.iter().map(|&x| T::lit(2.0) * *weight * x).collect(),
            Regularizer::Bounded { .. } => vec![T::zero(); r.len()],
            Regularizer::Chi2 { delta, .. } => {
                let q = self.reference()?;
                check_len(q.len(), r.len())?;
                let s = T::lit(2.0) * *delta;
                q.iter().zip(r).map(|(&q, &x)| q * x / s).collect()
            }
        })
    }

    /// Projects onto the domain of `psi` in place.
    pub fn project(&self, r: &mut [T]) {
        if let Regularizer::Bounded { r_max } = self {
            for x in r.iter_mut() {
                *x = x.max(-*r_max).min(*r_max);
            }
        }
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(ClareError::DimensionMismatch(format!("{a} vs {b} entries")));
    }
    Ok(())
}

/// `D_psi(rho1, rho2) = psi*(rho2 - rho1)`.
///
/// Quadratic: `sum (rho2 - rho1)^2 / (4 w)`. Bounded: `r_max * sum |rho2 -
/// rho1|`. Chi-squared: `delta * sum (rho2 - rho1)^2 / q`, infinite (an
/// error) where `q = 0` but the difference is not.
pub fn divergence<T: Scalar>(spec: &Regularizer<T>, rho1: &[T], rho2: &[T]) -> Result<T> {
    check_len(rho1.len(), rho2.len())?;
    let diff = rho2.iter().zip(rho1).map(|(&a, &b)| a - b);
    Ok(match spec {
        Regularizer::Quadratic { weight } => diff.map(|v| v * v).sum::<T>() / (T::lit(4.0) * *weight),
        Regularizer::Bounded { r_max } => *r_max * diff.map(|v| v.abs()).sum::<T>(),
        Regularizer::Chi2 { delta, reference } => {
            let q = reference.as_deref().unwrap_or(rho2);
            check_len(q.len(), rho1.len())?;
            let mut total = T::zero();
            for (i, (v, &q)) in diff.zip(q).enumerate() {
                if v == T::zero() {
                    continue;
                }
                if q <= T::zero() {
                    return Err(ClareError::InfiniteDivergence(i));
                }
                total = total + v * v / q;
            }
            *delta * total
        }
    })
}

fn check_inputs<T: Scalar>(
    r: &RewardFunction<T>,
    occ_hat: &[T],
    rho_e: &[T],
    rho_d: &[T],
    weights: &WeightTable<T>,
) -> Result<()> {
    let dims = r.dims();
    crate::mdp::check_same_dims(dims, weights.dims())?;
    dims.check_len("model occupancy", occ_hat.len())?;
    dims.check_len("rho_E", rho_e.len())?;
    dims.check_len("rho_D", rho_d.len())
}

pub(crate) fn loss_of_mass<T: Scalar>(
    r: &RewardFunction<T>,
    occ_hat: &[T],
    rho_e: &[T],
    rho_d: &[T],
    weights: &WeightTable<T>,
    spec: &Regularizer<T>,
) -> Result<T> {
    check_inputs(r, occ_hat, rho_e, rho_d, weights)?;
    let z = weights.z_beta();
    let v = r.values();
    let weighted: T = rho_d
        .iter()
        .zip(weights.beta())
        .zip(v)
        .map(|((&d, &b), &x)| d * b * x)
        .sum();
    Ok(z * dot(occ_hat, v) - dot(rho_e, v) - weighted + z * spec.psi(v)?)
}

/// Conservative reward loss
/// `Z_beta E_{rho_hat}[r] - E_{rho_E}[r] - E_{rho_D}[beta r] + Z_beta psi(r)`.
pub fn reward_loss<T: Scalar>(
    r: &RewardFunction<T>,
    occ_hat: &OccupancyMeasure<T>,
    rho_e: &[T],
    rho_d: &[T],
    weights: &WeightTable<T>,
    spec: &Regularizer<T>,
) -> Result<T> {
    loss_of_mass(r, occ_hat.mass(), rho_e, rho_d, weights, spec)
}

/// `Z_beta rho_hat - rho_E - beta rho_D + Z_beta grad psi(r)`.
pub fn reward_gradient<T: Scalar>(
    r: &RewardFunction<T>,
    occ_hat: &OccupancyMeasure<T>,
    rho_e: &[T],
    rho_d: &[T],
    weights: &WeightTable<T>,
    spec: &Regularizer<T>,
) -> Result<Vec<T>> {
    gradient_of_mass(r, occ_hat.mass(), rho_e, rho_d, weights, spec)
}

pub(crate) fn gradient_of_mass<T: Scalar>(
    r: &RewardFunction<T>,
    occ_hat: &[T],
    rho_e: &[T],
    rho_d: &[T],
    weights: &WeightTable<T>,
    spec: &Regularizer<T>,
) -> Result<Vec<T>> {
    check_inputs(r, occ_hat, rho_e, rho_d, weights)?;
    let z = weights.z_beta();
    let g = spec.gradient(r.values())?;
    Ok((0..occ_hat.len())
        .map(|i| z * occ_hat[i] - rho_e[i] - weights.beta()[i] * rho_d[i] + z * g[i])
        .collect())
}

/// `steps` gradient-descent updates with step `eta` at a fixed model
/// occupancy, projecting onto the box after each step for the bounded kind.
#[allow(clippy::too_many_arguments)]
pub fn reward_step<T: Scalar>(
    r: &RewardFunction<T>,
    occ_hat: &OccupancyMeasure<T>,
    rho_e: &[T],
    rho_d: &[T],
    weights: &WeightTable<T>,
    spec: &Regularizer<T>,
    eta: T,
    steps: usize,
) -> Result<RewardFunction<T>> {
    step_on_mass(r, occ_hat.mass(), rho_e, rho_d, weights, spec, eta, steps)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn step_on_mass<T: Scalar>(
    r: &RewardFunction<T>,
    occ_hat: &[T],
    rho_e: &[T],
    rho_d: &[T],
    weights: &WeightTable<T>,
    spec: &Regularizer<T>,
    eta: T,
    steps: usize,
) -> Result<RewardFunction<T>> {
    if !(eta > T::zero()) {
        return Err(ClareError::InvalidParameter(format!("step size must be positive, got {eta}")));
    }
    let mut current = r.clone();
    for _ in 0..steps {
        let g = gradient_of_mass(&current, occ_hat, rho_e, rho_d, weights, spec)?;
        for (x, gi) in current.values.iter_mut().zip(&g) {
            *x = *x - eta * *gi;
        }
        spec.project(&mut current.values);
        if current.values.iter().any(|x| !x.is_finite()) {
            return Err(ClareError::NotConverged {
                what: "reward descent (diverged)",
                iters: steps,
                residual: f64::INFINITY,
            });
        }
    }
    current.bound = spec.reward_bound().or(r.bound);
    Ok(current)
}

/// Reward loss at a running average of model occupancies.
///
/// Identical to [`reward_loss`] evaluated at `replay_avg`, except that a
/// chi-squared regularizer weighs `r^2` by the even mixture of `rho_D` and
/// the replay average.
pub fn replay_reward_loss<T: Scalar>(
    r: &RewardFunction<T>,
    replay_avg: &OccupancyMeasure<T>,
    rho_e: &[T],
    rho_d: &[T],
    weights: &WeightTable<T>,
    spec: &Regularizer<T>,
) -> Result<T> {
    let spec = replay_regularizer(spec, replay_avg.mass(), rho_d)?;
    reward_loss(r, replay_avg, rho_e, rho_d, weights, &spec)
}

pub(crate) fn replay_regularizer<T: Scalar>(
    spec: &Regularizer<T>,
    replay: &[T],
    rho_d: &[T],
) -> Result<Regularizer<T>> {
    check_len(replay.len(), rho_d.len())?;
    Ok(match spec {
        Regularizer::Chi2 { delta, .. } => Regularizer::Chi2 {
            delta: *delta,
            reference: Some(
                replay
                    .iter()
                    .zip(rho_d)
                    .map(|(&a, &b)| T::lit(0.5) * (a + b))
                    .collect(),
            ),
        },
        other => other.clone(),
    })
}
