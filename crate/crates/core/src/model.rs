//! Maximum-likelihood dynamics estimates and per-pair model-error tables.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{ClareError, Result};
use crate::mdp::{check_same_dims, flatten_table, nest, tv_distance, Dims, TabularMdp};
use crate::scalar::Scalar;

/// Laplace smoothing used for the model that CLARE trains against.
pub const TRAINING_SMOOTHING: f64 = 1e-3;

/// Learned dynamics `T_hat(s'|s,a)` with the visit counts behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelWire<T>", into = "ModelWire<T>", bound = "T: Scalar")]
pub struct ModelEstimate<T: Scalar> {
    dims: Dims,
    transition_hat: Vec<T>,
    counts: Vec<u64>,
    smoothing: T,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct ModelWire<T: Scalar> {
    num_states: usize,
    num_actions: usize,
    transition: Vec<Vec<Vec<T>>>,
    counts: Vec<Vec<u64>>,
    smoothing: T,
}

impl<T: Scalar> TryFrom<ModelWire<T>> for ModelEstimate<T> {
    type Error = ClareError;

    fn try_from(w: ModelWire<T>) -> Result<Self> {
        let dims = Dims::new(w.num_states, w.num_actions);
        dims.check_nonempty()?;
        if w.transition.len() != dims.num_states || w.counts.len() != dims.num_states {
            return Err(ClareError::DimensionMismatch(
                "model tables need one entry per state".into(),
            ));
        }
        let mut transition_hat = Vec::with_capacity(dims.pairs() * dims.num_states);
        for rows in &w.transition {
            transition_hat.extend(flatten_table("transition", rows, dims.num_states)?);
        }
        if transition_hat.len() != dims.pairs() * dims.num_states {
            return Err(ClareError::DimensionMismatch("model transition".into()));
        }
        let counts = flatten_table("counts", &w.counts, dims.num_actions)?;
        let tol = T::tol(1e-12);
        for row in transition_hat.chunks(dims.num_states) {
            crate::mdp::check_distribution("model row", row, tol)?;
        }
        Ok(Self {
            dims,
            transition_hat,
            counts,
            smoothing: w.smoothing,
        })
    }
}

impl<T: Scalar> From<ModelEstimate<T>> for ModelWire<T> {
    fn from(m: ModelEstimate<T>) -> Self {
        let ns = m.dims.num_states;
        ModelWire {
            num_states: ns,
            num_actions: m.dims.num_actions,
            transition: m
                .transition_hat
                .chunks(m.dims.num_actions * ns)
                .map(|b| nest(b, ns))
                .collect(),
            counts: nest(&m.counts, m.dims.num_actions),
            smoothing: m.smoothing,
        }
    }
}

impl<T: Scalar> ModelEstimate<T> {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// `n(s, a)`, row-major.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn smoothing(&self) -> T {
        self.smoothing
    }

    pub fn transition_row(&self, state: usize, action: usize) -> &[T] {
        let ns = self.dims.num_states;
        let start = self.dims.index(state, action) * ns;
        &self.transition_hat[start..start + ns]
    }

    /// The model as an MDP with zero reward, for planning and occupancy
    /// computations under `T_hat`.
    pub fn environment(&self, initial: Vec<T>, discount: T) -> Result<TabularMdp<T>> {
        TabularMdp::new(
            self.dims,
            self.transition_hat.clone(),
            vec![T::zero(); self.dims.pairs()],
            initial,
            discount,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Fits `T_hat(s'|s,a) = (count(s,a,s') + k) / (n(s,a) + k |S|)` on the union
/// of both datasets; pairs never visited get a uniform row.
pub fn fit_dynamics<T: Scalar>(
    expert: &Dataset,
    diverse: &Dataset,
    dims: Dims,
    smoothing: T,
) -> Result<ModelEstimate<T>> {
    dims.check_nonempty()?;
    if expert.is_empty() && diverse.is_empty() {
        return Err(ClareError::EmptyDataset("model fitting"));
    }
    if !(smoothing >= T::zero()) || !smoothing.is_finite() {
        return Err(ClareError::InvalidParameter(format!(
            "smoothing must be nonnegative, got {smoothing}"
        )));
    }
    expert.validate(dims)?;
    diverse.validate(dims)?;
    let ns = dims.num_states;
    let mut next_counts = vec![0u64; dims.pairs() * ns];
    let mut counts = vec![0u64; dims.pairs()];
    for t in expert.transitions.iter().chain(&diverse.transitions) {
        let idx = dims.index(t.state, t.action);
        counts[idx] += 1;
        next_counts[idx * ns + t.next_state] += 1;
    }
    let uniform = T::one() / T::from_usize(ns).unwrap();
    let ns_t = T::from_usize(ns).unwrap();
    let mut transition_hat = Vec::with_capacity(next_counts.len());
    for (idx, &n) in counts.iter().enumerate() {
        let row = &next_counts[idx * ns..(idx + 1) * ns];
        if n == 0 {
            transition_hat.extend(std::iter::repeat(uniform).take(ns));
        } else {
            let denom = T::from_u64(n).unwrap() + smoothing * ns_t;
            transition_hat.extend(
                row.iter()
                    .map(|&c| (T::from_u64(c).unwrap() + smoothing) / denom),
            );
        }
    }
    Ok(ModelEstimate {
        dims,
        transition_hat,
        counts,
        smoothing,
    })
}

/// Scale `C = 2 gamma / (1 - gamma)` relating dynamics error to return gap.
pub fn error_scale<T: Scalar>(gamma: T) -> T {
    T::lit(2.0) * gamma / (T::one() - gamma)
}

/// Per-pair model error `c(s,a)` and its minimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ErrorTable<T: Scalar> {
    pub dims: Dims,
    pub c: Vec<T>,
    pub c_min: T,
    pub gamma: T,
}

impl<T: Scalar> ErrorTable<T> {
    /// Builds a table from raw values; `c_min` is the minimum over all pairs.
    pub fn new(dims: Dims, c: Vec<T>, gamma: T) -> Result<Self> {
        dims.check_len("error table", c.len())?;
        if let Some(x) = c.iter().find(|x| !(**x >= T::zero())) {
            return Err(ClareError::InvalidParameter(format!(
                "model error must be nonnegative, got {x}"
            )));
        }
        let c_min = c.iter().copied().fold(T::infinity(), T::min);
        Ok(Self {
            dims,
            c,
            c_min,
            gamma,
        })
    }

    /// Value assigned to pairs without data support.
    pub fn sentinel() -> T {
        T::max_value()
    }

    #[inline]
    pub fn get(&self, state: usize, action: usize) -> T {
        self.c[self.dims.index(state, action)]
    }

    /// Divides every finite entry by the largest finite entry so supported
    /// pairs lie in `(0, 1]`; sentinels are kept.
    pub fn rescaled_to_unit_max(&self) -> Result<Self> {
        let sentinel = Self::sentinel();
        let max = self
            .c
            .iter()
            .copied()
            .filter(|&x| x < sentinel)
            .fold(T::zero(), T::max);
        if max <= T::zero() {
            return Ok(self.clone());
        }
        let c = self
            .c
            .iter()
            .map(|&x| if x < sentinel { x / max } else { x })
            .collect();
        Self::new(self.dims, c, self.gamma)
    }
}

/// Exact error `c(s,a) = C * TV(T(.|s,a), T_hat(.|s,a))`.
pub fn true_model_error<T: Scalar>(mdp: &TabularMdp<T>, model: &ModelEstimate<T>) -> Result<ErrorTable<T>> {
    check_same_dims(mdp.dims(), model.dims())?;
    let dims = mdp.dims();
    let scale = error_scale(mdp.discount());
    let mut c = Vec::with_capacity(dims.pairs());
    for s in 0..dims.num_states {
        for a in 0..dims.num_actions {
            c.push(scale * tv_distance(mdp.transition_row(s, a), model.transition_row(s, a))?);
        }
    }
    ErrorTable::new(dims, c, mdp.discount())
}

/// Concentration constant `C_delta = sqrt(2 ln(2^|S| |S| |A| / delta))`.
pub fn concentration_constant<T: Scalar>(dims: Dims, delta: T) -> T {
    let s = T::from_usize(dims.num_states).unwrap();
    let sa = T::from_usize(dims.pairs()).unwrap();
    (T::lit(2.0) * (s * T::LN_2() + (sa / delta).ln())).sqrt()
}

/// Count-based surrogate `c(s,a) = C * C_delta / sqrt(n(s,a))`; unvisited
/// pairs get [`ErrorTable::sentinel`].
pub fn count_uncertainty<T: Scalar>(model: &ModelEstimate<T>, delta: T, gamma: T) -> Result<ErrorTable<T>> {
    if !(delta > T::zero() && delta < T::one()) {
        return Err(ClareError::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if !(gamma > T::zero() && gamma < T::one()) {
        return Err(ClareError::InvalidParameter(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )));
    }
    let k = error_scale(gamma) * concentration_constant(model.dims(), delta);
    let c = model
        .counts()
        .iter()
        .map(|&n| {
            if n == 0 {
                ErrorTable::<T>::sentinel()
            } else {
                k / T::from_u64(n).unwrap().sqrt()
            }
        })
        .collect();
    ErrorTable::new(model.dims(), c, gamma)
}
