//! The generalized Gini function and its weight vectors.
//!
//! `ggf(v, w)` sorts the utility vector ascending and takes the weighted sum
//! against a non-increasing weight vector, i.e. the minimum over all
//! permutations of the weighted sum. Equal weights recover the utilitarian
//! mean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{total_cmp, Scalar};

/// Sum tolerance for validated weight vectors.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Nonnegative, non-increasing weights summing to one.
///
/// Construction rejects out-of-order weights instead of sorting them; a
/// silently reordered vector would mask caller bugs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GgfWeights<T> {
    weights: Vec<T>,
}

impl<T: Scalar> GgfWeights<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidModel("empty weight vector".into()));
        }
        let mut sum = T::zero();
        for (i, &w) in weights.iter().enumerate() {
            if w < T::zero() {
                return Err(Error::InvalidModel(format!("weight {i} is negative")));
            }
            if i > 0 && w > weights[i - 1] {
                return Err(Error::InvalidModel(format!(
                    "weights must be non-increasing, w[{i}] > w[{}]",
                    i - 1
                )));
            }
            sum += w;
        }
        if (sum - T::one()).abs() > T::tol(WEIGHT_SUM_TOL) {
            return Err(Error::InvalidModel(format!("weights sum to {sum}")));
        }
        Ok(Self { weights })
    }

    /// Weights proportional to `factor^(-n)`, normalized. Strictly decreasing
    /// for `factor > 1`.
    pub fn exponential(n: usize, factor: T) -> Self {
        assert!(n >= 1, "need at least one weight");
        assert!(factor > T::one(), "decay factor must exceed one");
        let mut raw = Vec::with_capacity(n);
        let mut value = T::one();
        for _ in 0..n {
            value /= factor;
            raw.push(value);
        }
        let total: T = raw.iter().copied().sum();
        for w in &mut raw {
            *w /= total;
        }
        Self { weights: raw }
    }

    /// Equal weights `1/n`: the utilitarian special case.
    pub fn utilitarian(n: usize) -> Self {
        assert!(n >= 1, "need at least one weight");
        Self {
            weights: vec![T::one() / T::of_usize(n); n],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.weights
    }
}

/// Generalized Gini welfare of `values` under `weights`.
///
/// Ties in the sort do not affect the result: the weighted sum over a sorted
/// multiset is the same for any stable ordering of equal entries.
pub fn ggf<T: Scalar>(values: &[T], weights: &GgfWeights<T>) -> Result<T> {
    if values.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: weights.len(),
            got: values.len(),
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(total_cmp);
    Ok(sorted
        .iter()
        .zip(weights.as_slice())
        .map(|(&v, &w)| v * w)
        .sum())
}
