//! Scalar abstraction over the floating-point type used by the numeric core.
//!
//! Every table, solver, and estimator in this crate is generic over [`Scalar`]
//! so the same code runs in `f32` or `f64`. The crate root exports `f64`
//! aliases for the common case; the published tolerances (LP feasibility,
//! aggregation checks) assume `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion of an `f64` constant (tolerances, literals).
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("constant not representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn of_usize(value: usize) -> Self {
        Self::from_f64(value as f64).expect("usize not representable in scalar type")
    }

    /// A validation tolerance: the stated `base` (chosen for `f64`) floored
    /// at 512 machine epsilons so narrower scalars keep the same checks at
    /// their own resolution.
    fn tol(base: f64) -> Self {
        Self::of(base).max(Self::epsilon() * Self::of(512.0))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Stable-ordering comparator for sorting scalar slices (NaNs sort last).
pub fn total_cmp<T: Scalar>(a: &T, b: &T) -> std::cmp::Ordering {
    a.partial_cmp(b).unwrap_or_else(|| {
        if a.is_nan() && b.is_nan() {
            std::cmp::Ordering::Equal
        } else if a.is_nan() {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Less
        }
    })
}
