//! Floating-point scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Numeric tolerances used across the crate.
///
/// Every comparison threshold lives here so that a scalar type can carry its
/// own precision budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Allowed deviation of a probability table's total mass from one.
    pub normalization: f64,
    /// Tolerance for algebraic identities between computed quantities.
    pub identity: f64,
    /// Allowed asymmetry of a covariance or energy matrix, relative to its largest entry.
    pub symmetry: f64,
    /// Smallest admissible Cholesky pivot, relative to the largest diagonal entry.
    pub pivot_floor: f64,
    /// Eigenvalues of an energy curvature matrix above `-psd_floor` are clipped to zero.
    pub psd_floor: f64,
}

impl Tolerances {
    pub const F64: Tolerances = Tolerances {
        normalization: 1e-12,
        identity: 1e-10,
        symmetry: 1e-10,
        pivot_floor: 1e-12,
        psd_floor: 1e-8,
    };

    pub const F32: Tolerances = Tolerances {
        normalization: 1e-5,
        identity: 1e-4,
        symmetry: 1e-5,
        pivot_floor: 1e-6,
        psd_floor: 1e-4,
    };
}

/// Real scalar usable throughout the crate (implemented for `f32` and `f64`).
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    const TOL: Tolerances;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const TOL: Tolerances = Tolerances::F64;
}

impl Scalar for f32 {
    const TOL: Tolerances = Tolerances::F32;
}

/// `x * ln x` with the convention `0 ln 0 = 0`.
#[inline]
pub(crate) fn xlogx<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x * x.ln()
    } else {
        T::zero()
    }
}

/// `x^theta` with `0^theta = 0` for positive `theta`.
#[inline]
pub(crate) fn pow_or_zero<T: Scalar>(x: T, theta: T) -> T {
    if x > T::zero() {
        x.powf(theta)
    } else {
        T::zero()
    }
}

/// Numerically stable `ln Σ exp(v)` over the finite entries of `values`.
pub(crate) fn log_sum_exp<T: Scalar>(values: impl IntoIterator<Item = T> + Clone) -> T {
    let max = values
        .clone()
        .into_iter()
        .filter(|v| v.is_finite())
        .fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return T::neg_infinity();
    }
    let total: T = values
        .into_iter()
        .filter(|v| v.is_finite())
        .map(|v| (v - max).exp())
        .sum();
    max + total.ln()
}
