use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Length coefficients `sigma_1..sigma_d` together with the Lagrange weight `lambda`.
///
/// The tilting index used when passing from scale `i - 1` to scale `i` is
/// `(sigma_1 + .. + sigma_{i-1}) / (sigma_1 + .. + sigma_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule<T>", into = "RawSchedule<T>")]
#[serde(bound = "T: Scalar")]
pub struct TemperatureSchedule<T> {
    lambda: T,
    sigma: Vec<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct RawSchedule<T> {
    lambda: T,
    sigma: Vec<T>,
}

impl<T: Scalar> TryFrom<RawSchedule<T>> for TemperatureSchedule<T> {
    type Error = Error;
    fn try_from(raw: RawSchedule<T>) -> Result<Self> {
        Self::new(raw.lambda, raw.sigma)
    }
}

impl<T: Scalar> From<TemperatureSchedule<T>> for RawSchedule<T> {
    fn from(s: TemperatureSchedule<T>) -> Self {
        RawSchedule {
            lambda: s.lambda,
            sigma: s.sigma,
        }
    }
}

impl<T: Scalar> TemperatureSchedule<T> {
    pub fn new(lambda: T, sigma: Vec<T>) -> Result<Self> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidSchedule(format!("lambda must be positive, got {lambda}")));
        }
        let Some(&first) = sigma.first() else {
            return Err(Error::InvalidSchedule("sigma is empty".into()));
        };
        if !(first > T::zero()) {
            return Err(Error::InvalidSchedule(format!("sigma_1 must be positive, got {first}")));
        }
        if let Some(bad) = sigma.iter().find(|s| !(**s >= T::zero()) || !s.is_finite()) {
            return Err(Error::InvalidSchedule(format!(
                "sigma entries must be finite and nonnegative, got {bad}"
            )));
        }
        Ok(Self { lambda, sigma })
    }

    /// Single-scale schedule `(sigma_1, 0, .., 0)`.
    pub fn single_scale(lambda: T, sigma1: T, depth: usize) -> Result<Self> {
        let mut sigma = vec![T::zero(); depth.max(1)];
        sigma[0] = sigma1;
        Self::new(lambda, sigma)
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn sigma(&self) -> &[T] {
        &self.sigma
    }

    /// Number of scales `d`.
    pub fn depth(&self) -> usize {
        self.sigma.len()
    }

    /// Tilting index for scale `i` (1-based, `2 <= i <= d`).
    ///
    /// A vanishing `sigma_i` yields exactly 1.
    pub fn tilting_index(&self, i: usize) -> T {
        assert!(i >= 2 && i <= self.depth(), "scale index {i} out of range");
        if self.sigma[i - 1] == T::zero() {
            return T::one();
        }
        let before: T = self.sigma[..i - 1].iter().copied().sum();
        before / (before + self.sigma[i - 1])
    }

    /// All tilting indices `tau_2 .. tau_d`.
    pub fn tilting_indices(&self) -> Vec<T> {
        (2..=self.depth()).map(|i| self.tilting_index(i)).collect()
    }

    /// The temperature vector `(lambda sigma_1, .., lambda sigma_d)`.
    pub fn temperatures(&self) -> Vec<T> {
        self.sigma.iter().map(|&s| s * self.lambda).collect()
    }
}

/// Schedule whose tilting indices all equal `1 - alpha`:
/// `sigma_i = alpha sigma_1 (1 - alpha)^{-(i-1)}` for `i >= 2`.
pub fn alpha_schedule<T: Scalar>(alpha: T, sigma1: T, depth: usize) -> Result<TemperatureSchedule<T>> {
    alpha_schedule_with_lambda(alpha, sigma1, depth, T::one())
}

pub fn alpha_schedule_with_lambda<T: Scalar>(
    alpha: T,
    sigma1: T,
    depth: usize,
    lambda: T,
) -> Result<TemperatureSchedule<T>> {
    if !(alpha >= T::zero() && alpha < T::one()) {
        return Err(Error::InvalidSchedule(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    if depth == 0 {
        return Err(Error::InvalidSchedule("depth must be at least 1".into()));
    }
    let keep = T::one() - alpha;
    let sigma = (0..depth)
        .map(|k| {
            if k == 0 {
                sigma1
            } else {
                alpha * sigma1 / keep.powi(k as i32)
            }
        })
        .collect();
    TemperatureSchedule::new(lambda, sigma)
}
