//! Maximum multiscale entropy and minimum multiscale relative entropy
//! distributions, computed with renormalization-style algorithms, together
//! with the Gaussian algebra, residual-network utilities and excess-risk
//! bounds needed for multiscale Gibbs posteriors.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the common double-precision case.
//!
//! ```
//! use msent::tabular::decimation_chain;
//! use msent::{solve_min_relative_entropy, EnergyTable64, ProductSpace, TabularBackend, TabularDist64, TemperatureSchedule64};
//!
//! # fn main() -> msent::Result<()> {
//! let space = ProductSpace::new(vec![2, 2])?;
//! let backend = TabularBackend::new(space.clone(), decimation_chain(&space))?;
//! let f = EnergyTable64::new(space.clone(), vec![0.0, 1.0, -0.5, 0.3])?;
//! let q = TabularDist64::uniform(space);
//! let sched = TemperatureSchedule64::new(1.0, vec![0.6, 0.9])?;
//! let sol = solve_min_relative_entropy(&f, &q, &sched, &backend)?;
//! assert!((sol.distribution.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
//! # Ok(())
//! # }
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod experiment;
pub mod gaussian;
pub mod linalg;
pub mod multiscale;
pub mod nn;
pub mod oracle;
pub mod scalar;
pub mod schedule;
pub mod tabular;

pub use error::{Error, Result};
pub use gaussian::{BlockPartition, GaussianConditional, GaussianDist, QuadraticEnergy};
pub use linalg::Matrix;
pub use multiscale::{
    solve_max_entropy, solve_min_relative_entropy, solve_mt, Backend, GaussianBackend, Solution, TabularBackend,
};
pub use scalar::{Scalar, Tolerances};
pub use schedule::{alpha_schedule, TemperatureSchedule};
pub use tabular::{ConditionalTable, EnergyTable, ProductSpace, ScaleMap, TabularDist};

/// Library version, embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type TabularDist64 = TabularDist<f64>;
pub type EnergyTable64 = EnergyTable<f64>;
pub type GaussianDist64 = GaussianDist<f64>;
pub type QuadraticEnergy64 = QuadraticEnergy<f64>;
pub type TemperatureSchedule64 = TemperatureSchedule<f64>;
pub type Matrix64 = Matrix<f64>;

pub type TabularDist32 = TabularDist<f32>;
pub type GaussianDist32 = GaussianDist<f32>;
