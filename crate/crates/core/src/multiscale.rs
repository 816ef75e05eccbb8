//! Renormalization-style solvers for multiscale entropy problems.
//!
//! Every solver runs the same three phases against a [`Backend`]:
//! start from the microscopic Gibbs distribution, coarse-grain and
//! renormalize (scale or tilt toward the reference) once per scale, then
//! refine back down by concatenating reverse conditionals.

use crate::error::{Error, Result};
use crate::gaussian::{concat, gibbs_gaussian, gibbs_gaussian_flat, scale_gaussian, tilt_gaussian};
use crate::gaussian::{BlockPartition, GaussianDist, QuadraticEnergy};
use crate::scalar::Scalar;
use crate::schedule::TemperatureSchedule;
use crate::tabular::{self, decimation_chain, validate_chain, EnergyTable, ProductSpace, ScaleMap, TabularDist};

/// Distribution family on which the multiscale solvers can run.
///
/// Scales are numbered `1..=depth()`; `coarse_grain(p, i)` applies the scale
/// transformation `T_i`, mapping a scale-`i` distribution to scale `i + 1`.
pub trait Backend<T: Scalar> {
    type Dist: Clone;
    type Energy;

    fn depth(&self) -> usize;

    /// Whether every scale transformation drops the last coordinate block.
    fn is_decimation(&self) -> bool;

    /// `exp(-beta f) reference / Z`; a missing reference means the uniform (counting or Lebesgue) measure.
    fn gibbs(&self, energy: &Self::Energy, reference: Option<&Self::Dist>, beta: T) -> Result<Self::Dist>;

    fn coarse_grain(&self, dist: &Self::Dist, step: usize) -> Result<Self::Dist>;

    fn scale(&self, dist: &Self::Dist, theta: T) -> Result<Self::Dist>;

    fn tilt(&self, dist: &Self::Dist, reference: &Self::Dist, theta: T) -> Result<Self::Dist>;

    /// Joint law of `coarse` at scale `step + 1` followed by the reverse conditional of `fine` under `T_step`.
    fn refine(&self, coarse: &Self::Dist, fine: &Self::Dist, step: usize) -> Result<Self::Dist>;
}

/// Solver output together with the intermediate distributions `U^(1) .. U^(d)`.
#[derive(Debug, Clone)]
pub struct Solution<D> {
    pub distribution: D,
    pub intermediates: Vec<D>,
}

fn check_depth<T: Scalar, B: Backend<T>>(backend: &B, sched: &TemperatureSchedule<T>) -> Result<()> {
    if backend.depth() != sched.depth() {
        return Err(Error::InvalidSchedule(format!(
            "schedule has {} scales, backend has {}",
            sched.depth(),
            backend.depth()
        )));
    }
    Ok(())
}

fn renormalize<T: Scalar, B: Backend<T>>(
    backend: &B,
    gibbs: B::Dist,
    reference: Option<&B::Dist>,
    sched: &TemperatureSchedule<T>,
) -> Result<Solution<B::Dist>> {
    check_depth(backend, sched)?;
    let d = sched.depth();
    let mut intermediates = Vec::with_capacity(d);
    intermediates.push(gibbs);
    let mut reference = reference.cloned();
    for i in 2..=d {
        let coarse = backend.coarse_grain(&intermediates[i - 2], i - 1)?;
        let tau = sched.tilting_index(i);
        let next = match reference.as_mut() {
            Some(q) => {
                *q = backend.coarse_grain(q, i - 1)?;
                backend.tilt(&coarse, q, tau)?
            }
            None => backend.scale(&coarse, tau)?,
        };
        intermediates.push(next);
    }
    // trailing scales with tilting index 1 are plain marginals of their predecessor
    let top = (2..=d).rev().find(|&i| sched.tilting_index(i) != T::one()).unwrap_or(1);
    let mut distribution = intermediates[top - 1].clone();
    for step in (1..top).rev() {
        distribution = backend.refine(&distribution, &intermediates[step - 1], step)?;
    }
    Ok(Solution {
        distribution,
        intermediates,
    })
}

/// Maximizer of `H_(sigma,T)(W) - lambda E[f(W)]`.
pub fn solve_max_entropy<T: Scalar, B: Backend<T>>(
    energy: &B::Energy,
    sched: &TemperatureSchedule<T>,
    backend: &B,
) -> Result<Solution<B::Dist>> {
    check_depth(backend, sched)?;
    let beta = sched.lambda() / sched.sigma()[0];
    let gibbs = backend.gibbs(energy, None, beta)?;
    renormalize(backend, gibbs, None, sched)
}

/// Minimizer of `E[f(W)] + lambda D_(sigma,T)(P || Q)`.
pub fn solve_min_relative_entropy<T: Scalar, B: Backend<T>>(
    energy: &B::Energy,
    reference: &B::Dist,
    sched: &TemperatureSchedule<T>,
    backend: &B,
) -> Result<Solution<B::Dist>> {
    check_depth(backend, sched)?;
    let beta = T::one() / (sched.lambda() * sched.sigma()[0]);
    let gibbs = backend.gibbs(energy, Some(reference), beta)?;
    renormalize(backend, gibbs, Some(reference), sched)
}

/// Marginalize-tilt: the decimation case, starting from a precomputed microscopic Gibbs distribution.
pub fn solve_mt<T: Scalar, B: Backend<T>>(
    gibbs: &B::Dist,
    reference: &B::Dist,
    sched: &TemperatureSchedule<T>,
    backend: &B,
) -> Result<Solution<B::Dist>> {
    if !backend.is_decimation() {
        return Err(Error::NotDecimation);
    }
    renormalize(backend, gibbs.clone(), Some(reference), sched)
}

/// Exact backend over a finite product alphabet with an arbitrary chain of scale maps.
#[derive(Debug, Clone)]
pub struct TabularBackend {
    space: ProductSpace,
    chain: Vec<ScaleMap>,
}

impl TabularBackend {
    pub fn new(space: ProductSpace, chain: Vec<ScaleMap>) -> Result<Self> {
        validate_chain(&space, &chain)?;
        Ok(Self { space, chain })
    }

    /// Chain that drops one axis per scale.
    pub fn decimation(space: ProductSpace) -> Self {
        let chain = decimation_chain(&space);
        Self { space, chain }
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn chain(&self) -> &[ScaleMap] {
        &self.chain
    }

    fn map(&self, step: usize) -> Result<&ScaleMap> {
        step.checked_sub(1)
            .and_then(|k| self.chain.get(k))
            .ok_or_else(|| Error::InvalidSchedule(format!("no scale transformation {step}")))
    }
}

impl<T: Scalar> Backend<T> for TabularBackend {
    type Dist = TabularDist<T>;
    type Energy = EnergyTable<T>;

    fn depth(&self) -> usize {
        self.chain.len() + 1
    }

    fn is_decimation(&self) -> bool {
        self.chain.iter().all(ScaleMap::is_decimation)
    }

    fn gibbs(&self, energy: &EnergyTable<T>, reference: Option<&TabularDist<T>>, beta: T) -> Result<TabularDist<T>> {
        if energy.space() != &self.space {
            return Err(Error::SpaceMismatch("energy does not live on the backend space".into()));
        }
        match reference {
            Some(q) => tabular::gibbs(energy, q, beta),
            None => tabular::gibbs(energy, &TabularDist::uniform(self.space.clone()), beta),
        }
    }

    fn coarse_grain(&self, dist: &TabularDist<T>, step: usize) -> Result<TabularDist<T>> {
        tabular::pushforward(dist, self.map(step)?)
    }

    fn scale(&self, dist: &TabularDist<T>, theta: T) -> Result<TabularDist<T>> {
        tabular::scale(dist, theta)
    }

    fn tilt(&self, dist: &TabularDist<T>, reference: &TabularDist<T>, theta: T) -> Result<TabularDist<T>> {
        tabular::tilt(dist, reference, theta)
    }

    fn refine(&self, coarse: &TabularDist<T>, fine: &TabularDist<T>, step: usize) -> Result<TabularDist<T>> {
        let cond = tabular::reverse_conditional(fine, self.map(step)?)?;
        tabular::refine_step(coarse, &cond)
    }
}

/// Gaussian backend over weights split into blocks `W_1 .. W_d`; scale `i` keeps `W_1 .. W_{d-i+1}`.
#[derive(Debug, Clone)]
pub struct GaussianBackend {
    partition: BlockPartition,
}

impl GaussianBackend {
    pub fn new(partition: BlockPartition) -> Self {
        Self { partition }
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    /// Number of coordinates kept at scale `i`.
    pub fn dim_at_scale(&self, i: usize) -> usize {
        self.partition.prefix_dim(self.partition.num_blocks() + 1 - i)
    }
}

impl<T: Scalar> Backend<T> for GaussianBackend {
    type Dist = GaussianDist<T>;
    type Energy = QuadraticEnergy<T>;

    fn depth(&self) -> usize {
        self.partition.num_blocks()
    }

    fn is_decimation(&self) -> bool {
        true
    }

    fn gibbs(
        &self,
        energy: &QuadraticEnergy<T>,
        reference: Option<&GaussianDist<T>>,
        beta: T,
    ) -> Result<GaussianDist<T>> {
        self.partition.check_dim(energy.dim())?;
        match reference {
            Some(prior) => gibbs_gaussian(energy, prior, beta),
            None => gibbs_gaussian_flat(energy, beta),
        }
    }

    fn coarse_grain(&self, dist: &GaussianDist<T>, step: usize) -> Result<GaussianDist<T>> {
        if step == 0 || step >= self.partition.num_blocks() {
            return Err(Error::InvalidSchedule(format!("no scale transformation {step}")));
        }
        let expected = self.dim_at_scale(step);
        if dist.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: dist.dim(),
            });
        }
        dist.marginalize_coords(0..self.dim_at_scale(step + 1))
    }

    fn scale(&self, dist: &GaussianDist<T>, theta: T) -> Result<GaussianDist<T>> {
        scale_gaussian(dist, theta)
    }

    fn tilt(&self, dist: &GaussianDist<T>, reference: &GaussianDist<T>, theta: T) -> Result<GaussianDist<T>> {
        tilt_gaussian(dist, reference, theta)
    }

    fn refine(&self, coarse: &GaussianDist<T>, fine: &GaussianDist<T>, _step: usize) -> Result<GaussianDist<T>> {
        concat(coarse, fine)
    }
}
