//! Exact probability computations on finite product alphabets.
//!
//! A [`ProductSpace`] indexes joint outcomes in row-major order (last axis
//! fastest). Distributions, energies and deterministic coarse-grainings
//! ([`ScaleMap`]) are stored densely over that index. Zero probabilities
//! follow the conventions `0 ln 0 = 0` and `0^theta = 0` for `theta > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, pow_or_zero, xlogx, Scalar};
use crate::schedule::TemperatureSchedule;

/// Default upper bound on the number of joint states.
pub const DEFAULT_SPACE_CAP: usize = 1_000_000;

/// Finite product alphabet `W_1 x .. x W_d`, each axis indexed `0..size`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ProductSpace {
    axis_sizes: Vec<usize>,
    size: usize,
}

impl TryFrom<Vec<usize>> for ProductSpace {
    type Error = Error;
    fn try_from(axes: Vec<usize>) -> Result<Self> {
        Self::new(axes)
    }
}

impl From<ProductSpace> for Vec<usize> {
    fn from(s: ProductSpace) -> Self {
        s.axis_sizes
    }
}

impl ProductSpace {
    pub fn new(axis_sizes: Vec<usize>) -> Result<Self> {
        Self::with_cap(axis_sizes, DEFAULT_SPACE_CAP)
    }

    pub fn with_cap(axis_sizes: Vec<usize>, cap: usize) -> Result<Self> {
        if axis_sizes.is_empty() {
            return Err(Error::InvalidSpace("no axes".into()));
        }
        if axis_sizes.contains(&0) {
            return Err(Error::InvalidSpace(format!("zero-sized axis in {axis_sizes:?}")));
        }
        let size = axis_sizes
            .iter()
            .try_fold(1usize, |acc, &s| acc.checked_mul(s))
            .filter(|&s| s <= cap)
            .ok_or(Error::SpaceTooLarge {
                size: axis_sizes.iter().fold(1usize, |a, &s| a.saturating_mul(s)),
                cap,
            })?;
        Ok(Self { axis_sizes, size })
    }

    /// Single-axis space with `n` outcomes.
    pub fn flat(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    pub fn axis_sizes(&self) -> &[usize] {
        &self.axis_sizes
    }

    pub fn num_axes(&self) -> usize {
        self.axis_sizes.len()
    }

    /// Total number of joint states.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Row-major joint index of a coordinate tuple.
    pub fn index_of(&self, coords: &[usize]) -> usize {
        assert_eq!(coords.len(), self.axis_sizes.len());
        coords.iter().zip(&self.axis_sizes).fold(0, |acc, (&c, &s)| {
            assert!(c < s, "coordinate {c} out of range {s}");
            acc * s + c
        })
    }

    /// Coordinate tuple of a joint index.
    pub fn coords_of(&self, mut index: usize) -> Vec<usize> {
        let mut coords = vec![0; self.axis_sizes.len()];
        for (c, &s) in coords.iter_mut().zip(&self.axis_sizes).rev() {
            *c = index % s;
            index /= s;
        }
        coords
    }

    /// The space obtained by dropping the last axis, or `None` for a single-axis space.
    pub fn decimated(&self) -> Option<ProductSpace> {
        (self.axis_sizes.len() > 1).then(|| ProductSpace {
            axis_sizes: self.axis_sizes[..self.axis_sizes.len() - 1].to_vec(),
            size: self.size / self.axis_sizes[self.axis_sizes.len() - 1],
        })
    }
}

fn check_same_space(a: &ProductSpace, b: &ProductSpace) -> Result<()> {
    if a != b {
        return Err(Error::SpaceMismatch(format!(
            "{:?} vs {:?}",
            a.axis_sizes(),
            b.axis_sizes()
        )));
    }
    Ok(())
}

/// Probability table over a [`ProductSpace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDist<T>", into = "RawDist<T>")]
#[serde(bound = "T: Scalar")]
pub struct TabularDist<T> {
    space: ProductSpace,
    probs: Vec<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct RawDist<T> {
    axis_sizes: ProductSpace,
    probs: Vec<T>,
}

impl<T: Scalar> TryFrom<RawDist<T>> for TabularDist<T> {
    type Error = Error;
    fn try_from(raw: RawDist<T>) -> Result<Self> {
        Self::new(raw.axis_sizes, raw.probs)
    }
}

impl<T: Scalar> From<TabularDist<T>> for RawDist<T> {
    fn from(d: TabularDist<T>) -> Self {
        RawDist {
            axis_sizes: d.space,
            probs: d.probs,
        }
    }
}

impl<T: Scalar> TabularDist<T> {
    /// Validates nonnegativity and unit mass.
    pub fn new(space: ProductSpace, probs: Vec<T>) -> Result<Self> {
        if probs.len() != space.size() {
            return Err(Error::DimensionMismatch {
                expected: space.size(),
                got: probs.len(),
            });
        }
        for (index, &p) in probs.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if p < T::zero() {
                return Err(Error::NegativeProbability {
                    index,
                    value: p.to_f64_lossy(),
                });
            }
        }
        let sum: T = probs.iter().copied().sum();
        if (sum - T::one()).abs() > T::lit(T::TOL.normalization) {
            return Err(Error::NotNormalized {
                sum: sum.to_f64_lossy(),
            });
        }
        Ok(Self { space, probs })
    }

    /// Normalizes nonnegative weights into a distribution.
    pub fn from_weights(space: ProductSpace, weights: Vec<T>) -> Result<Self> {
        if weights.len() != space.size() {
            return Err(Error::DimensionMismatch {
                expected: space.size(),
                got: weights.len(),
            });
        }
        for (index, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if w < T::zero() {
                return Err(Error::NegativeProbability {
                    index,
                    value: w.to_f64_lossy(),
                });
            }
        }
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::VanishingPartitionFunction);
        }
        Ok(Self {
            space,
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    /// Normalizes `exp(log_weights)`; `-inf` entries get probability zero.
    pub fn from_log_weights(space: ProductSpace, log_weights: &[T]) -> Result<Self> {
        let lse = log_sum_exp(log_weights.iter().copied());
        if !lse.is_finite() {
            return Err(Error::VanishingPartitionFunction);
        }
        let probs = log_weights
            .iter()
            .map(|&lw| if lw.is_finite() { (lw - lse).exp() } else { T::zero() })
            .collect();
        Self::from_weights(space, probs)
    }

    pub fn uniform(space: ProductSpace) -> Self {
        let n = space.size();
        let p = T::one() / T::from_usize_lossy(n);
        Self {
            space,
            probs: vec![p; n],
        }
    }

    pub fn point_mass(space: ProductSpace, index: usize) -> Self {
        let mut probs = vec![T::zero(); space.size()];
        probs[index] = T::one();
        Self { space, probs }
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn prob(&self, index: usize) -> T {
        self.probs[index]
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > T::zero())
            .map(|(i, _)| i)
    }

    /// Total variation distance `1/2 Σ |p - q|`.
    pub fn total_variation(&self, other: &Self) -> Result<T> {
        check_same_space(&self.space, &other.space)?;
        let s: T = self.probs.iter().zip(&other.probs).map(|(&a, &b)| (a - b).abs()).sum();
        Ok(s * T::lit(0.5))
    }
}

/// Energy `f(w)` tabulated over a product space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnergy<T>", into = "RawEnergy<T>")]
#[serde(bound = "T: Scalar")]
pub struct EnergyTable<T> {
    space: ProductSpace,
    values: Vec<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct RawEnergy<T> {
    axis_sizes: ProductSpace,
    values: Vec<T>,
}

impl<T: Scalar> TryFrom<RawEnergy<T>> for EnergyTable<T> {
    type Error = Error;
    fn try_from(raw: RawEnergy<T>) -> Result<Self> {
        Self::new(raw.axis_sizes, raw.values)
    }
}

impl<T: Scalar> From<EnergyTable<T>> for RawEnergy<T> {
    fn from(e: EnergyTable<T>) -> Self {
        RawEnergy {
            axis_sizes: e.space,
            values: e.values,
        }
    }
}

impl<T: Scalar> EnergyTable<T> {
    pub fn new(space: ProductSpace, values: Vec<T>) -> Result<Self> {
        if values.len() != space.size() {
            return Err(Error::DimensionMismatch {
                expected: space.size(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { space, values })
    }

    pub fn constant(space: ProductSpace, value: T) -> Self {
        let n = space.size();
        Self {
            space,
            values: vec![value; n],
        }
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `E_p[f]`.
    pub fn expectation(&self, p: &TabularDist<T>) -> Result<T> {
        check_same_space(&self.space, p.space())?;
        Ok(self
            .values
            .iter()
            .zip(p.probs())
            .map(|(&f, &q)| if q > T::zero() { f * q } else { T::zero() })
            .sum())
    }
}

/// Deterministic coarse-graining between two product spaces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawScaleMap", into = "RawScaleMap")]
pub struct ScaleMap {
    source: ProductSpace,
    target: ProductSpace,
    map: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawScaleMap {
    axis_sizes: ProductSpace,
    target_axis_sizes: ProductSpace,
    map: Vec<usize>,
}

impl TryFrom<RawScaleMap> for ScaleMap {
    type Error = Error;
    fn try_from(raw: RawScaleMap) -> Result<Self> {
        Self::new(raw.axis_sizes, raw.target_axis_sizes, raw.map)
    }
}

impl From<ScaleMap> for RawScaleMap {
    fn from(m: ScaleMap) -> Self {
        RawScaleMap {
            axis_sizes: m.source,
            target_axis_sizes: m.target,
            map: m.map,
        }
    }
}

impl ScaleMap {
    pub fn new(source: ProductSpace, target: ProductSpace, map: Vec<usize>) -> Result<Self> {
        if map.len() != source.size() {
            return Err(Error::DimensionMismatch {
                expected: source.size(),
                got: map.len(),
            });
        }
        if let Some(&bad) = map.iter().find(|&&j| j >= target.size()) {
            return Err(Error::SpaceMismatch(format!(
                "map entry {bad} outside target of size {}",
                target.size()
            )));
        }
        Ok(Self { source, target, map })
    }

    /// Builds a map from a function on coordinate tuples.
    pub fn from_coords(source: ProductSpace, target: ProductSpace, f: impl Fn(&[usize]) -> Vec<usize>) -> Result<Self> {
        let map = (0..source.size())
            .map(|i| target.index_of(&f(&source.coords_of(i))))
            .collect();
        Self::new(source, target, map)
    }

    pub fn identity(space: ProductSpace) -> Self {
        let map = (0..space.size()).collect();
        Self {
            source: space.clone(),
            target: space,
            map,
        }
    }

    /// Projection that drops the last axis.
    pub fn decimation(space: &ProductSpace) -> Result<Self> {
        let target = space
            .decimated()
            .ok_or_else(|| Error::InvalidSpace("cannot decimate a single-axis space".into()))?;
        let last = space.axis_sizes()[space.num_axes() - 1];
        let map = (0..space.size()).map(|i| i / last).collect();
        Ok(Self {
            source: space.clone(),
            target,
            map,
        })
    }

    pub fn source(&self) -> &ProductSpace {
        &self.source
    }

    pub fn target(&self) -> &ProductSpace {
        &self.target
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    #[inline]
    pub fn apply(&self, index: usize) -> usize {
        self.map[index]
    }

    /// Whether this map drops exactly the last axis of its source.
    pub fn is_decimation(&self) -> bool {
        ScaleMap::decimation(&self.source).is_ok_and(|d| d == *self)
    }
}

/// Chain of decimations `W -> (W_1..W_{d-1}) -> .. -> W_1`.
pub fn decimation_chain(space: &ProductSpace) -> Vec<ScaleMap> {
    let mut chain = Vec::with_capacity(space.num_axes().saturating_sub(1));
    let mut current = space.clone();
    while let Ok(map) = ScaleMap::decimation(&current) {
        current = map.target().clone();
        chain.push(map);
    }
    chain
}

/// Checks that `chain` starts at `space` and each map feeds the next one.
pub fn validate_chain(space: &ProductSpace, chain: &[ScaleMap]) -> Result<()> {
    let mut current = space;
    for (k, map) in chain.iter().enumerate() {
        if map.source() != current {
            return Err(Error::SpaceMismatch(format!(
                "scale map {k} expects source {:?}, chain provides {:?}",
                map.source().axis_sizes(),
                current.axis_sizes()
            )));
        }
        current = map.target();
    }
    Ok(())
}

/// Reverse conditional `P(W | T(W) = j)` of a distribution under a scale map.
///
/// Stored compactly: since `T` is deterministic, row `j` is supported on the
/// fiber `T^{-1}(j)`, where it equals `p(i) / p_T(j)`. Rows whose coarse
/// outcome has zero mass are undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTable<T> {
    map: ScaleMap,
    weights: Vec<T>,
    defined: Vec<bool>,
}

impl<T: Scalar> ConditionalTable<T> {
    /// Space of the conditioning (coarse) variable.
    pub fn given_space(&self) -> &ProductSpace {
        self.map.target()
    }

    /// Space of the conditioned (fine) variable.
    pub fn output_space(&self) -> &ProductSpace {
        self.map.source()
    }

    pub fn scale_map(&self) -> &ScaleMap {
        &self.map
    }

    pub fn is_defined(&self, row: usize) -> bool {
        self.defined[row]
    }

    /// Conditional probability of fine outcome `i` given coarse outcome `j`.
    pub fn prob(&self, j: usize, i: usize) -> Option<T> {
        if !self.defined[j] {
            return None;
        }
        Some(if self.map.apply(i) == j {
            self.weights[i]
        } else {
            T::zero()
        })
    }

    /// Row `j` as a distribution over the output space.
    pub fn row(&self, j: usize) -> Option<TabularDist<T>> {
        if !self.defined[j] {
            return None;
        }
        let probs = (0..self.output_space().size())
            .map(|i| {
                if self.map.apply(i) == j {
                    self.weights[i]
                } else {
                    T::zero()
                }
            })
            .collect();
        Some(TabularDist {
            space: self.output_space().clone(),
            probs,
        })
    }
}

/// Shannon entropy in nats.
pub fn shannon_entropy<T: Scalar>(p: &TabularDist<T>) -> T {
    -p.probs.iter().map(|&x| xlogx(x)).sum::<T>()
}

/// Relative entropy `D(p || q)` in nats.
pub fn kl<T: Scalar>(p: &TabularDist<T>, q: &TabularDist<T>) -> Result<T> {
    check_same_space(&p.space, &q.space)?;
    let mut total = T::zero();
    for (index, (&a, &b)) in p.probs.iter().zip(&q.probs).enumerate() {
        if a > T::zero() {
            if !(b > T::zero()) {
                return Err(Error::AbsoluteContinuityViolation {
                    index,
                    p: a.to_f64_lossy(),
                });
            }
            total += a * (a / b).ln();
        }
    }
    Ok(total.max(T::zero()))
}

/// Rényi entropy `1/(1-alpha) ln Σ p^alpha` for `alpha` in `(0,1) ∪ (1,∞)`.
pub fn renyi_entropy<T: Scalar>(p: &TabularDist<T>, order: T) -> Result<T> {
    if !(order > T::zero()) || order == T::one() || !order.is_finite() {
        return Err(Error::InvalidOrder(order.to_f64_lossy()));
    }
    let s: T = p.probs.iter().map(|&x| pow_or_zero(x, order)).sum();
    Ok(s.ln() / (T::one() - order))
}

/// Rényi divergence `1/(theta-1) ln Σ q^theta r^{1-theta}` for `theta` in `(0,1)`.
pub fn renyi_divergence<T: Scalar>(q: &TabularDist<T>, r: &TabularDist<T>, order: T) -> Result<T> {
    if !(order > T::zero() && order < T::one()) {
        return Err(Error::InvalidOrder(order.to_f64_lossy()));
    }
    check_same_space(&q.space, &r.space)?;
    let s: T = q
        .probs
        .iter()
        .zip(&r.probs)
        .map(|(&a, &b)| pow_or_zero(a, order) * pow_or_zero(b, T::one() - order))
        .sum();
    if !(s > T::zero()) {
        return Err(Error::EmptyGeometricMean);
    }
    Ok((s.ln() / (order - T::one())).max(T::zero()))
}

/// Scaled (escort) distribution `p^theta / Σ p^theta`.
pub fn scale<T: Scalar>(p: &TabularDist<T>, theta: T) -> Result<TabularDist<T>> {
    if !(theta > T::zero()) || !theta.is_finite() {
        return Err(Error::NonpositiveTheta(theta.to_f64_lossy()));
    }
    if theta == T::one() {
        return Ok(p.clone());
    }
    // ln-domain keeps tiny probabilities from underflowing at large theta
    let logs: Vec<T> = p
        .probs
        .iter()
        .map(|&x| {
            if x > T::zero() {
                theta * x.ln()
            } else {
                T::neg_infinity()
            }
        })
        .collect();
    let out = TabularDist::from_log_weights(p.space.clone(), &logs);
    debug_assert!(out.is_ok(), "a valid distribution always has positive scaled mass");
    out
}

/// Tilted distribution `p^theta q^{1-theta} / Σ p^theta q^{1-theta}`.
///
/// The endpoints return their argument verbatim; for interior `theta` the
/// support is `supp(p) ∩ supp(q)`.
pub fn tilt<T: Scalar>(p: &TabularDist<T>, q: &TabularDist<T>, theta: T) -> Result<TabularDist<T>> {
    check_same_space(&p.space, &q.space)?;
    if !(theta >= T::zero() && theta <= T::one()) {
        return Err(Error::InvalidTiltIndex(theta.to_f64_lossy()));
    }
    if theta == T::one() {
        return Ok(p.clone());
    }
    if theta == T::zero() {
        return Ok(q.clone());
    }
    let keep = T::one() - theta;
    let logs: Vec<T> = p
        .probs
        .iter()
        .zip(&q.probs)
        .map(|(&a, &b)| {
            if a > T::zero() && b > T::zero() {
                theta * a.ln() + keep * b.ln()
            } else {
                T::neg_infinity()
            }
        })
        .collect();
    TabularDist::from_log_weights(p.space.clone(), &logs).map_err(|e| match e {
        Error::VanishingPartitionFunction => Error::EmptyGeometricMean,
        other => other,
    })
}

/// Gibbs distribution `exp(-beta f) q / Z`.
pub fn gibbs<T: Scalar>(f: &EnergyTable<T>, q: &TabularDist<T>, beta: T) -> Result<TabularDist<T>> {
    check_same_space(&f.space, &q.space)?;
    if !(beta > T::zero()) || !beta.is_finite() {
        return Err(Error::NonpositiveTheta(beta.to_f64_lossy()));
    }
    let logs: Vec<T> = f
        .values
        .iter()
        .zip(&q.probs)
        .map(|(&e, &w)| {
            if w > T::zero() {
                w.ln() - beta * e
            } else {
                T::neg_infinity()
            }
        })
        .collect();
    TabularDist::from_log_weights(f.space.clone(), &logs)
}

/// Image measure of `p` under `t`.
pub fn pushforward<T: Scalar>(p: &TabularDist<T>, t: &ScaleMap) -> Result<TabularDist<T>> {
    check_same_space(&p.space, t.source())?;
    let mut probs = vec![T::zero(); t.target().size()];
    for (i, &x) in p.probs.iter().enumerate() {
        probs[t.apply(i)] += x;
    }
    Ok(TabularDist {
        space: t.target().clone(),
        probs,
    })
}

/// Marginals of `p` at every scale of the chain, finest first.
pub fn pushforward_chain<T: Scalar>(p: &TabularDist<T>, chain: &[ScaleMap]) -> Result<Vec<TabularDist<T>>> {
    validate_chain(p.space(), chain)?;
    let mut out = Vec::with_capacity(chain.len() + 1);
    out.push(p.clone());
    for map in chain {
        let next = pushforward(out.last().expect("nonempty"), map)?;
        out.push(next);
    }
    Ok(out)
}

/// Reverse conditional `p(W | T(W))`.
pub fn reverse_conditional<T: Scalar>(p: &TabularDist<T>, t: &ScaleMap) -> Result<ConditionalTable<T>> {
    let coarse = pushforward(p, t)?;
    let defined: Vec<bool> = coarse.probs.iter().map(|&m| m > T::zero()).collect();
    let weights = p
        .probs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let m = coarse.probs[t.apply(i)];
            if m > T::zero() {
                x / m
            } else {
                T::zero()
            }
        })
        .collect();
    Ok(ConditionalTable {
        map: t.clone(),
        weights,
        defined,
    })
}

/// One refinement step: `coarse(T(i)) * cond(i | T(i))`.
pub fn refine_step<T: Scalar>(coarse: &TabularDist<T>, cond: &ConditionalTable<T>) -> Result<TabularDist<T>> {
    check_same_space(coarse.space(), cond.given_space())?;
    for (row, &m) in coarse.probs.iter().enumerate() {
        if m > T::zero() && !cond.defined[row] {
            return Err(Error::UndefinedConditionalRow {
                row,
                mass: m.to_f64_lossy(),
            });
        }
    }
    let probs = cond
        .weights
        .iter()
        .enumerate()
        .map(|(i, &w)| coarse.probs[cond.map.apply(i)] * w)
        .collect();
    Ok(TabularDist {
        space: cond.output_space().clone(),
        probs,
    })
}

/// Concatenates a coarsest distribution with reverse conditionals.
///
/// `conditionals[k]` is the reverse conditional for the `k`-th map of the
/// chain (finest first); they are applied from the coarsest level down.
pub fn refine<T: Scalar>(coarsest: &TabularDist<T>, conditionals: &[ConditionalTable<T>]) -> Result<TabularDist<T>> {
    let mut current = coarsest.clone();
    for cond in conditionals.iter().rev() {
        current = refine_step(&current, cond)?;
    }
    Ok(current)
}

fn check_schedule_chain<T: Scalar>(
    space: &ProductSpace,
    sched: &TemperatureSchedule<T>,
    chain: &[ScaleMap],
) -> Result<()> {
    if chain.len() + 1 != sched.depth() {
        return Err(Error::InvalidSchedule(format!(
            "{} scale coefficients for a chain of {} maps",
            sched.depth(),
            chain.len()
        )));
    }
    validate_chain(space, chain)
}

/// `Σ_i sigma_i D(p^(i) || q^(i))`; terms with `sigma_i = 0` are skipped.
pub fn multiscale_relative_entropy<T: Scalar>(
    p: &TabularDist<T>,
    q: &TabularDist<T>,
    sched: &TemperatureSchedule<T>,
    chain: &[ScaleMap],
) -> Result<T> {
    check_same_space(p.space(), q.space())?;
    check_schedule_chain(p.space(), sched, chain)?;
    let ps = pushforward_chain(p, chain)?;
    let qs = pushforward_chain(q, chain)?;
    let mut total = T::zero();
    for ((&sigma, pi), qi) in sched.sigma().iter().zip(&ps).zip(&qs) {
        if sigma > T::zero() {
            total += sigma * kl(pi, qi)?;
        }
    }
    Ok(total)
}

/// `Σ_i sigma_i H(p^(i))`.
pub fn multiscale_shannon_entropy<T: Scalar>(
    p: &TabularDist<T>,
    sched: &TemperatureSchedule<T>,
    chain: &[ScaleMap],
) -> Result<T> {
    check_schedule_chain(p.space(), sched, chain)?;
    let ps = pushforward_chain(p, chain)?;
    Ok(sched
        .sigma()
        .iter()
        .zip(&ps)
        .map(|(&sigma, pi)| sigma * shannon_entropy(pi))
        .sum())
}

/// `E_p[f] + lambda D_(sigma,T)(p || q)`, the quantity the multiscale Gibbs distribution minimizes.
pub fn min_relative_entropy_objective<T: Scalar>(
    p: &TabularDist<T>,
    f: &EnergyTable<T>,
    q: &TabularDist<T>,
    sched: &TemperatureSchedule<T>,
    chain: &[ScaleMap],
) -> Result<T> {
    Ok(f.expectation(p)? + sched.lambda() * multiscale_relative_entropy(p, q, sched, chain)?)
}

/// `H_(sigma,T)(p) - lambda E_p[f]`, the quantity the maximum multiscale entropy distribution maximizes.
pub fn max_entropy_objective<T: Scalar>(
    p: &TabularDist<T>,
    f: &EnergyTable<T>,
    sched: &TemperatureSchedule<T>,
    chain: &[ScaleMap],
) -> Result<T> {
    Ok(multiscale_shannon_entropy(p, sched, chain)? - sched.lambda() * f.expectation(p)?)
}
