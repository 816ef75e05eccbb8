//! Closed-form multivariate Gaussian algebra.
//!
//! [`GaussianDist`] carries both parameterizations: the covariance with its
//! Cholesky factor (validated at construction) and a lazily cached precision
//! matrix. Scaling, tilting and concatenation work in the precision domain,
//! marginalization and conditioning in the covariance domain.

use std::ops::Range;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, vec_sub, Cholesky, Matrix};
use crate::scalar::Scalar;

/// Multivariate normal `N(mean, cov)` with a strictly positive definite covariance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawGaussian<T>", into = "RawGaussian<T>")]
#[serde(bound = "T: Scalar")]
pub struct GaussianDist<T: Scalar> {
    mean: Vec<T>,
    cov: Matrix<T>,
    cov_chol: Cholesky<T>,
    precision: OnceLock<Matrix<T>>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct RawGaussian<T> {
    mean: Vec<T>,
    cov: Vec<T>,
}

impl<T: Scalar> TryFrom<RawGaussian<T>> for GaussianDist<T> {
    type Error = Error;
    fn try_from(raw: RawGaussian<T>) -> Result<Self> {
        let n = raw.mean.len();
        Self::new(raw.mean, Matrix::from_row_major(n, n, raw.cov)?)
    }
}

impl<T: Scalar> From<GaussianDist<T>> for RawGaussian<T> {
    fn from(g: GaussianDist<T>) -> Self {
        RawGaussian {
            mean: g.mean,
            cov: g.cov.into_vec(),
        }
    }
}

impl<T: Scalar> PartialEq for GaussianDist<T> {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.cov == other.cov
    }
}

fn check_mean<T: Scalar>(mean: &[T], n: usize) -> Result<()> {
    if mean.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: mean.len(),
        });
    }
    if let Some(index) = mean.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(())
}

impl<T: Scalar> GaussianDist<T> {
    /// Symmetrizes `cov` and validates positive definiteness.
    pub fn new(mean: Vec<T>, cov: Matrix<T>) -> Result<Self> {
        let cov = cov.into_symmetric()?;
        check_mean(&mean, cov.rows())?;
        if mean.is_empty() {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        let cov_chol = cov.cholesky()?;
        Ok(Self {
            mean,
            cov,
            cov_chol,
            precision: OnceLock::new(),
        })
    }

    /// Builds the distribution from its mean and precision matrix.
    pub fn from_precision(mean: Vec<T>, precision: Matrix<T>) -> Result<Self> {
        let precision = precision.into_symmetric()?;
        check_mean(&mean, precision.rows())?;
        let cov = precision.cholesky()?.inverse();
        Self::from_parts(mean, cov, precision)
    }

    /// Both parameterizations are already known; only the covariance is factorized.
    fn from_parts(mean: Vec<T>, mut cov: Matrix<T>, mut precision: Matrix<T>) -> Result<Self> {
        cov.symmetrize();
        precision.symmetrize();
        let cov_chol = cov.cholesky()?;
        Ok(Self {
            mean,
            cov,
            cov_chol,
            precision: OnceLock::from(precision),
        })
    }

    /// `N(mean, variance * I)`.
    pub fn isotropic(mean: Vec<T>, variance: T) -> Result<Self> {
        let n = mean.len();
        Self::new(mean, Matrix::from_diagonal(&vec![variance; n]))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix<T> {
        &self.cov
    }

    /// Lower Cholesky factor `C` with `cov = C C^T`.
    pub fn cholesky(&self) -> &Cholesky<T> {
        &self.cov_chol
    }

    pub fn precision(&self) -> &Matrix<T> {
        self.precision.get_or_init(|| self.cov_chol.inverse())
    }

    pub fn log_det_cov(&self) -> T {
        self.cov_chol.log_det()
    }

    /// Log-density at `x`.
    pub fn log_density(&self, x: &[T]) -> T {
        let diff = vec_sub(x, &self.mean);
        let z = self.cov_chol.solve_lower(&diff);
        let n = T::from_usize_lossy(self.dim());
        let half = T::lit(0.5);
        -half * (dot(&z, &z) + self.log_det_cov() + n * (T::lit(2.0) * T::PI()).ln())
    }

    /// Marginal over the coordinate range `keep`.
    pub fn marginalize_coords(&self, keep: Range<usize>) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::EmptyKeepSet);
        }
        if keep.end > self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: keep.end,
            });
        }
        if keep.start == 0 && keep.end == self.dim() {
            return Ok(self.clone());
        }
        Self::new(self.mean[keep.clone()].to_vec(), self.cov.block(keep.clone(), keep))
    }

    /// Marginal over the blocks `blocks` of `partition`.
    pub fn marginalize(&self, partition: &BlockPartition, blocks: Range<usize>) -> Result<Self> {
        partition.check_dim(self.dim())?;
        if blocks.is_empty() {
            return Err(Error::EmptyKeepSet);
        }
        if blocks.end > partition.num_blocks() {
            return Err(Error::InvalidPartition(format!(
                "block range {blocks:?} outside {} blocks",
                partition.num_blocks()
            )));
        }
        self.marginalize_coords(partition.coord_range(blocks))
    }

    /// Distribution of the head `x[..split]` given the tail `x[split..]`.
    pub fn condition(&self, split: usize) -> Result<GaussianConditional<T>> {
        let n = self.dim();
        if split == 0 || split >= n {
            return Err(Error::EmptyKeepSet);
        }
        self.conditional(0..split, split..n)
    }

    /// Distribution of the tail `x[split..]` given the head `x[..split]`.
    pub fn condition_on_head(&self, split: usize) -> Result<GaussianConditional<T>> {
        let n = self.dim();
        if split == 0 || split >= n {
            return Err(Error::EmptyKeepSet);
        }
        self.conditional(split..n, 0..split)
    }

    fn conditional(&self, out: Range<usize>, given: Range<usize>) -> Result<GaussianConditional<T>> {
        let s_oo = self.cov.block(out.clone(), out.clone());
        let s_og = self.cov.block(out.clone(), given.clone());
        let s_gg = self.cov.block(given.clone(), given.clone());
        let chol = s_gg.cholesky().map_err(|_| Error::SingularConditioningBlock)?;
        // gain = S_og S_gg^{-1} = (S_gg^{-1} S_go)^T
        let gain = chol.solve_matrix(&s_og.transpose()).transpose();
        let mu_o = &self.mean[out];
        let mu_g = &self.mean[given];
        let shift = gain.matvec(mu_g);
        let offset = vec_sub(mu_o, &shift);
        let cov = s_oo.sub(&gain.matmul(&s_og.transpose())).into_symmetric()?;
        let cov_chol = cov.cholesky()?;
        Ok(GaussianConditional {
            gain,
            offset,
            cov,
            cov_chol,
        })
    }

    /// Draws `mean + C z` with `z` standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let z: Vec<T> = (0..self.dim())
            .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let cz = self.cov_chol.mul_lower(&z);
        self.mean.iter().zip(cz).map(|(&m, c)| m + c).collect()
    }
}

/// Affine-Gaussian conditional `x | y ~ N(gain y + offset, cov)`.
#[derive(Debug, Clone)]
pub struct GaussianConditional<T: Scalar> {
    pub gain: Matrix<T>,
    pub offset: Vec<T>,
    pub cov: Matrix<T>,
    cov_chol: Cholesky<T>,
}

impl<T: Scalar> GaussianConditional<T> {
    pub fn mean_at(&self, given: &[T]) -> Vec<T> {
        let mut m = self.gain.matvec(given);
        for (a, &b) in m.iter_mut().zip(&self.offset) {
            *a += b;
        }
        m
    }

    /// The conditional distribution at a particular value of the conditioning variable.
    pub fn at(&self, given: &[T]) -> GaussianDist<T> {
        GaussianDist {
            mean: self.mean_at(given),
            cov: self.cov.clone(),
            cov_chol: self.cov_chol.clone(),
            precision: OnceLock::new(),
        }
    }
}

/// Sizes of consecutive coordinate blocks, one per layer `W_1 .. W_d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct BlockPartition {
    block_sizes: Vec<usize>,
}

impl TryFrom<Vec<usize>> for BlockPartition {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<BlockPartition> for Vec<usize> {
    fn from(p: BlockPartition) -> Self {
        p.block_sizes
    }
}

impl BlockPartition {
    pub fn new(block_sizes: Vec<usize>) -> Result<Self> {
        if block_sizes.is_empty() || block_sizes.contains(&0) {
            return Err(Error::InvalidPartition(format!("{block_sizes:?}")));
        }
        Ok(Self { block_sizes })
    }

    /// `count` blocks of `size` coordinates each.
    pub fn uniform(count: usize, size: usize) -> Result<Self> {
        Self::new(vec![size; count])
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn num_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn dim(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    /// Number of coordinates in the first `k` blocks.
    pub fn prefix_dim(&self, k: usize) -> usize {
        self.block_sizes[..k].iter().sum()
    }

    pub fn coord_range(&self, blocks: Range<usize>) -> Range<usize> {
        self.prefix_dim(blocks.start)..self.prefix_dim(blocks.end)
    }

    /// Partition of the first `k` blocks.
    pub fn prefix(&self, k: usize) -> BlockPartition {
        BlockPartition {
            block_sizes: self.block_sizes[..k].to_vec(),
        }
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        if self.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: n,
            });
        }
        Ok(())
    }
}

/// `N(mean, cov / theta)`, the Gaussian escort distribution.
pub fn scale_gaussian<T: Scalar>(g: &GaussianDist<T>, theta: T) -> Result<GaussianDist<T>> {
    if !(theta > T::zero()) || !theta.is_finite() {
        return Err(Error::NonpositiveTheta(theta.to_f64_lossy()));
    }
    if theta == T::one() {
        return Ok(g.clone());
    }
    GaussianDist::from_parts(
        g.mean.clone(),
        g.cov.scaled(T::one() / theta),
        g.precision().scaled(theta),
    )
}

/// Normalized geometric mean `p^theta q^{1-theta}` of two Gaussians.
pub fn tilt_gaussian<T: Scalar>(p: &GaussianDist<T>, q: &GaussianDist<T>, theta: T) -> Result<GaussianDist<T>> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
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
    let precision = p.precision().lin_comb(theta, q.precision(), keep);
    let mut eta = p.precision().matvec(&p.mean);
    let eta_q = q.precision().matvec(&q.mean);
    for (a, b) in eta.iter_mut().zip(eta_q) {
        *a = theta * *a + keep * b;
    }
    let chol = precision.cholesky()?;
    let mean = chol.solve(&eta);
    GaussianDist::from_parts(mean, chol.inverse(), precision)
}

/// Joint law of `x_1 ~ u1` followed by `x_2 | x_1` taken from `u2`.
///
/// With `u2` having precision `[[A, B], [B^T, D]]` and `u1` precision `Q`, the
/// joint precision is `[[Q + B D^{-1} B^T, B], [B^T, D]]`.
pub fn concat<T: Scalar>(u1: &GaussianDist<T>, u2: &GaussianDist<T>) -> Result<GaussianDist<T>> {
    let n1 = u1.dim();
    let n = u2.dim();
    if n1 >= n {
        return Err(Error::DimensionMismatch {
            expected: n1 + 1,
            got: n,
        });
    }
    let lam = u2.precision();
    let b = lam.block(0..n1, n1..n);
    let d = lam.block(n1..n, n1..n);
    let d_chol = d.cholesky()?;
    // gain = -D^{-1} B^T maps x_1 - mean_1 to the shift of x_2
    let dinv_bt = d_chol.solve_matrix(&b.transpose());
    let top_left = u1.precision().add(&b.matmul(&dinv_bt));
    let precision = Matrix::from_blocks(&top_left, &b, &b.transpose(), &d);

    let gain = dinv_bt.scaled(-T::one());
    let mu2 = &u2.mean;
    let shift = gain.matvec(&vec_sub(&u1.mean, &mu2[..n1]));
    let mut mean = u1.mean.clone();
    mean.extend(mu2[n1..].iter().zip(shift).map(|(&m, s)| m + s));

    let s1 = &u1.cov;
    let cross = gain.matmul(s1); // Cov(x_2, x_1)
    let cond_cov = d_chol.inverse();
    let lower_right = cross.matmul(&gain.transpose()).add(&cond_cov);
    let cov = Matrix::from_blocks(s1, &cross.transpose(), &cross, &lower_right);
    GaussianDist::from_parts(mean, cov, precision)
}

/// `D(p || q)` between Gaussians of equal dimension.
pub fn kl_gaussian<T: Scalar>(p: &GaussianDist<T>, q: &GaussianDist<T>) -> Result<T> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    let lam_q = q.precision();
    let mut trace = T::zero();
    for i in 0..p.dim() {
        trace += dot(lam_q.row(i), p.cov.row(i));
    }
    let diff = vec_sub(&q.mean, &p.mean);
    let maha = dot(&diff, &lam_q.matvec(&diff));
    let n = T::from_usize_lossy(p.dim());
    let val = T::lit(0.5) * (trace + maha - n + q.log_det_cov() - p.log_det_cov());
    Ok(val.max(T::zero()))
}

/// Quadratic energy `f(w) = c + g^T w + 1/2 w^T K w` with `K` symmetric positive semidefinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnergy<T>", into = "RawEnergy<T>")]
#[serde(bound = "T: Scalar")]
pub struct QuadraticEnergy<T: Scalar> {
    k: Matrix<T>,
    g: Vec<T>,
    c: T,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct RawEnergy<T> {
    k: Vec<T>,
    g: Vec<T>,
    #[serde(default)]
    c: T,
}

impl<T: Scalar> TryFrom<RawEnergy<T>> for QuadraticEnergy<T> {
    type Error = Error;
    fn try_from(raw: RawEnergy<T>) -> Result<Self> {
        let n = raw.g.len();
        Self::new(Matrix::from_row_major(n, n, raw.k)?, raw.g, raw.c)
    }
}

impl<T: Scalar> From<QuadraticEnergy<T>> for RawEnergy<T> {
    fn from(e: QuadraticEnergy<T>) -> Self {
        RawEnergy {
            k: e.k.into_vec(),
            g: e.g,
            c: e.c,
        }
    }
}

impl<T: Scalar> QuadraticEnergy<T> {
    /// Validates symmetry (within `1e-8` relative) and clips eigenvalues in `[-psd_floor, 0)` to zero.
    pub fn new(k: Matrix<T>, g: Vec<T>, c: T) -> Result<Self> {
        if !k.is_square() || k.rows() != g.len() {
            return Err(Error::DimensionMismatch {
                expected: g.len(),
                got: k.rows(),
            });
        }
        if !k.is_finite() || !c.is_finite() {
            return Err(Error::NonFinite { index: 0 });
        }
        if let Some(index) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let scale = k.max_abs().max(T::one());
        let asym = k.max_asymmetry();
        if asym > T::lit(1e-8) * scale {
            return Err(Error::NotSymmetric(asym.to_f64_lossy()));
        }
        let mut k = k;
        k.symmetrize();
        let eig = k.symmetric_eigen();
        let floor = T::lit(T::TOL.psd_floor) * scale;
        let min = eig.min_value();
        if min < -floor {
            return Err(Error::IndefiniteEnergy(min.to_f64_lossy()));
        }
        if min < T::zero() {
            let mut clipped = eig;
            for v in clipped.values.iter_mut() {
                *v = v.max(T::zero());
            }
            k = clipped.reconstruct();
        }
        Ok(Self { k, g, c })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            k: Matrix::zeros(n, n),
            g: vec![T::zero(); n],
            c: T::zero(),
        }
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn curvature(&self) -> &Matrix<T> {
        &self.k
    }

    pub fn linear(&self) -> &[T] {
        &self.g
    }

    pub fn constant(&self) -> T {
        self.c
    }

    pub fn value(&self, w: &[T]) -> T {
        let kw = self.k.matvec(w);
        self.c + dot(&self.g, w) + T::lit(0.5) * dot(w, &kw)
    }

    pub fn gradient(&self, w: &[T]) -> Vec<T> {
        let mut out = self.k.matvec(w);
        for (o, &gi) in out.iter_mut().zip(&self.g) {
            *o += gi;
        }
        out
    }
}

/// Gibbs posterior `exp(-beta f) prior / Z`: precision `Λ_prior + beta K`.
pub fn gibbs_gaussian<T: Scalar>(
    energy: &QuadraticEnergy<T>,
    prior: &GaussianDist<T>,
    beta: T,
) -> Result<GaussianDist<T>> {
    if energy.dim() != prior.dim() {
        return Err(Error::DimensionMismatch {
            expected: prior.dim(),
            got: energy.dim(),
        });
    }
    if !(beta > T::zero()) || !beta.is_finite() {
        return Err(Error::NonpositiveTheta(beta.to_f64_lossy()));
    }
    let precision = prior.precision().lin_comb(T::one(), &energy.k, beta);
    let mut rhs = prior.precision().matvec(&prior.mean);
    for (r, &gi) in rhs.iter_mut().zip(&energy.g) {
        *r -= beta * gi;
    }
    gaussian_from_natural(rhs, precision)
}

/// Gibbs distribution `exp(-beta f) / Z` against Lebesgue measure; needs `K` positive definite.
pub fn gibbs_gaussian_flat<T: Scalar>(energy: &QuadraticEnergy<T>, beta: T) -> Result<GaussianDist<T>> {
    if !(beta > T::zero()) || !beta.is_finite() {
        return Err(Error::NonpositiveTheta(beta.to_f64_lossy()));
    }
    let precision = energy.k.scaled(beta);
    let rhs = energy.g.iter().map(|&gi| -beta * gi).collect();
    gaussian_from_natural(rhs, precision)
}

fn gaussian_from_natural<T: Scalar>(eta: Vec<T>, precision: Matrix<T>) -> Result<GaussianDist<T>> {
    let chol = precision.cholesky().map_err(|_| Error::IndefinitePosterior)?;
    let mean = chol.solve(&eta);
    GaussianDist::from_parts(mean, chol.inverse(), precision).map_err(|_| Error::IndefinitePosterior)
}

/// `E_p[f] = f(mu) + tr(K Sigma) / 2`.
pub fn expected_energy<T: Scalar>(energy: &QuadraticEnergy<T>, p: &GaussianDist<T>) -> Result<T> {
    if energy.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: energy.dim(),
            got: p.dim(),
        });
    }
    Ok(energy.value(p.mean()) + T::lit(0.5) * energy.curvature().matmul(p.cov()).trace())
}

/// Differential entropy `(n (1 + ln 2 pi) + ln det Sigma) / 2`.
pub fn differential_entropy<T: Scalar>(p: &GaussianDist<T>) -> T {
    let n = T::lit(p.dim() as f64);
    T::lit(0.5) * (n * (T::one() + T::lit(std::f64::consts::TAU.ln())) + p.log_det_cov())
}

/// `Σ_i sigma_i D(p^(i) || q^(i))` over the block-decimation chain.
pub fn multiscale_kl_gaussian<T: Scalar>(
    p: &GaussianDist<T>,
    q: &GaussianDist<T>,
    sigma: &[T],
    partition: &BlockPartition,
) -> Result<T> {
    partition.check_dim(p.dim())?;
    partition.check_dim(q.dim())?;
    check_scale_count(sigma, partition)?;
    let d = partition.num_blocks();
    let mut total = T::zero();
    for (i, &s) in sigma.iter().enumerate() {
        if s > T::zero() {
            let keep = partition.coord_range(0..d - i);
            total += s * kl_gaussian(&p.marginalize_coords(keep.clone())?, &q.marginalize_coords(keep)?)?;
        }
    }
    Ok(total)
}

/// `Σ_i sigma_i h(p^(i))` over the block-decimation chain.
pub fn multiscale_entropy_gaussian<T: Scalar>(
    p: &GaussianDist<T>,
    sigma: &[T],
    partition: &BlockPartition,
) -> Result<T> {
    partition.check_dim(p.dim())?;
    check_scale_count(sigma, partition)?;
    let d = partition.num_blocks();
    let mut total = T::zero();
    for (i, &s) in sigma.iter().enumerate() {
        total += s * differential_entropy(&p.marginalize_coords(partition.coord_range(0..d - i))?);
    }
    Ok(total)
}

fn check_scale_count<T>(sigma: &[T], partition: &BlockPartition) -> Result<()> {
    if sigma.len() != partition.num_blocks() {
        return Err(Error::InvalidSchedule(format!(
            "{} scale coefficients for {} blocks",
            sigma.len(),
            partition.num_blocks()
        )));
    }
    Ok(())
}
