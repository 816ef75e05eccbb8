//! Brute-force reference solvers.
//!
//! [`minimize_tabular`] attacks the multiscale objectives directly with
//! exponentiated-gradient descent on the simplex, without the
//! renormalization machinery. [`quadrature_moments`] integrates an arbitrary
//! 1-D or 2-D log-density on a trapezoid grid, and
//! [`discretized_gaussian_moments`] replays a Gaussian problem on a lattice.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{BlockPartition, GaussianDist, QuadraticEnergy};
use crate::linalg::axpy;
use crate::linalg::Matrix;
use crate::multiscale::{solve_max_entropy, solve_min_relative_entropy, TabularBackend};
use crate::scalar::Scalar;
use crate::schedule::TemperatureSchedule;
use crate::tabular::{pushforward_chain, validate_chain, EnergyTable, ProductSpace, ScaleMap, TabularDist};

/// Largest space the simplex oracle accepts.
pub const ORACLE_SPACE_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleSettings {
    pub max_iterations: usize,
    pub step_size: f64,
    /// Stopping threshold on the stationarity gap `max_w |g(w) - E_p[g]|` over the support.
    pub convergence_tol: f64,
    pub grid_points: usize,
    pub grid_radius_sigmas: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            max_iterations: 50_000,
            step_size: 0.1,
            convergence_tol: 1e-10,
            grid_points: 2001,
            grid_radius_sigmas: 7.0,
        }
    }
}

impl OracleSettings {
    fn validate(&self) -> Result<()> {
        let ok = self.max_iterations > 0
            && self.step_size > 0.0
            && self.convergence_tol > 0.0
            && self.grid_points > 2
            && self.grid_radius_sigmas > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "oracle settings must be positive: {self:?}"
            )))
        }
    }
}

/// Which multiscale problem the oracle solves.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective<'a, T> {
    /// Minimize `E[f] + lambda D_(sigma,T)(P || Q)`.
    MinRelativeEntropy { reference: &'a TabularDist<T> },
    /// Maximize `H_(sigma,T)(P) - lambda E[f]`.
    MaxEntropy,
}

/// Oracle output.
#[derive(Debug, Clone)]
pub struct OracleResult<T> {
    pub distribution: TabularDist<T>,
    pub iterations: usize,
    pub gap: f64,
}

/// Mirror descent `p <- p exp(-eta grad) / Z` on the simplex.
///
/// For the relative-entropy objective the iterate lives on `supp(Q)`. The
/// gradient of each marginal term is spread back over its fiber.
pub fn minimize_tabular<T: Scalar>(
    objective: Objective<'_, T>,
    f: &EnergyTable<T>,
    sched: &TemperatureSchedule<T>,
    chain: &[ScaleMap],
    settings: &OracleSettings,
) -> Result<OracleResult<T>> {
    settings.validate()?;
    let space = f.space();
    if space.size() > ORACLE_SPACE_CAP {
        return Err(Error::SpaceTooLarge {
            size: space.size(),
            cap: ORACLE_SPACE_CAP,
        });
    }
    validate_chain(space, chain)?;
    if chain.len() + 1 != sched.depth() {
        return Err(Error::InvalidSchedule(format!(
            "{} scale coefficients for a chain of {} maps",
            sched.depth(),
            chain.len()
        )));
    }
    let n = space.size();
    let lambda = sched.lambda().to_f64_lossy();
    let sigma: Vec<f64> = sched.sigma().iter().map(|s| s.to_f64_lossy()).collect();
    let energy: Vec<f64> = f.values().iter().map(|v| v.to_f64_lossy()).collect();

    // composite maps from the finest index to each scale
    let mut to_scale: Vec<Vec<usize>> = vec![(0..n).collect()];
    let mut sizes = vec![n];
    for map in chain {
        let prev = to_scale.last().expect("nonempty");
        to_scale.push(prev.iter().map(|&i| map.apply(i)).collect());
        sizes.push(map.target().size());
    }

    let (log_q_scales, support): (Option<Vec<Vec<f64>>>, Vec<bool>) = match &objective {
        Objective::MinRelativeEntropy { reference } => {
            if reference.space() != space {
                return Err(Error::SpaceMismatch("reference and energy spaces differ".into()));
            }
            let qs = pushforward_chain(reference, chain)?;
            let logs = qs
                .iter()
                .map(|q| q.probs().iter().map(|&x| x.to_f64_lossy().ln()).collect())
                .collect();
            let support = reference.probs().iter().map(|&x| x > T::zero()).collect();
            (Some(logs), support)
        }
        Objective::MaxEntropy => (None, vec![true; n]),
    };

    let count = support.iter().filter(|&&s| s).count() as f64;
    let mut p: Vec<f64> = support.iter().map(|&s| if s { 1.0 / count } else { 0.0 }).collect();
    let mut grad = vec![0.0; n];
    let mut marginals: Vec<Vec<f64>> = sizes.iter().map(|&s| vec![0.0; s]).collect();
    let eta = settings.step_size;
    let mut gap = f64::INFINITY;

    for iteration in 0..settings.max_iterations {
        for (k, m) in marginals.iter_mut().enumerate() {
            m.iter_mut().for_each(|x| *x = 0.0);
            for (i, &pi) in p.iter().enumerate() {
                m[to_scale[k][i]] += pi;
            }
        }
        for i in 0..n {
            if !support[i] {
                continue;
            }
            let mut g = match log_q_scales {
                Some(_) => energy[i],
                None => lambda * energy[i],
            };
            for (k, &s) in sigma.iter().enumerate() {
                if s == 0.0 {
                    continue;
                }
                let j = to_scale[k][i];
                let term = match &log_q_scales {
                    Some(logs) => lambda * (marginals[k][j].ln() - logs[k][j] + 1.0),
                    None => marginals[k][j].ln() + 1.0,
                };
                g += s * term;
            }
            grad[i] = g;
        }
        let mean: f64 = (0..n).filter(|&i| support[i]).map(|i| p[i] * grad[i]).sum();
        gap = (0..n)
            .filter(|&i| support[i])
            .map(|i| (grad[i] - mean).abs())
            .fold(0.0, f64::max);
        if !gap.is_finite() {
            break;
        }
        if gap < settings.convergence_tol {
            let probs: Vec<T> = p.iter().map(|&x| T::lit(x)).collect();
            return Ok(OracleResult {
                distribution: TabularDist::from_weights(space.clone(), probs)?,
                iterations: iteration,
                gap,
            });
        }
        let shift = (0..n)
            .filter(|&i| support[i])
            .map(|i| grad[i])
            .fold(f64::INFINITY, f64::min);
        let mut total = 0.0;
        for i in 0..n {
            if support[i] {
                p[i] *= (-eta * (grad[i] - shift)).exp();
                total += p[i];
            }
        }
        p.iter_mut().for_each(|x| *x /= total);
    }
    Err(Error::NonConvergence {
        iterations: settings.max_iterations,
        gap,
    })
}

/// Trapezoid-rule moments of an unnormalized density.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub cov: Matrix<f64>,
    /// `ln ∫ exp(log_density)`.
    pub log_normalizer: f64,
}

/// Axis-aligned box `center ± half_width` sampled with `points` nodes per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    pub center: Vec<f64>,
    pub half_width: Vec<f64>,
    pub points: usize,
}

impl QuadratureGrid {
    /// Box of `settings.grid_radius_sigmas` standard deviations around `center`.
    pub fn around(center: Vec<f64>, std_devs: &[f64], settings: &OracleSettings) -> Self {
        Self {
            half_width: std_devs.iter().map(|s| s * settings.grid_radius_sigmas).collect(),
            center,
            points: settings.grid_points,
        }
    }

    fn nodes(&self, axis: usize) -> (Vec<f64>, f64) {
        let lo = self.center[axis] - self.half_width[axis];
        let h = 2.0 * self.half_width[axis] / (self.points - 1) as f64;
        ((0..self.points).map(|k| lo + h * k as f64).collect(), h)
    }
}

/// Moments of `exp(log_density)` over a 1-D or 2-D grid.
///
/// Fails with [`Error::MassLeakage`] if the density on the boundary exceeds
/// `1e-10` times its peak.
pub fn quadrature_moments(log_density: impl Fn(&[f64]) -> f64, grid: &QuadratureGrid) -> Result<Moments> {
    let dim = grid.center.len();
    if !(1..=2).contains(&dim) || grid.half_width.len() != dim || grid.points < 3 {
        return Err(Error::InvalidConfig(
            "quadrature supports 1-D and 2-D grids with at least 3 points".into(),
        ));
    }
    if grid.half_width.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidConfig("grid half widths must be positive".into()));
    }
    let axes: Vec<(Vec<f64>, f64)> = (0..dim).map(|a| grid.nodes(a)).collect();
    let m = grid.points;
    let total_nodes = m.pow(dim as u32);
    let mut coords = Vec::with_capacity(total_nodes);
    let mut logs = Vec::with_capacity(total_nodes);
    let mut weights = Vec::with_capacity(total_nodes);
    let mut boundary = Vec::with_capacity(total_nodes);
    for flat in 0..total_nodes {
        let mut idx = [0usize; 2];
        let mut rem = flat;
        for a in (0..dim).rev() {
            idx[a] = rem % m;
            rem /= m;
        }
        let x: Vec<f64> = (0..dim).map(|a| axes[a].0[idx[a]]).collect();
        let w: f64 = (0..dim)
            .map(|a| {
                if idx[a] == 0 || idx[a] == m - 1 {
                    0.5 * axes[a].1
                } else {
                    axes[a].1
                }
            })
            .product();
        boundary.push((0..dim).any(|a| idx[a] == 0 || idx[a] == m - 1));
        logs.push(log_density(&x));
        coords.push(x);
        weights.push(w);
    }
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return Err(Error::VanishingPartitionFunction);
    }
    let edge = logs
        .iter()
        .zip(&boundary)
        .filter(|(_, &b)| b)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let leak = (edge - peak).exp();
    if leak > 1e-10 {
        return Err(Error::MassLeakage(leak));
    }
    let dens: Vec<f64> = logs.iter().zip(&weights).map(|(&l, &w)| w * (l - peak).exp()).collect();
    let z: f64 = dens.iter().sum();
    let mut mean = vec![0.0; dim];
    for (x, &p) in coords.iter().zip(&dens) {
        for a in 0..dim {
            mean[a] += p * x[a];
        }
    }
    mean.iter_mut().for_each(|v| *v /= z);
    let mut cov = Matrix::zeros(dim, dim);
    for (x, &p) in coords.iter().zip(&dens) {
        for a in 0..dim {
            for b in 0..dim {
                cov[(a, b)] += p * (x[a] - mean[a]) * (x[b] - mean[b]);
            }
        }
    }
    let cov = cov.scaled(1.0 / z);
    Ok(Moments {
        mean,
        cov,
        log_normalizer: peak + z.ln(),
    })
}

/// Largest lattice [`discretized_gaussian_moments`] builds.
pub const LATTICE_STATE_CAP: usize = 2_000_000;

/// Moments of a distribution tabulated on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeMoments {
    pub mean: Vec<f64>,
    pub cov: Matrix<f64>,
    pub points_per_axis: Vec<usize>,
}

/// Solves a Gaussian multiscale problem again on a regular lattice with the tabular backend.
///
/// The prior density and the energy are tabulated on a box covering the
/// reference and every distribution in `cover` by `settings.grid_radius_sigmas` marginal standard
/// deviations, with spacing at most half the smallest conditional standard
/// deviation. Each coordinate block becomes one axis, so decimation drops
/// exactly the blocks the Gaussian backend drops. `reference = None` means the
/// maximum entropy problem (Lebesgue reference).
pub fn discretized_gaussian_moments(
    energy: &QuadraticEnergy<f64>,
    reference: Option<&GaussianDist<f64>>,
    sched: &TemperatureSchedule<f64>,
    partition: &BlockPartition,
    cover: &[&GaussianDist<f64>],
    settings: &OracleSettings,
) -> Result<LatticeMoments> {
    settings.validate()?;
    let n = partition.dim();
    partition.check_dim(energy.dim())?;
    if cover.is_empty() {
        return Err(Error::InvalidConfig(
            "lattice needs at least one distribution to cover".into(),
        ));
    }
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let mut step = vec![f64::INFINITY; n];
    for g in cover.iter().copied().chain(reference) {
        partition.check_dim(g.dim())?;
        let prec = g.precision();
        for j in 0..n {
            let sd = g.cov()[(j, j)].sqrt();
            lo[j] = lo[j].min(g.mean()[j] - settings.grid_radius_sigmas * sd);
            hi[j] = hi[j].max(g.mean()[j] + settings.grid_radius_sigmas * sd);
            step[j] = step[j].min(0.5 / prec[(j, j)].sqrt());
        }
    }
    let points: Vec<usize> = (0..n)
        .map(|j| ((hi[j] - lo[j]) / step[j]).ceil() as usize + 1)
        .collect();
    let size = points
        .iter()
        .try_fold(1usize, |acc, &p| acc.checked_mul(p))
        .unwrap_or(usize::MAX);
    if size > LATTICE_STATE_CAP {
        return Err(Error::SpaceTooLarge {
            size,
            cap: LATTICE_STATE_CAP,
        });
    }
    let axes: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let h = (hi[j] - lo[j]) / (points[j] - 1) as f64;
            (0..points[j]).map(|k| lo[j] + h * k as f64).collect()
        })
        .collect();
    let block_axes: Vec<usize> = (0..partition.num_blocks())
        .map(|b| points[partition.coord_range(b..b + 1)].iter().product())
        .collect();
    let space = ProductSpace::with_cap(block_axes, LATTICE_STATE_CAP)?;

    let mut nodes = Vec::with_capacity(size);
    let mut x = vec![0.0; n];
    for flat in 0..size {
        let mut rem = flat;
        for j in (0..n).rev() {
            x[j] = axes[j][rem % points[j]];
            rem /= points[j];
        }
        nodes.push(x.clone());
    }
    let f = EnergyTable::new(space.clone(), nodes.iter().map(|x| energy.value(x)).collect())?;
    let backend = TabularBackend::decimation(space.clone());
    let solution = match reference {
        Some(prior) => {
            partition.check_dim(prior.dim())?;
            let logs: Vec<f64> = nodes.iter().map(|x| prior.log_density(x)).collect();
            let q = TabularDist::from_log_weights(space, &logs)?;
            solve_min_relative_entropy(&f, &q, sched, &backend)?
        }
        None => solve_max_entropy(&f, sched, &backend)?,
    };
    let probs = solution.distribution.probs();
    let mut mean = vec![0.0; n];
    for (x, &p) in nodes.iter().zip(probs) {
        axpy(p, x, &mut mean);
    }
    let mut cov = Matrix::zeros(n, n);
    for (x, &p) in nodes.iter().zip(probs) {
        for a in 0..n {
            for b in 0..n {
                cov[(a, b)] += p * (x[a] - mean[a]) * (x[b] - mean[b]);
            }
        }
    }
    Ok(LatticeMoments {
        mean,
        cov,
        points_per_axis: points,
    })
}

/// Largest discrepancy between Gaussian moments and lattice moments, in units of the Gaussian's standard deviations.
pub fn standardized_moment_error(g: &GaussianDist<f64>, lattice: &LatticeMoments) -> f64 {
    let n = g.dim();
    let sd: Vec<f64> = (0..n).map(|j| g.cov()[(j, j)].sqrt()).collect();
    let mut worst: f64 = 0.0;
    for a in 0..n {
        worst = worst.max((g.mean()[a] - lattice.mean[a]).abs() / sd[a]);
        for b in 0..n {
            worst = worst.max((g.cov()[(a, b)] - lattice.cov[(a, b)]).abs() / (sd[a] * sd[b]));
        }
    }
    worst
}
