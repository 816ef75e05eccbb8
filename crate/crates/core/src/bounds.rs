//! Excess-risk bounds for single-scale and multiscale Gibbs posteriors.
//!
//! With per-scale divergences `D_i = D(Q̂_{W^(i)} || Q_{W^(i)})`, the
//! single-scale bound gap is `C/√n √D_1` and the multiscale one is
//! `C/(d√n) Σ √D_i`, where `C = 2(eR)^2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{kl_gaussian, BlockPartition, GaussianDist};
use crate::scalar::Scalar;

/// Sample size, depth and input-norm bound entering the bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    pub input_bound: f64,
    pub n: usize,
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
}

impl BoundConfig {
    pub fn new(input_bound: f64, n: usize, depth: usize) -> Result<Self> {
        let cfg = Self {
            input_bound,
            n,
            depth,
            gamma: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.input_bound > 0.0) || !self.input_bound.is_finite() || self.n == 0 || self.depth == 0 {
            return Err(Error::InvalidConfig(format!(
                "bound config needs R > 0, n >= 1, d >= 1; got R={} n={} d={}",
                self.input_bound, self.n, self.depth
            )));
        }
        if let Some(g) = &self.gamma {
            if g.len() != self.depth || g.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidConfig("gamma must hold d positive entries".into()));
            }
        }
        Ok(())
    }

    /// `C = 2 (e R)^2`.
    pub fn constant(&self) -> f64 {
        let er = std::f64::consts::E * self.input_bound;
        2.0 * er * er
    }

    fn sqrt_n(&self) -> f64 {
        (self.n as f64).sqrt()
    }
}

/// Reference distribution `Q̂` concentrated near a risk minimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "T: Scalar")]
pub enum ReferencePosterior<T: Scalar> {
    Gaussian(GaussianDist<T>),
    /// Point mass at `ŵ`; entry `k` is `log(1/q_k)`, the prior's log-mass penalty for layer `k`.
    Dirac {
        log_inv_q: Vec<T>,
    },
}

impl<T: Scalar> ReferencePosterior<T> {
    pub fn dirac(log_inv_q: Vec<T>) -> Result<Self> {
        if let Some(index) = log_inv_q.iter().position(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(Error::NegativeDivergenceInput {
                index,
                value: log_inv_q[index].to_f64_lossy(),
            });
        }
        Ok(Self::Dirac { log_inv_q })
    }
}

/// `D(Q̂_{W^(i)} || Q_{W^(i)})` where scale `i` keeps the first `d - i + 1` blocks.
pub fn divergence_at_scale<T: Scalar>(
    qhat: &ReferencePosterior<T>,
    prior: Option<&GaussianDist<T>>,
    partition: &BlockPartition,
    i: usize,
) -> Result<T> {
    let d = partition.num_blocks();
    if i == 0 || i > d {
        return Err(Error::InvalidConfig(format!("scale index {i} outside 1..={d}")));
    }
    let keep = d - i + 1;
    match qhat {
        ReferencePosterior::Gaussian(q) => {
            let prior = prior.ok_or_else(|| Error::InvalidConfig("a Gaussian reference needs a prior".into()))?;
            partition.check_dim(q.dim())?;
            partition.check_dim(prior.dim())?;
            let range = partition.coord_range(0..keep);
            kl_gaussian(&q.marginalize_coords(range.clone())?, &prior.marginalize_coords(range)?)
        }
        ReferencePosterior::Dirac { log_inv_q } => {
            if log_inv_q.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: log_inv_q.len(),
                });
            }
            Ok(log_inv_q[..keep].iter().copied().sum())
        }
    }
}

/// Divergences `D_1 .. D_d`.
pub fn divergences<T: Scalar>(
    qhat: &ReferencePosterior<T>,
    prior: Option<&GaussianDist<T>>,
    partition: &BlockPartition,
) -> Result<Vec<T>> {
    (1..=partition.num_blocks())
        .map(|i| divergence_at_scale(qhat, prior, partition, i))
        .collect()
}

/// Data processing gain `√D_1 - √D_i`.
pub fn dpg<T: Scalar>(
    qhat: &ReferencePosterior<T>,
    prior: Option<&GaussianDist<T>>,
    partition: &BlockPartition,
    i: usize,
) -> Result<T> {
    if i == 1 {
        divergence_at_scale(qhat, prior, partition, 1)?;
        return Ok(T::zero());
    }
    let d1 = divergence_at_scale(qhat, prior, partition, 1)?;
    let di = divergence_at_scale(qhat, prior, partition, i)?;
    Ok(d1.sqrt() - di.sqrt())
}

/// Single-scale gap `C/√n √D(Q̂ || Q)`, the value at the optimal `γ = 1/√(4D)`.
pub fn excess_risk_single<T: Scalar>(
    qhat: &ReferencePosterior<T>,
    prior: Option<&GaussianDist<T>>,
    cfg: &BoundConfig,
) -> Result<f64> {
    cfg.validate()?;
    let d1 = match qhat {
        ReferencePosterior::Gaussian(q) => {
            let prior = prior.ok_or_else(|| Error::InvalidConfig("a Gaussian reference needs a prior".into()))?;
            kl_gaussian(q, prior)?
        }
        ReferencePosterior::Dirac { log_inv_q } => log_inv_q.iter().copied().sum(),
    };
    Ok(cfg.constant() / cfg.sqrt_n() * d1.to_f64_lossy().sqrt())
}

/// Multiscale gap `C/(d√n) Σ_i √D_i`.
pub fn excess_risk_multiscale<T: Scalar>(
    qhat: &ReferencePosterior<T>,
    prior: Option<&GaussianDist<T>>,
    cfg: &BoundConfig,
    partition: &BlockPartition,
) -> Result<f64> {
    cfg.validate()?;
    if partition.num_blocks() != cfg.depth {
        return Err(Error::DimensionMismatch {
            expected: cfg.depth,
            got: partition.num_blocks(),
        });
    }
    let ds = divergences(qhat, prior, partition)?;
    let total: f64 = ds.iter().map(|d| d.to_f64_lossy().sqrt()).sum();
    Ok(cfg.constant() / (cfg.depth as f64 * cfg.sqrt_n()) * total)
}

fn check_terms(mi_terms: &[f64]) -> Result<()> {
    match mi_terms.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        Some(index) => Err(Error::NegativeDivergenceInput {
            index,
            value: mi_terms[index],
        }),
        None => Ok(()),
    }
}

/// Minimizers `γ_i = 1/√(4 D_i)` of `γ D + 1/(4γ)`; `+∞` where `D_i = 0`.
pub fn optimal_gammas(mi_terms: &[f64]) -> Result<Vec<f64>> {
    check_terms(mi_terms)?;
    Ok(mi_terms
        .iter()
        .map(|&d| {
            if d == 0.0 {
                f64::INFINITY
            } else {
                1.0 / (2.0 * d.sqrt())
            }
        })
        .collect())
}

/// `C/(d√n) inf_γ Σ (γ_i D_i + 1/(4γ_i)) = C/(d√n) Σ √D_i`.
pub fn generalization_bound_value(mi_terms: &[f64], cfg: &BoundConfig) -> Result<f64> {
    cfg.validate()?;
    check_terms(mi_terms)?;
    if mi_terms.len() != cfg.depth {
        return Err(Error::DimensionMismatch {
            expected: cfg.depth,
            got: mi_terms.len(),
        });
    }
    let total: f64 = mi_terms.iter().map(|d| d.sqrt()).sum();
    Ok(cfg.constant() / (cfg.depth as f64 * cfg.sqrt_n()) * total)
}

/// `C/(d√n) Σ (γ_i D_i + 1/(4γ_i))` at the given `γ`.
pub fn generalization_bound_at(mi_terms: &[f64], gamma: &[f64], cfg: &BoundConfig) -> Result<f64> {
    cfg.validate()?;
    check_terms(mi_terms)?;
    if mi_terms.len() != cfg.depth || gamma.len() != cfg.depth {
        return Err(Error::DimensionMismatch {
            expected: cfg.depth,
            got: mi_terms.len().min(gamma.len()),
        });
    }
    let total: f64 = mi_terms.iter().zip(gamma).map(|(&d, &g)| g * d + 0.25 / g).sum();
    Ok(cfg.constant() / (cfg.depth as f64 * cfg.sqrt_n()) * total)
}

/// Exact and closed-form approximations of `Σ_i DPG(i)` for a depth-`d/M` teacher.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeacherStudentSum {
    pub exact: f64,
    pub approx: f64,
}

/// `exact = √L (d√d' - Σ_{j=1}^{d'} √j)` and `approx = √L d^{3/2} (M - 2/3) / M^{3/2}` with `d' = d/M`.
pub fn teacher_student_dpg_sum(d: usize, m: f64, log_inv_q2: f64) -> Result<TeacherStudentSum> {
    let ratio = d as f64 / m;
    let d_prime = ratio.round();
    if !(m > 0.0) || d_prime < 1.0 || (ratio - d_prime).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::NonIntegerTeacherDepth(ratio));
    }
    if !(log_inv_q2 >= 0.0) || !log_inv_q2.is_finite() {
        return Err(Error::NegativeDivergenceInput {
            index: 0,
            value: log_inv_q2,
        });
    }
    let dp = d_prime as usize;
    let root = log_inv_q2.sqrt();
    let df = d as f64;
    let partial: f64 = (1..=dp).map(|j| (j as f64).sqrt()).sum();
    Ok(TeacherStudentSum {
        exact: root * (df * d_prime.sqrt() - partial),
        approx: root * df.powf(1.5) * (m - 2.0 / 3.0) / m.powf(1.5),
    })
}

/// Everything a bound evaluation produces, for JSON reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub config: BoundConfig,
    pub constant_c: f64,
    pub constant_note: String,
    pub divergences: Vec<f64>,
    pub gamma_star: Vec<Option<f64>>,
    pub dpg: Vec<f64>,
    pub excess_single: f64,
    pub excess_multiscale: f64,
    pub improvement: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_at_gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub teacher_student: Option<TeacherStudentSum>,
}

/// Evaluates every bound quantity for `qhat` against `prior`.
pub fn bound_report<T: Scalar>(
    qhat: &ReferencePosterior<T>,
    prior: Option<&GaussianDist<T>>,
    partition: &BlockPartition,
    cfg: &BoundConfig,
) -> Result<BoundReport> {
    let ds: Vec<f64> = divergences(qhat, prior, partition)?
        .into_iter()
        .map(|d| d.to_f64_lossy())
        .collect();
    let single = excess_risk_single(qhat, prior, cfg)?;
    let multi = excess_risk_multiscale(qhat, prior, cfg, partition)?;
    let dpgs: Vec<f64> = ds.iter().map(|d| ds[0].sqrt() - d.sqrt()).collect();
    let gamma_star = optimal_gammas(&ds)?
        .into_iter()
        .map(|g| g.is_finite().then_some(g))
        .collect();
    let bound_at_gamma = match &cfg.gamma {
        Some(g) => Some(generalization_bound_at(&ds, g, cfg)?),
        None => None,
    };
    Ok(BoundReport {
        config: cfg.clone(),
        constant_c: cfg.constant(),
        constant_note: "C = 2(eR)^2 taken verbatim; the sub-Gaussian constant convention is not fixed further".into(),
        divergences: ds,
        gamma_star,
        dpg: dpgs,
        excess_single: single,
        excess_multiscale: multi,
        improvement: single - multi,
        bound_at_gamma,
        teacher_student: None,
    })
}
