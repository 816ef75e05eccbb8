use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use msent::gaussian::{expected_energy, gibbs_gaussian, multiscale_entropy_gaussian, multiscale_kl_gaussian};
use msent::oracle::{discretized_gaussian_moments, standardized_moment_error, OracleSettings};
use msent::{solve_max_entropy, solve_min_relative_entropy, solve_mt, GaussianBackend};
use msent::{BlockPartition, GaussianDist, QuadraticEnergy, TemperatureSchedule};

use crate::input::{json_report, FieldContext, Source};
use crate::Algorithm;

/// Largest moment discrepancy against the lattice replay, in standard deviations.
pub const MOMENT_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianConfig {
    pub algorithm: Algorithm,
    pub block_sizes: BlockPartition,
    pub energy: QuadraticEnergy<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<GaussianDist<f64>>,
    pub lambda: f64,
    pub sigma: Vec<f64>,
    #[serde(default)]
    pub oracle: OracleSettings,
}

#[derive(Debug, Serialize)]
struct Verification {
    method: &'static str,
    points_per_axis: Vec<usize>,
    lattice_mean: Vec<f64>,
    lattice_cov: Vec<f64>,
    standardized_error: f64,
    tolerance: f64,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct Output {
    solution: GaussianDist<f64>,
    objective: f64,
    verification: Option<Verification>,
}

pub fn run(src: &Source, verify: bool) -> Result<(String, bool)> {
    let cfg: GaussianConfig = src.parse()?;
    let partition = &cfg.block_sizes;
    partition.check_dim(cfg.energy.dim()).field(src, "energy")?;
    let sched = TemperatureSchedule::new(cfg.lambda, cfg.sigma.clone()).field(src, "sigma")?;
    if sched.depth() != partition.num_blocks() {
        return Err(src.field_error(
            "sigma",
            format!(
                "{} scale coefficients for {} blocks",
                sched.depth(),
                partition.num_blocks()
            ),
        ));
    }
    let prior = match (&cfg.prior, cfg.algorithm) {
        (Some(_), Algorithm::MaxEntropy) => return Err(src.field_error("prior", "max-entropy takes no reference")),
        (None, Algorithm::MaxEntropy) => None,
        (Some(p), _) => {
            partition.check_dim(p.dim()).field(src, "prior")?;
            Some(p)
        }
        (None, _) => bail!("{} requires a Gaussian `prior`", cfg.algorithm),
    };
    let backend = GaussianBackend::new(partition.clone());
    let solved = match (cfg.algorithm, prior) {
        (Algorithm::MaxEntropy, _) => solve_max_entropy(&cfg.energy, &sched, &backend)?,
        (Algorithm::MinRelEntropy, Some(p)) => solve_min_relative_entropy(&cfg.energy, p, &sched, &backend)?,
        (Algorithm::Mt, Some(p)) => {
            let gibbs = gibbs_gaussian(&cfg.energy, p, 1.0 / (sched.lambda() * sched.sigma()[0]))?;
            solve_mt(&gibbs, p, &sched, &backend)?
        }
        _ => unreachable!("prior presence checked above"),
    };
    let solution = solved.distribution;
    let energy_term = expected_energy(&cfg.energy, &solution)?;
    let objective = match prior {
        Some(p) => energy_term + sched.lambda() * multiscale_kl_gaussian(&solution, p, sched.sigma(), partition)?,
        None => multiscale_entropy_gaussian(&solution, sched.sigma(), partition)? - sched.lambda() * energy_term,
    };

    let verification = if verify {
        let cover = [&solution, &solved.intermediates[0]];
        let lattice = discretized_gaussian_moments(&cfg.energy, prior, &sched, partition, &cover, &cfg.oracle)?;
        let err = standardized_moment_error(&solution, &lattice);
        Some(Verification {
            method: "lattice replay with the tabular solver",
            points_per_axis: lattice.points_per_axis,
            lattice_mean: lattice.mean,
            lattice_cov: lattice.cov.into_vec(),
            standardized_error: err,
            tolerance: MOMENT_TOLERANCE,
            passed: err <= MOMENT_TOLERANCE,
        })
    } else {
        None
    };
    let passed = verification.as_ref().is_none_or(|v| v.passed);
    let out = Output {
        solution,
        objective,
        verification,
    };
    Ok((json_report("solve-gaussian", &cfg, &out)?, passed))
}
