use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use msent::oracle::{minimize_tabular, Objective, OracleSettings};
use msent::tabular::{self, decimation_chain, validate_chain};
use msent::{solve_max_entropy, solve_min_relative_entropy, solve_mt, TabularBackend};
use msent::{EnergyTable, ProductSpace, ScaleMap, TabularDist, TemperatureSchedule};

use crate::input::{json_report, FieldContext, Source};
use crate::Algorithm;

/// Largest total-variation distance to the oracle that counts as agreement.
pub const TV_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularConfig {
    pub algorithm: Algorithm,
    pub space: Vec<usize>,
    pub f: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    pub lambda: f64,
    pub sigma: Vec<f64>,
    /// Scale maps `T_1 .. T_{d-1}`; the decimation chain when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<Vec<ScaleMap>>,
    #[serde(default)]
    pub oracle: OracleSettings,
}

#[derive(Debug, Serialize)]
struct Verification {
    oracle: TabularDist<f64>,
    oracle_objective: f64,
    iterations: usize,
    stationarity_gap: f64,
    tv_distance: f64,
    tolerance: f64,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct Output {
    solution: TabularDist<f64>,
    objective: f64,
    verification: Option<Verification>,
}

/// Runs the configured solve; returns the JSON report and whether verification passed.
pub fn run(src: &Source, verify: bool) -> Result<(String, bool)> {
    let cfg: TabularConfig = src.parse()?;
    let space = ProductSpace::new(cfg.space.clone()).field(src, "space")?;
    let f = EnergyTable::new(space.clone(), cfg.f.clone()).field(src, "f")?;
    let sched = TemperatureSchedule::new(cfg.lambda, cfg.sigma.clone()).field(src, "sigma")?;
    let chain = match &cfg.chain {
        Some(chain) => {
            validate_chain(&space, chain).field(src, "chain")?;
            chain.clone()
        }
        None => decimation_chain(&space),
    };
    if chain.len() + 1 != sched.depth() {
        return Err(src.field_error(
            "sigma",
            format!(
                "{} scale coefficients for a chain of {} maps",
                sched.depth(),
                chain.len()
            ),
        ));
    }
    let q = match (&cfg.q, cfg.algorithm) {
        (Some(_), Algorithm::MaxEntropy) => return Err(src.field_error("q", "max-entropy takes no reference")),
        (None, Algorithm::MaxEntropy) => None,
        (Some(q), _) => Some(TabularDist::new(space.clone(), q.clone()).field(src, "q")?),
        (None, _) => bail!("{} requires a reference distribution `q`", cfg.algorithm),
    };
    let backend = TabularBackend::new(space, chain.clone()).field(src, "chain")?;

    let solution = match (cfg.algorithm, &q) {
        (Algorithm::MaxEntropy, _) => solve_max_entropy(&f, &sched, &backend)?,
        (Algorithm::MinRelEntropy, Some(q)) => solve_min_relative_entropy(&f, q, &sched, &backend)?,
        (Algorithm::Mt, Some(q)) => {
            if !backend.chain().iter().all(ScaleMap::is_decimation) {
                return Err(src.field_error("chain", "mt requires a decimation chain"));
            }
            let gibbs = tabular::gibbs(&f, q, 1.0 / (sched.lambda() * sched.sigma()[0]))?;
            solve_mt(&gibbs, q, &sched, &backend)?
        }
        _ => unreachable!("reference presence checked above"),
    }
    .distribution;

    let objective_of = |p: &TabularDist<f64>| match &q {
        Some(q) => tabular::min_relative_entropy_objective(p, &f, q, &sched, &chain),
        None => tabular::max_entropy_objective(p, &f, &sched, &chain),
    };
    let objective = objective_of(&solution)?;

    let verification = if verify {
        let objective_kind = match &q {
            Some(reference) => Objective::MinRelativeEntropy { reference },
            None => Objective::MaxEntropy,
        };
        let oracle = minimize_tabular(objective_kind, &f, &sched, &chain, &cfg.oracle)?;
        let tv = solution.total_variation(&oracle.distribution)?;
        Some(Verification {
            oracle_objective: objective_of(&oracle.distribution)?,
            oracle: oracle.distribution,
            iterations: oracle.iterations,
            stationarity_gap: oracle.gap,
            tv_distance: tv,
            tolerance: TV_TOLERANCE,
            passed: tv <= TV_TOLERANCE,
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
    Ok((json_report("solve-tabular", &cfg, &out)?, passed))
}
