//! Teacher-student sweep over the alpha schedule and the temperature `sigma_1`.
//!
//! For every `sigma_1` the Gauss-Newton Gibbs posterior is built once and
//! then marginalize-tilted for every `alpha`. Risks are estimated with the
//! same Monte-Carlo seed at every grid point (common random numbers), so
//! differences between grid points are not masked by sampling noise.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::gibbs_gaussian;
use crate::nn::{
    gauss_newton_energy, multiscale_posterior_from_gibbs, teacher_student_data, ResNetParams, RiskBank, RiskEstimate,
    TeacherStudent, TeacherStudentConfig,
};

/// `points` values with log10 spaced evenly over `[log10_min, log10_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogGrid {
    pub log10_min: f64,
    pub log10_max: f64,
    pub points: usize,
}

impl LogGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![10f64.powf(self.log10_min)];
        }
        let step = (self.log10_max - self.log10_min) / (self.points - 1) as f64;
        (0..self.points)
            .map(|k| 10f64.powf(self.log10_min + step * k as f64))
            .collect()
    }
}

fn default_alphas() -> Vec<f64> {
    let mut a: Vec<f64> = (0..20).map(|k| k as f64 / 20.0).collect();
    a.push(0.999);
    a
}

fn default_sigma1() -> LogGrid {
    LogGrid {
        log10_min: -9.5,
        log10_max: -2.5,
        points: 29,
    }
}

fn default_n_test() -> usize {
    2000
}

fn default_n_weights() -> usize {
    200
}

/// Full sweep configuration; the defaults reproduce the published setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: TeacherStudentConfig,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_sigma1")]
    pub sigma1: LogGrid,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default = "default_n_weights")]
    pub n_weights: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: TeacherStudentConfig::default(),
            alphas: default_alphas(),
            sigma1: default_sigma1(),
            n_test: default_n_test(),
            n_weights: default_n_weights(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.alphas.is_empty() || self.sigma1.points == 0 {
            return Err(Error::InvalidConfig("alpha and sigma1 grids must be nonempty".into()));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a >= 0.0 && **a <= 0.999)) {
            return Err(Error::InvalidConfig(format!("alpha {a} outside [0, 0.999]")));
        }
        if !self.sigma1.log10_min.is_finite() || !self.sigma1.log10_max.is_finite() {
            return Err(Error::InvalidConfig("sigma1 grid bounds must be finite".into()));
        }
        if self.n_test == 0 || self.n_weights == 0 {
            return Err(Error::InvalidConfig("n_test and n_weights must be positive".into()));
        }
        Ok(())
    }
}

/// Risk at one `(alpha, sigma_1)` grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub alpha: f64,
    pub sigma1: f64,
    pub risk: RiskEstimate,
}

/// Smallest risk over `sigma_1` for one `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub alpha: f64,
    pub best_sigma1: f64,
    pub risk: RiskEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub points: Vec<GridPoint>,
    pub summary: Vec<SummaryRow>,
}

/// Independent 64-bit seed for a named purpose.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng.next_u64()
}

const TEACHER_TAG: u64 = 1;
const RISK_TAG: u64 = 2;

/// The teacher and training sample a sweep with this seed uses.
pub fn draw_teacher_student(model: &TeacherStudentConfig, seed: u64) -> Result<TeacherStudent<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TEACHER_TAG));
    teacher_student_data(model, &mut rng)
}

/// Runs the sweep on `workers` threads (all available when `None`).
pub fn run_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentResult> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| sweep(cfg))
}

fn sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let model = &cfg.model;
    let ts = draw_teacher_student(model, cfg.seed)?;
    let energy = gauss_newton_energy(&ResNetParams::zeros(model.width, model.depth), &ts.train)?;
    let prior = model.prior::<f64>()?;
    let partition = model.partition();
    let bank = RiskBank::draw(
        &ts.teacher,
        model.input_variance,
        cfg.n_test,
        cfg.n_weights,
        derive_seed(cfg.seed, RISK_TAG),
    )?;

    let sigmas = cfg.sigma1.values();
    let per_sigma: Vec<Result<Vec<GridPoint>>> = sigmas
        .par_iter()
        .map(|&sigma1| {
            let gibbs = gibbs_gaussian(&energy, &prior, 1.0 / sigma1)?;
            cfg.alphas
                .par_iter()
                .map(|&alpha| {
                    let post = multiscale_posterior_from_gibbs(&gibbs, &prior, alpha, sigma1, &partition)?;
                    let risk = bank.estimate(&post.distribution)?;
                    Ok(GridPoint { alpha, sigma1, risk })
                })
                .collect()
        })
        .collect();
    let mut points = Vec::with_capacity(sigmas.len() * cfg.alphas.len());
    for chunk in per_sigma {
        points.extend(chunk?);
    }
    points.sort_by(|a, b| a.alpha.total_cmp(&b.alpha).then(a.sigma1.total_cmp(&b.sigma1)));
    let summary = summarize(&points);
    Ok(ExperimentResult { points, summary })
}

/// Minimum risk over `sigma_1` per `alpha`, in increasing `alpha`.
pub fn summarize(points: &[GridPoint]) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = Vec::new();
    for p in points {
        match rows.iter_mut().find(|r| r.alpha == p.alpha) {
            Some(row) if p.risk.mean < row.risk.mean => {
                row.best_sigma1 = p.sigma1;
                row.risk = p.risk;
            }
            Some(_) => {}
            None => rows.push(SummaryRow {
                alpha: p.alpha,
                best_sigma1: p.sigma1,
                risk: p.risk,
            }),
        }
    }
    rows.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    rows
}

/// Nine significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.8e}")
}

fn provenance(cfg: &ExperimentConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    format!("# msent {}\n# config {json}\n", crate::VERSION)
}

impl ExperimentResult {
    /// Columns `alpha,sigma1,risk,risk_stderr`, sorted by `(alpha, sigma1)`.
    pub fn grid_csv(&self, cfg: &ExperimentConfig) -> String {
        let mut out = provenance(cfg);
        out.push_str("alpha,sigma1,risk,risk_stderr\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                format_float(p.alpha),
                format_float(p.sigma1),
                format_float(p.risk.mean),
                format_float(p.risk.stderr)
            ));
        }
        out
    }

    /// Columns `alpha,best_sigma1,min_risk,risk_stderr`.
    pub fn summary_csv(&self, cfg: &ExperimentConfig) -> String {
        let mut out = provenance(cfg);
        out.push_str("alpha,best_sigma1,min_risk,risk_stderr\n");
        for r in &self.summary {
            out.push_str(&format!(
                "{},{},{},{}\n",
                format_float(r.alpha),
                format_float(r.best_sigma1),
                format_float(r.risk.mean),
                format_float(r.risk.stderr)
            ));
        }
        out
    }
}
