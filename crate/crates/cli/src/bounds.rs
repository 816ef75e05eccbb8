use anyhow::Result;
use serde::{Deserialize, Serialize};

use msent::bounds::{bound_report, teacher_student_dpg_sum, BoundConfig, BoundReport, ReferencePosterior};
use msent::experiment::draw_teacher_student;
use msent::nn::TeacherStudentConfig;
use msent::{BlockPartition, GaussianDist, Matrix};

use crate::input::{json_report, FieldContext, Source};

/// How the concentrated reference posterior `Q̂` is specified.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceConfig {
    /// Point mass with per-layer prior penalties `log(1/q_k)`.
    Dirac { log_inv_q: Vec<f64> },
    Gaussian {
        block_sizes: BlockPartition,
        reference: Box<GaussianDist<f64>>,
        prior: Box<GaussianDist<f64>>,
    },
    /// `N(teacher weights, variance I)` against the model prior, teacher drawn as in the sweep.
    Teacher {
        model: TeacherStudentConfig,
        variance: f64,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeacherStudentSumConfig {
    pub depth: usize,
    pub ratio: f64,
    pub log_inv_q2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub input_bound: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
    pub reference: ReferenceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teacher_student: Option<TeacherStudentSumConfig>,
}

#[derive(Debug, Serialize)]
struct Output {
    report: BoundReport,
}

pub fn run(src: &Source, seed: Option<u64>) -> Result<String> {
    let mut cfg: BoundsConfig = src.parse()?;
    if let (Some(s), ReferenceConfig::Teacher { seed, .. }) = (seed, &mut cfg.reference) {
        *seed = s;
    }
    let (qhat, prior, partition) = match &cfg.reference {
        ReferenceConfig::Dirac { log_inv_q } => {
            let partition = BlockPartition::uniform(log_inv_q.len(), 1).field(src, "log_inv_q")?;
            let qhat = ReferencePosterior::dirac(log_inv_q.clone()).field(src, "log_inv_q")?;
            (qhat, None, partition)
        }
        ReferenceConfig::Gaussian {
            block_sizes,
            reference,
            prior,
        } => (
            ReferencePosterior::Gaussian(reference.as_ref().clone()),
            Some(prior.as_ref().clone()),
            block_sizes.clone(),
        ),
        ReferenceConfig::Teacher { model, variance, seed } => {
            model.validate().field(src, "model")?;
            if !(*variance > 0.0) {
                return Err(src.field_error("variance", "must be positive"));
            }
            let teacher = draw_teacher_student(model, *seed)?.teacher.flatten();
            let n = teacher.len();
            let qhat = GaussianDist::new(teacher, Matrix::identity(n).scaled(*variance))?;
            (
                ReferencePosterior::Gaussian(qhat),
                Some(model.prior()?),
                model.partition(),
            )
        }
    };
    let bound_cfg = BoundConfig {
        input_bound: cfg.input_bound,
        n: cfg.n,
        depth: partition.num_blocks(),
        gamma: cfg.gamma.clone(),
    };
    bound_cfg.validate().field(src, "input_bound")?;
    let mut report = bound_report(&qhat, prior.as_ref(), &partition, &bound_cfg)?;
    if let Some(ts) = &cfg.teacher_student {
        report.teacher_student =
            Some(teacher_student_dpg_sum(ts.depth, ts.ratio, ts.log_inv_q2).field(src, "teacher_student")?);
    }
    json_report("bounds", &cfg, &Output { report })
}
