//! Residual tanh networks, teacher-student data, Gauss-Newton energies and
//! multiscale Gibbs posteriors over flattened weights.
//!
//! Weights are flattened layer-major, row-major within a layer, so block `k`
//! of a [`BlockPartition`] is exactly layer `W_k`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{gibbs_gaussian, BlockPartition, GaussianDist, QuadraticEnergy};
use crate::linalg::{dot, Matrix};
use crate::multiscale::{solve_mt, GaussianBackend, Solution};
use crate::scalar::Scalar;
use crate::schedule::alpha_schedule;

/// Width `m`, depth `d` and input-norm bound `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetShape {
    pub width: usize,
    pub depth: usize,
    pub input_bound: f64,
}

impl NetShape {
    pub fn new(width: usize, depth: usize, input_bound: f64) -> Result<Self> {
        if width == 0 || depth == 0 || !(input_bound > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "net shape needs width, depth >= 1 and R > 0, got m={width} d={depth} R={input_bound}"
            )));
        }
        Ok(Self {
            width,
            depth,
            input_bound,
        })
    }

    /// Number of weights `d m^2`.
    pub fn num_params(&self) -> usize {
        self.depth * self.width * self.width
    }

    /// One block of `m^2` coordinates per layer.
    pub fn partition(&self) -> BlockPartition {
        BlockPartition::uniform(self.depth, self.width * self.width).expect("shape is validated")
    }
}

/// Layer matrices `W_1 .. W_d`, each `m x m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams<T>", into = "RawParams<T>")]
#[serde(bound = "T: Scalar")]
pub struct ResNetParams<T: Scalar> {
    width: usize,
    layers: Vec<Matrix<T>>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct RawParams<T> {
    width: usize,
    layers: Vec<Vec<T>>,
}

impl<T: Scalar> TryFrom<RawParams<T>> for ResNetParams<T> {
    type Error = Error;
    fn try_from(raw: RawParams<T>) -> Result<Self> {
        let layers = raw
            .layers
            .into_iter()
            .map(|l| Matrix::from_row_major(raw.width, raw.width, l))
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }
}

impl<T: Scalar> From<ResNetParams<T>> for RawParams<T> {
    fn from(p: ResNetParams<T>) -> Self {
        RawParams {
            width: p.width,
            layers: p.layers.into_iter().map(Matrix::into_vec).collect(),
        }
    }
}

impl<T: Scalar> ResNetParams<T> {
    pub fn new(layers: Vec<Matrix<T>>) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::InvalidConfig("network needs at least one layer".into()));
        };
        let width = first.rows();
        if width == 0 {
            return Err(Error::InvalidConfig("network width must be positive".into()));
        }
        for l in &layers {
            if l.rows() != width || l.cols() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    got: l.rows().max(l.cols()),
                });
            }
            if !l.is_finite() {
                return Err(Error::NonFinite { index: 0 });
            }
        }
        Ok(Self { width, layers })
    }

    pub fn zeros(width: usize, depth: usize) -> Self {
        Self {
            width,
            layers: vec![Matrix::zeros(width, width); depth],
        }
    }

    /// Inverse of [`ResNetParams::flatten`].
    pub fn from_flat(width: usize, depth: usize, flat: &[T]) -> Result<Self> {
        let block = width * width;
        if flat.len() != depth * block {
            return Err(Error::DimensionMismatch {
                expected: depth * block,
                got: flat.len(),
            });
        }
        let layers = flat
            .chunks(block)
            .map(|c| Matrix::from_row_major(width, width, c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Matrix<T>] {
        &self.layers
    }

    pub fn layer_mut(&mut self, k: usize) -> &mut Matrix<T> {
        &mut self.layers[k]
    }

    pub fn flatten(&self) -> Vec<T> {
        self.layers.iter().flat_map(|l| l.as_slice().iter().copied()).collect()
    }

    /// Largest singular value of layer `k` (0-based).
    pub fn spectral_norm(&self, k: usize) -> T {
        let w = &self.layers[k];
        let gram = w.transpose_matmul(w);
        let eig = gram.symmetric_eigen();
        eig.values.iter().copied().fold(T::zero(), T::max).sqrt()
    }

    /// Rescales every layer whose spectral norm exceeds `limit` onto the sphere of radius `limit`.
    pub fn project_spectral(&mut self, limit: T) {
        for k in 0..self.depth() {
            let norm = self.spectral_norm(k);
            if norm > limit {
                self.layers[k] = self.layers[k].scaled(limit / norm);
            }
        }
    }

    /// Whether each `||W_k||_2 <= 1/d` (up to rounding).
    pub fn satisfies_spectral_bound(&self) -> bool {
        self.spectral_violation().is_none()
    }

    fn spectral_violation(&self) -> Option<Error> {
        let limit = T::one() / T::from_usize_lossy(self.depth());
        let slack = limit * (T::one() + T::lit(T::TOL.identity));
        (0..self.depth()).find_map(|k| {
            let norm = self.spectral_norm(k);
            (norm > slack).then(|| Error::SpectralNormViolated {
                layer: k + 1,
                norm: norm.to_f64_lossy(),
                limit: limit.to_f64_lossy(),
            })
        })
    }
}

/// Input-output pairs `(x_i, y_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Dataset<T> {
    pub inputs: Vec<Vec<T>>,
    pub targets: Vec<Vec<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(inputs: Vec<Vec<T>>, targets: Vec<Vec<T>>) -> Result<Self> {
        if inputs.len() != targets.len() || inputs.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                got: targets.len(),
            });
        }
        let m = inputs[0].len();
        if inputs.iter().chain(&targets).any(|v| v.len() != m) {
            return Err(Error::InvalidConfig("inputs and targets must share one width".into()));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Whether every input satisfies `|x|_2 <= bound`.
    pub fn inputs_bounded(&self, bound: T) -> bool {
        self.inputs.iter().all(|x| dot(x, x).sqrt() <= bound)
    }
}

/// Hidden states `h_0 = x, .., h_d` and pre-activations `W_k h_{k-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass<T> {
    pub hidden: Vec<Vec<T>>,
    pub pre_activations: Vec<Vec<T>>,
}

impl<T: Scalar> ForwardPass<T> {
    pub fn output(&self) -> &[T] {
        self.hidden.last().expect("hidden states include the input")
    }
}

/// `h_k = tanh(W_k h_{k-1}) + h_{k-1}`.
pub fn forward<T: Scalar>(params: &ResNetParams<T>, x: &[T]) -> ForwardPass<T> {
    assert_eq!(x.len(), params.width, "input width");
    let mut hidden = Vec::with_capacity(params.depth() + 1);
    let mut pre_activations = Vec::with_capacity(params.depth());
    hidden.push(x.to_vec());
    for w in &params.layers {
        let h = hidden.last().expect("nonempty");
        let z = w.matvec(h);
        let next = z.iter().zip(h).map(|(&zi, &hi)| zi.tanh() + hi).collect();
        pre_activations.push(z);
        hidden.push(next);
    }
    ForwardPass {
        hidden,
        pre_activations,
    }
}

/// `tanh` through one exponential; absolute error within a few ulps of 1.
#[inline]
fn fast_tanh<T: Scalar>(z: T) -> T {
    let two = T::lit(2.0);
    T::one() - two / ((two * z).exp() + T::one())
}

/// Network output only, for bulk risk evaluation.
///
/// Uses an exponential-based `tanh`, so results can differ from
/// [`forward`] in the last bits.
pub fn predict<T: Scalar>(params: &ResNetParams<T>, x: &[T]) -> Vec<T> {
    let mut h = x.to_vec();
    let mut z = vec![T::zero(); h.len()];
    predict_into(params, &mut h, &mut z);
    h
}

fn predict_into<T: Scalar>(params: &ResNetParams<T>, h: &mut [T], z: &mut [T]) {
    for w in &params.layers {
        for (a, za) in z.iter_mut().enumerate() {
            *za = dot(w.row(a), h);
        }
        for (ha, &za) in h.iter_mut().zip(z.iter()) {
            *ha += fast_tanh(za);
        }
    }
}

/// Norms `|h_k - h_{k-1}|_2` for `k = 1..d`; requires every `||W_k||_2 <= 1/d`.
pub fn residual_increment_check<T: Scalar>(params: &ResNetParams<T>, x: &[T]) -> Result<Vec<T>> {
    if let Some(err) = params.spectral_violation() {
        return Err(err);
    }
    let pass = forward(params, x);
    Ok(pass
        .hidden
        .windows(2)
        .map(|w| {
            w[1].iter()
                .zip(&w[0])
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<T>()
                .sqrt()
        })
        .collect())
}

/// The increment bound `e |x|_2 / d`.
pub fn increment_bound<T: Scalar>(x: &[T], depth: usize) -> T {
    T::E() * dot(x, x).sqrt() / T::from_usize_lossy(depth)
}

fn squared_error<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&u, &v)| (u - v) * (u - v)).sum()
}

/// Mean squared error `(1/n) Σ |h(x_i) - y_i|^2`.
pub fn empirical_risk<T: Scalar>(params: &ResNetParams<T>, data: &Dataset<T>) -> T {
    let total: T = data
        .inputs
        .iter()
        .zip(&data.targets)
        .map(|(x, y)| squared_error(&predict(params, x), y))
        .sum();
    total / T::from_usize_lossy(data.len())
}

/// Jacobian of the output with respect to the flattened weights (`m x d m^2`).
pub fn weight_jacobian<T: Scalar>(params: &ResNetParams<T>, x: &[T]) -> Matrix<T> {
    let pass = forward(params, x);
    jacobian_from_pass(params, &pass)
}

fn jacobian_from_pass<T: Scalar>(params: &ResNetParams<T>, pass: &ForwardPass<T>) -> Matrix<T> {
    let m = params.width;
    let d = params.depth();
    let block = m * m;
    let mut jac = Matrix::zeros(m, d * block);
    // g = d h_d / d h_k, updated from the top layer down
    let mut g = Matrix::identity(m);
    for k in (0..d).rev() {
        let deriv: Vec<T> = pass.pre_activations[k]
            .iter()
            .map(|&z| {
                let t = z.tanh();
                T::one() - t * t
            })
            .collect();
        let h_prev = &pass.hidden[k];
        for row in 0..m {
            for a in 0..m {
                let ga = g[(row, a)] * deriv[a];
                if ga == T::zero() {
                    continue;
                }
                let offset = k * block + a * m;
                for (b, &hb) in h_prev.iter().enumerate() {
                    jac[(row, offset + b)] = ga * hb;
                }
            }
        }
        if k > 0 {
            // g <- g (I + diag(deriv) W_k)
            let mut scaled = params.layers[k].clone();
            for a in 0..m {
                for b in 0..m {
                    scaled[(a, b)] *= deriv[a];
                }
            }
            g = g.add(&g.matmul(&scaled));
        }
    }
    jac
}

/// Gauss-Newton model of the empirical risk around `params0`, in absolute weight coordinates.
///
/// With residuals `r_i = h(x_i) - y_i` and Jacobians `J_i`, the model around
/// `w0` is `L_S(w0) + g^T (w - w0) + 1/2 (w - w0)^T K (w - w0)` with
/// `g = (2/n) Σ J_i^T r_i` and `K = (2/n) Σ J_i^T J_i`.
pub fn gauss_newton_energy<T: Scalar>(params0: &ResNetParams<T>, data: &Dataset<T>) -> Result<QuadraticEnergy<T>> {
    let p = params0.depth() * params0.width * params0.width;
    let mut k = Matrix::zeros(p, p);
    let mut g = vec![T::zero(); p];
    let mut loss = T::zero();
    for (x, y) in data.inputs.iter().zip(&data.targets) {
        let pass = forward(params0, x);
        let r: Vec<T> = pass.output().iter().zip(y).map(|(&h, &t)| h - t).collect();
        loss += dot(&r, &r);
        let jac = jacobian_from_pass(params0, &pass);
        let jtr = jac.transpose_matvec(&r);
        for (gi, v) in g.iter_mut().zip(jtr) {
            *gi += v;
        }
        k = k.add(&jac.transpose_matmul(&jac));
    }
    let n = T::from_usize_lossy(data.len());
    let two_over_n = T::lit(2.0) / n;
    k = k.scaled(two_over_n);
    g.iter_mut().for_each(|v| *v *= two_over_n);
    let mut c = loss / n;
    let w0 = params0.flatten();
    if w0.iter().any(|&v| v != T::zero()) {
        let kw0 = k.matvec(&w0);
        c = c - dot(&g, &w0) + T::lit(0.5) * dot(&w0, &kw0);
        for (gi, v) in g.iter_mut().zip(kw0) {
            *gi -= v;
        }
    }
    QuadraticEnergy::new(k, g, c)
}

/// Multiscale Gibbs posterior under the alpha schedule, with `lambda = 1`.
pub fn multiscale_posterior<T: Scalar>(
    energy: &QuadraticEnergy<T>,
    prior: &GaussianDist<T>,
    alpha: T,
    sigma1: T,
    partition: &BlockPartition,
) -> Result<GaussianDist<T>> {
    let gibbs = gibbs_gaussian(energy, prior, T::one() / sigma1)?;
    Ok(multiscale_posterior_from_gibbs(&gibbs, prior, alpha, sigma1, partition)?.distribution)
}

/// Marginalize-tilt from a precomputed microscopic Gibbs posterior at temperature `sigma1`.
pub fn multiscale_posterior_from_gibbs<T: Scalar>(
    gibbs: &GaussianDist<T>,
    prior: &GaussianDist<T>,
    alpha: T,
    sigma1: T,
    partition: &BlockPartition,
) -> Result<Solution<GaussianDist<T>>> {
    let sched = alpha_schedule(alpha, sigma1, partition.num_blocks())?;
    solve_mt(gibbs, prior, &sched, &GaussianBackend::new(partition.clone()))
}

/// Teacher-student setup: a depth-`teacher_depth` teacher embedded in the last layers of a depth-`depth` student.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeacherStudentConfig {
    pub width: usize,
    pub depth: usize,
    pub teacher_depth: usize,
    pub n_train: usize,
    pub teacher_variance: f64,
    pub prior_variance: f64,
    pub input_variance: f64,
}

impl Default for TeacherStudentConfig {
    fn default() -> Self {
        Self {
            width: 10,
            depth: 4,
            teacher_depth: 2,
            n_train: 30,
            teacher_variance: 0.1,
            prior_variance: 5e-5,
            input_variance: 1.0,
        }
    }
}

impl TeacherStudentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.depth == 0 || self.n_train == 0 {
            return Err(Error::InvalidConfig("width, depth and n_train must be positive".into()));
        }
        if self.teacher_depth == 0 || self.teacher_depth > self.depth {
            return Err(Error::InvalidConfig(format!(
                "teacher depth {} must lie in 1..={}",
                self.teacher_depth, self.depth
            )));
        }
        for (name, v) in [
            ("teacher_variance", self.teacher_variance),
            ("prior_variance", self.prior_variance),
            ("input_variance", self.input_variance),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// The ratio `M = d / d'`.
    pub fn depth_ratio(&self) -> f64 {
        self.depth as f64 / self.teacher_depth as f64
    }

    pub fn partition(&self) -> BlockPartition {
        BlockPartition::uniform(self.depth, self.width * self.width).expect("validated config")
    }

    /// `N(0, prior_variance I)` over the flattened student weights.
    pub fn prior<T: Scalar>(&self) -> Result<GaussianDist<T>> {
        let p = self.depth * self.width * self.width;
        GaussianDist::isotropic(vec![T::zero(); p], T::lit(self.prior_variance))
    }
}

/// Teacher network and its noiseless training sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TeacherStudent<T: Scalar> {
    pub teacher: ResNetParams<T>,
    pub train: Dataset<T>,
}

/// `count` inputs with i.i.d. `N(0, variance)` coordinates.
pub fn sample_inputs<T: Scalar, R: Rng + ?Sized>(
    width: usize,
    count: usize,
    variance: f64,
    rng: &mut R,
) -> Vec<Vec<T>> {
    let sd = variance.sqrt();
    (0..count)
        .map(|_| {
            (0..width)
                .map(|_| T::lit(sd * rng.sample::<f64, _>(StandardNormal)))
                .collect()
        })
        .collect()
}

/// Draws the teacher (zero layers first, `N(0, teacher_variance)` entries in the last `teacher_depth` layers)
/// and labels `n_train` inputs with it.
pub fn teacher_student_data<T: Scalar, R: Rng + ?Sized>(
    cfg: &TeacherStudentConfig,
    rng: &mut R,
) -> Result<TeacherStudent<T>> {
    cfg.validate()?;
    let m = cfg.width;
    let sd = cfg.teacher_variance.sqrt();
    let mut teacher = ResNetParams::zeros(m, cfg.depth);
    for k in cfg.depth - cfg.teacher_depth..cfg.depth {
        let data = (0..m * m)
            .map(|_| T::lit(sd * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        *teacher.layer_mut(k) = Matrix::from_row_major(m, m, data)?;
    }
    let inputs = sample_inputs(m, cfg.n_train, cfg.input_variance, rng);
    let targets = inputs.iter().map(|x| predict(&teacher, x)).collect();
    Ok(TeacherStudent {
        teacher,
        train: Dataset::new(inputs, targets)?,
    })
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Teacher-labeled test inputs, one batch per posterior weight sample.
///
/// Batch `k` is drawn from ChaCha stream `2k` of the seed, so a bank can be
/// shared across posteriors and the estimate is independent of thread count.
#[derive(Debug, Clone)]
pub struct RiskBank<T> {
    width: usize,
    n_test: usize,
    seed: u64,
    inputs: Vec<Vec<T>>,
    labels: Vec<Vec<T>>,
}

impl<T: Scalar> RiskBank<T> {
    pub fn draw(
        teacher: &ResNetParams<T>,
        input_variance: f64,
        n_test: usize,
        n_weights: usize,
        seed: u64,
    ) -> Result<Self> {
        if n_test == 0 || n_weights == 0 {
            return Err(Error::InvalidConfig("n_test and n_weights must be positive".into()));
        }
        let m = teacher.width();
        let batches: Vec<(Vec<T>, Vec<T>)> = (0..n_weights)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(2 * k as u64);
                let mut inputs = Vec::with_capacity(n_test * m);
                let mut labels = Vec::with_capacity(n_test * m);
                for x in sample_inputs::<T, _>(m, n_test, input_variance, &mut rng) {
                    labels.extend(predict(teacher, &x));
                    inputs.extend(x);
                }
                (inputs, labels)
            })
            .collect();
        let (inputs, labels) = batches.into_iter().unzip();
        Ok(Self {
            width: m,
            n_test,
            seed,
            inputs,
            labels,
        })
    }

    pub fn n_weights(&self) -> usize {
        self.inputs.len()
    }

    pub fn n_test(&self) -> usize {
        self.n_test
    }

    /// Mean risk over posterior draws; draw `k` uses ChaCha stream `2k + 1` and is scored on batch `k`.
    pub fn estimate(&self, posterior: &GaussianDist<T>) -> Result<RiskEstimate> {
        let m = self.width;
        if !posterior.dim().is_multiple_of(m * m) || posterior.dim() == 0 {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                got: posterior.dim(),
            });
        }
        let d = posterior.dim() / (m * m);
        let per_weight: Vec<f64> = (0..self.n_weights())
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(2 * k as u64 + 1);
                let w = posterior.sample(&mut rng);
                let student = ResNetParams::from_flat(m, d, &w).expect("dimension checked");
                let mut h = vec![T::zero(); m];
                let mut z = vec![T::zero(); m];
                let mut total = 0.0;
                for (x, y) in self.inputs[k].chunks(m).zip(self.labels[k].chunks(m)) {
                    h.copy_from_slice(x);
                    predict_into(&student, &mut h, &mut z);
                    total += squared_error(&h, y).to_f64_lossy();
                }
                total / self.n_test as f64
            })
            .collect();
        let nw = per_weight.len() as f64;
        let mean = per_weight.iter().sum::<f64>() / nw;
        let var = if per_weight.len() > 1 {
            per_weight.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (nw - 1.0)
        } else {
            0.0
        };
        Ok(RiskEstimate {
            mean,
            stderr: (var / nw).sqrt(),
        })
    }
}

/// Population risk of a weight drawn from `posterior` against `teacher`, with its Monte-Carlo standard error.
///
/// Averages the squared error over `n_weights` posterior draws, each scored on
/// its own batch of `n_test` fresh inputs; the standard error is the spread
/// across draws.
pub fn population_risk_mc<T: Scalar>(
    posterior: &GaussianDist<T>,
    teacher: &ResNetParams<T>,
    input_variance: f64,
    n_test: usize,
    n_weights: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    let m = teacher.width();
    let d = teacher.depth();
    if posterior.dim() != d * m * m {
        return Err(Error::DimensionMismatch {
            expected: d * m * m,
            got: posterior.dim(),
        });
    }
    RiskBank::draw(teacher, input_variance, n_test, n_weights, seed)?.estimate(posterior)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_params(m: usize, d: usize, scale: f64, seed: u64) -> ResNetParams<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let flat: Vec<f64> = (0..d * m * m)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        ResNetParams::from_flat(m, d, &flat).unwrap()
    }

    #[test]
    fn zero_network_is_identity() {
        let p = ResNetParams::<f64>::zeros(3, 4);
        let x = [0.5, -1.0, 2.0];
        assert_eq!(forward(&p, &x).output(), &x);
        assert_eq!(predict(&p, &x), x.to_vec());
    }

    #[test]
    fn scalar_forward() {
        let p = ResNetParams::from_flat(1, 1, &[0.5]).unwrap();
        let out = forward(&p, &[2.0]);
        assert_eq!(out.output()[0], 1f64.tanh() + 2.0);
        assert_eq!(out.hidden.len(), 2);
    }

    #[test]
    fn flatten_round_trip_and_order() {
        let p = random_params(3, 2, 1.0, 1);
        let flat = p.flatten();
        assert_eq!(flat[9 + 3 + 2], p.layers()[1][(1, 2)]);
        assert_eq!(ResNetParams::from_flat(3, 2, &flat).unwrap(), p);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<ResNetParams<f64>>(&json).unwrap(), p);
    }

    #[test]
    fn spectral_projection() {
        let mut p = random_params(4, 3, 1.0, 2);
        assert!(!p.satisfies_spectral_bound());
        p.project_spectral(1.0 / 3.0);
        for k in 0..3 {
            assert!((p.spectral_norm(k) - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(p.satisfies_spectral_bound());
        let diag = ResNetParams::from_flat(2, 1, &[3.0f64, 0.0, 0.0, -4.0]).unwrap();
        assert!((diag.spectral_norm(0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn increments_respect_bound() {
        let mut p = random_params(5, 4, 1.0, 3);
        assert!(matches!(
            residual_increment_check(&p, &[1.0; 5]),
            Err(Error::SpectralNormViolated { .. })
        ));
        p.project_spectral(0.25);
        let x = [1.0, -2.0, 0.5, 0.0, 3.0];
        let bound = increment_bound(&x, 4);
        for inc in residual_increment_check(&p, &x).unwrap() {
            assert!(inc <= bound);
        }
        let zero = ResNetParams::<f64>::zeros(5, 4);
        assert!(residual_increment_check(&zero, &x).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empirical_risk_examples() {
        let p = ResNetParams::<f64>::zeros(2, 3);
        let data = Dataset::new(
            vec![vec![1.0, 2.0], vec![-1.0, 0.5]],
            vec![vec![1.0, 2.0], vec![-1.0, 0.5]],
        )
        .unwrap();
        assert_eq!(empirical_risk(&p, &data), 0.0);
        let scalar = ResNetParams::from_flat(1, 1, &[0.5]).unwrap();
        let one = Dataset::new(vec![vec![2.0]], vec![vec![1.0]]).unwrap();
        let h = 1f64.tanh() + 2.0;
        assert!((empirical_risk(&scalar, &one) - (h - 1.0).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn jacobian_examples() {
        let p = ResNetParams::<f64>::zeros(1, 1);
        assert_eq!(weight_jacobian(&p, &[3.0])[(0, 0)], 3.0);
        let q = random_params(3, 2, 0.4, 4);
        assert!(weight_jacobian(&q, &[0.0; 3]).max_abs() == 0.0);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = random_params(3, 3, 0.3, 5);
        let x = [0.7, -1.1, 0.4];
        let jac = weight_jacobian(&p, &x);
        let flat = p.flatten();
        let h = 1e-5;
        for j in 0..flat.len() {
            let mut plus = flat.clone();
            let mut minus = flat.clone();
            plus[j] += h;
            minus[j] -= h;
            let fp = predict(&ResNetParams::from_flat(3, 3, &plus).unwrap(), &x);
            let fm = predict(&ResNetParams::from_flat(3, 3, &minus).unwrap(), &x);
            for row in 0..3 {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                let an = jac[(row, j)];
                assert!(
                    (fd - an).abs() <= 1e-6 * an.abs().max(1.0),
                    "entry ({row},{j}): {fd} vs {an}"
                );
            }
        }
    }

    #[test]
    fn gauss_newton_scalar_case() {
        let p = ResNetParams::from_flat(1, 1, &[0.0]).unwrap();
        let data = Dataset::new(vec![vec![2.0]], vec![vec![1.5]]).unwrap();
        let e = gauss_newton_energy(&p, &data).unwrap();
        // h = x, dh/dW = x = 2, r = 0.5
        assert_eq!(e.curvature()[(0, 0)], 8.0);
        assert_eq!(e.linear(), &[2.0]);
        assert_eq!(e.constant(), 0.25);
        let exact = Dataset::new(vec![vec![2.0]], vec![vec![2.0]]).unwrap();
        assert_eq!(gauss_newton_energy(&p, &exact).unwrap().linear(), &[0.0]);
    }

    #[test]
    fn gauss_newton_matches_loss_gradient_away_from_origin() {
        let p = random_params(2, 2, 0.2, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let inputs = sample_inputs::<f64, _>(2, 5, 1.0, &mut rng);
        let targets = sample_inputs::<f64, _>(2, 5, 1.0, &mut rng);
        let data = Dataset::new(inputs, targets).unwrap();
        let e = gauss_newton_energy(&p, &data).unwrap();
        let w0 = p.flatten();
        assert!((e.value(&w0) - empirical_risk(&p, &data)).abs() < 1e-12);
        let grad = e.gradient(&w0);
        let h = 1e-6;
        for j in 0..w0.len() {
            let mut plus = w0.clone();
            let mut minus = w0.clone();
            plus[j] += h;
            minus[j] -= h;
            let fd = (empirical_risk(&ResNetParams::from_flat(2, 2, &plus).unwrap(), &data)
                - empirical_risk(&ResNetParams::from_flat(2, 2, &minus).unwrap(), &data))
                / (2.0 * h);
            assert!((fd - grad[j]).abs() < 1e-6, "coordinate {j}: {fd} vs {}", grad[j]);
        }
    }

    #[test]
    fn teacher_layout_and_realizability() {
        let cfg = TeacherStudentConfig {
            width: 3,
            depth: 4,
            teacher_depth: 2,
            n_train: 7,
            ..TeacherStudentConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ts = teacher_student_data::<f64, _>(&cfg, &mut rng).unwrap();
        assert!(ts.teacher.layers()[0].max_abs() == 0.0 && ts.teacher.layers()[1].max_abs() == 0.0);
        assert!(ts.teacher.layers()[3].max_abs() > 0.0);
        assert_eq!(empirical_risk(&ts.teacher, &ts.train), 0.0);
        let standalone = ResNetParams::new(ts.teacher.layers()[2..].to_vec()).unwrap();
        for x in &ts.train.inputs {
            assert_eq!(predict(&standalone, x), predict(&ts.teacher, x));
        }
    }

    #[test]
    fn population_risk_is_deterministic_and_vanishes_at_teacher() {
        let cfg = TeacherStudentConfig {
            width: 3,
            depth: 2,
            teacher_depth: 1,
            n_train: 5,
            ..TeacherStudentConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let ts = teacher_student_data::<f64, _>(&cfg, &mut rng).unwrap();
        let point = GaussianDist::isotropic(ts.teacher.flatten(), 1e-12).unwrap();
        let r = population_risk_mc(&point, &ts.teacher, 1.0, 50, 10, 3).unwrap();
        assert!(r.mean < 1e-9);
        let prior = cfg.prior::<f64>().unwrap();
        let a = population_risk_mc(&prior, &ts.teacher, 1.0, 50, 10, 3).unwrap();
        let b = population_risk_mc(&prior, &ts.teacher, 1.0, 50, 10, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.mean > 0.0 && a.stderr > 0.0);
    }

    #[test]
    fn posterior_reductions() {
        let cfg = TeacherStudentConfig {
            width: 2,
            depth: 3,
            teacher_depth: 1,
            n_train: 6,
            ..TeacherStudentConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let ts = teacher_student_data::<f64, _>(&cfg, &mut rng).unwrap();
        let e = gauss_newton_energy(&ResNetParams::zeros(2, 3), &ts.train).unwrap();
        let prior = cfg.prior::<f64>().unwrap();
        let partition = cfg.partition();
        let sigma1 = 1e-4;
        let gibbs = gibbs_gaussian(&e, &prior, 1.0 / sigma1).unwrap();
        let post = multiscale_posterior(&e, &prior, 0.0, sigma1, &partition).unwrap();
        assert_eq!(post, gibbs);
    }
}
