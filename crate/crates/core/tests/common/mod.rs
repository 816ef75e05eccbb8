#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use msent::tabular::{decimation_chain, ScaleMap};
use msent::{BlockPartition, EnergyTable, GaussianDist, Matrix, ProductSpace, TabularDist, TemperatureSchedule};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One to three axes of size two or three.
pub fn random_space(rng: &mut ChaCha8Rng) -> ProductSpace {
    let axes = rng.random_range(1..=3);
    ProductSpace::new((0..axes).map(|_| rng.random_range(2..=3)).collect()).unwrap()
}

/// Full-support distribution with weights in `[floor, 1)`.
pub fn random_dist(rng: &mut ChaCha8Rng, space: &ProductSpace, floor: f64) -> TabularDist<f64> {
    let w = (0..space.size()).map(|_| rng.random_range(floor..1.0)).collect();
    TabularDist::from_weights(space.clone(), w).unwrap()
}

pub fn random_energy(rng: &mut ChaCha8Rng, space: &ProductSpace) -> EnergyTable<f64> {
    EnergyTable::new(
        space.clone(),
        (0..space.size()).map(|_| rng.random_range(-2.0..2.0)).collect(),
    )
    .unwrap()
}

/// Surjective map onto a flat space with fewer states than `source`.
pub fn random_scale_map(rng: &mut ChaCha8Rng, source: &ProductSpace) -> ScaleMap {
    let n = source.size();
    let k = rng.random_range(1..n.max(2));
    let mut map: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    for (j, &i) in order.iter().take(k).enumerate() {
        map[i] = j;
    }
    ScaleMap::new(source.clone(), ProductSpace::flat(k).unwrap(), map).unwrap()
}

/// `depth - 1` successive random maps.
pub fn random_chain(rng: &mut ChaCha8Rng, space: &ProductSpace, depth: usize) -> Vec<ScaleMap> {
    let mut chain = Vec::new();
    let mut current = space.clone();
    for _ in 1..depth {
        if current.size() == 1 {
            break;
        }
        let t = random_scale_map(rng, &current);
        current = t.target().clone();
        chain.push(t);
    }
    chain
}

/// Either the decimation chain or a random chain of the same length.
pub fn random_instance_chain(rng: &mut ChaCha8Rng, space: &ProductSpace, decimation: bool) -> Vec<ScaleMap> {
    if decimation {
        decimation_chain(space)
    } else {
        let depth = rng.random_range(2..=3);
        random_chain(rng, space, depth)
    }
}

/// `lambda` in `[0.3, 1.5]`, `sigma_i` in `[0.1, 1]`.
pub fn random_schedule(rng: &mut ChaCha8Rng, depth: usize) -> TemperatureSchedule<f64> {
    TemperatureSchedule::new(
        rng.random_range(0.3..1.5),
        (0..depth).map(|_| rng.random_range(0.1..1.0)).collect(),
    )
    .unwrap()
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `A A^T + ridge I` with standard normal `A`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, ridge: f64) -> Matrix<f64> {
    let a = Matrix::from_row_major(n, n, (0..n * n).map(|_| normal(rng)).collect()).unwrap();
    let mut m = a.matmul(&a.transpose()).add(&Matrix::identity(n).scaled(ridge));
    m.symmetrize();
    m
}

pub fn random_gaussian(rng: &mut ChaCha8Rng, n: usize) -> GaussianDist<f64> {
    let mean = (0..n).map(|_| normal(rng)).collect();
    GaussianDist::new(mean, random_spd(rng, n, 0.2)).unwrap()
}

/// Random block sizes summing to `n`, at least two blocks when `n > 1`.
pub fn random_partition(rng: &mut ChaCha8Rng, n: usize) -> BlockPartition {
    let mut sizes = Vec::new();
    let mut left = n;
    while left > 0 {
        let cap = if sizes.is_empty() && n > 1 { left - 1 } else { left };
        let s = rng.random_range(1..=cap.max(1));
        sizes.push(s);
        left -= s;
    }
    BlockPartition::new(sizes).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `||A - B||_F / ||B||_F`.
pub fn rel_frobenius(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    a.sub(b).frobenius_norm() / b.frobenius_norm()
}
