//! Synthetic smooth non-negative instances.
//!
//! Modes 1 and 2 are non-negative combinations of 7 cubic B-splines, mode 3
//! is unstructured, and Gaussian noise is scaled to a target
//! noise-to-signal percentage.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use smoothntf_core::model::CpModel;
use smoothntf_core::{DenseTensor, FactorModel, Matrix, NormalizedFactorModel, Shape, WeightMask};

use crate::error::{IoError, IoResult};
use crate::mask::uniform_mask;

pub const BASIS_SIZE: usize = 7;
pub const BASIS_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct ToySpec {
    pub size: usize,
    pub rank: usize,
    /// `ν` in percent; `0` gives noiseless data.
    pub noise_percent: f64,
    pub missing_fraction: f64,
    pub seed: u64,
}

impl ToySpec {
    pub fn new(size: usize, rank: usize, seed: u64) -> Self {
        ToySpec { size, rank, noise_percent: 10.0, missing_fraction: 0.5, seed }
    }
}

#[derive(Debug, Clone)]
pub struct ToyData {
    pub clean: DenseTensor,
    pub noisy: DenseTensor,
    pub mask: WeightMask,
    pub truth: NormalizedFactorModel,
    /// Scale applied to the standard normal noise.
    pub sigma: f64,
}

/// Clamped knot vector with equispaced interior knots on `[0, 1]`.
fn knot_vector() -> Vec<f64> {
    let interior = BASIS_SIZE - BASIS_ORDER;
    let mut t = vec![0.0; BASIS_ORDER];
    t.extend((1..=interior).map(|k| k as f64 / (interior + 1) as f64));
    t.extend(std::iter::repeat_n(1.0, BASIS_ORDER));
    t
}

/// Values of the 7 cubic B-splines at `u ∈ [0, 1]` by the Cox–de Boor recursion.
pub fn bspline_basis(u: f64) -> [f64; BASIS_SIZE] {
    let t = knot_vector();
    let last_span = t.len() - BASIS_ORDER - 1;
    // order-1 indicators; the right end belongs to the last non-empty span
    let mut b: Vec<f64> = (0..t.len() - 1)
        .map(|j| {
            let inside = t[j] <= u && u < t[j + 1];
            let right_end = u == 1.0 && j == last_span;
            if inside || right_end { 1.0 } else { 0.0 }
        })
        .collect();
    for k in 2..=BASIS_ORDER {
        b = (0..t.len() - k)
            .map(|j| {
                let left = if t[j + k - 1] > t[j] { (u - t[j]) / (t[j + k - 1] - t[j]) * b[j] } else { 0.0 };
                let right =
                    if t[j + k] > t[j + 1] { (t[j + k] - u) / (t[j + k] - t[j + 1]) * b[j + 1] } else { 0.0 };
                left + right
            })
            .collect();
    }
    b.try_into().expect("seven basis functions")
}

/// `σ = (100/ν − 1)^{−1/2} · ‖Y‖ / ‖E‖`.
pub fn noise_scale(noise_percent: f64, clean_norm: f64, noise_norm: f64) -> f64 {
    if noise_percent == 0.0 {
        return 0.0;
    }
    (100.0 / noise_percent - 1.0).powf(-0.5) * clean_norm / noise_norm
}

fn smooth_factor(rng: &mut ChaCha8Rng, size: usize, rank: usize, vanishing: bool) -> Matrix {
    let basis: Vec<[f64; BASIS_SIZE]> = (0..size).map(|i| bspline_basis((i as f64 + 0.5) / size as f64)).collect();
    let run = BASIS_SIZE.div_ceil(3);
    let mut f = Matrix::zeros(size, rank);
    for r in 0..rank {
        let mut coef: [f64; BASIS_SIZE] = std::array::from_fn(|_| rng.random::<f64>());
        if vanishing && rng.random::<f64>() < 0.5 {
            let start = rng.random_range(0..=BASIS_SIZE - run);
            coef[start..start + run].fill(0.0);
        }
        let col: Vec<f64> = basis.iter().map(|b| b.iter().zip(&coef).map(|(x, c)| x * c).sum()).collect();
        f.set_column(r, &col);
    }
    f
}

pub fn toy_generate(spec: &ToySpec) -> IoResult<ToyData> {
    if spec.size < BASIS_SIZE + 1 {
        return Err(IoError::Invalid(format!("toy size must be at least {}, got {}", BASIS_SIZE + 1, spec.size)));
    }
    if spec.rank < 1 {
        return Err(IoError::Invalid("toy rank must be at least 1".into()));
    }
    if !(0.0..100.0).contains(&spec.noise_percent) {
        return Err(IoError::Invalid(format!("noise percent must lie in [0, 100), got {}", spec.noise_percent)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (i, r) = (spec.size, spec.rank);
    let factors = vec![
        smooth_factor(&mut rng, i, r, false),
        smooth_factor(&mut rng, i, r, true),
        Matrix::from_fn(i, r, |_, _| rng.random::<f64>()),
    ];
    let truth = FactorModel::new(factors)?.normalize_l2();
    let clean = truth.reconstruct();
    let shape = Shape::new(vec![i; 3])?;
    let noise = DenseTensor::from_fn(shape.clone(), |_| rng.sample(StandardNormal))?;
    let sigma = noise_scale(spec.noise_percent, clean.frobenius_norm(), noise.frobenius_norm());
    let noisy = DenseTensor::new(
        shape.clone(),
        clean.values().iter().zip(noise.values()).map(|(y, e)| y + sigma * e).collect(),
    )?;
    let mask = uniform_mask(&shape, spec.missing_fraction, &mut rng)?;
    Ok(ToyData { clean, noisy, mask, truth, sigma })
}
