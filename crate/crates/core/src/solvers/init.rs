use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::model::NormalizedFactorModel;
use crate::penalties::NormSpec;
use crate::tensor::{dot, mttkrp, DenseTensor, Matrix, WeightMask};

/// SVD-based starting point.
///
/// Missing entries are imputed with the mean of the observed ones. Mode `n`
/// takes the absolute values of the leading `R` left singular vectors of the
/// mode-`n` unfolding (uniform unit columns pad the ranks beyond `I_n`). All
/// scales share the value that best fits the imputed tensor.
pub fn init_svd(x: &DenseTensor, w: &WeightMask, rank: usize) -> Result<NormalizedFactorModel> {
    if x.shape() != w.shape() {
        return Err(Error::ShapeMismatch("data and weights differ in shape".into()));
    }
    let observed = w.observed_count();
    if observed == 0 {
        return Err(Error::AllMissing);
    }
    let mean = x
        .values()
        .iter()
        .enumerate()
        .filter(|(i, _)| w.is_observed(*i))
        .map(|(_, v)| v)
        .sum::<f64>()
        / observed as f64;
    let imputed: Vec<f64> =
        x.values().iter().enumerate().map(|(i, &v)| if w.is_observed(i) { v } else { mean }).collect();
    let imputed = DenseTensor::new(x.shape().clone(), imputed)?;

    let mut factors = Vec::with_capacity(x.dims().len());
    for (n, &len) in x.dims().iter().enumerate() {
        let unfolded = imputed.unfold(n)?;
        // left singular vectors of X_(n) = eigenvectors of X_(n) X_(n)ᵀ
        let gram = Matrix::from_fn(len, len, |i, j| dot(unfolded.row(i), unfolded.row(j)));
        let eig = symmetric_eigen(&gram)?;
        let fallback = NormSpec::L2.default_sphere_element(len);
        let mut f = Matrix::zeros(len, rank);
        for r in 0..rank {
            if r < len {
                let col: Vec<f64> = eig.vectors.column(r).iter().map(|v| crate::math::abs(*v)).collect();
                let norm = crate::tensor::norm2(&col);
                let col: Vec<f64> = col.iter().map(|v| v / norm).collect();
                f.set_column(r, &col);
            } else {
                f.set_column(r, &fallback);
            }
        }
        factors.push(f);
    }
    let lambda = common_scale(&imputed, &factors);
    NormalizedFactorModel::new(lambda, factors)
}

/// Uniform(0, 1) factor entries, normalized to unit columns.
pub fn init_random(dims: &[usize], rank: usize, seed: u64) -> NormalizedFactorModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors: Vec<Matrix> =
        dims.iter().map(|&d| Matrix::from_fn(d, rank, |_, _| rng.random::<f64>())).collect();
    crate::model::FactorModel::new(factors).expect("valid random factors").normalize_l2()
}

/// Common scale `λ_r = c` with `c = argmin_{c ≥ 0} ‖X − c Σ_r ã_r^(1) ∘ … ∘ ã_r^(N)‖²`.
///
/// Equal scales keep every component away from zero, where the unnormalized
/// gradient with respect to that component vanishes identically.
pub(crate) fn common_scale(x: &DenseTensor, factors: &[Matrix]) -> Vec<f64> {
    let rank = factors[0].cols();
    let columns: Vec<Vec<Vec<f64>>> = factors.iter().map(|f| (0..rank).map(|r| f.column(r)).collect()).collect();
    let gram: f64 = (0..rank)
        .flat_map(|r| (0..rank).map(move |s| (r, s)))
        .map(|(r, s)| columns.iter().map(|c| dot(&c[r], &c[s])).product::<f64>())
        .sum();
    let proj = mttkrp(x, factors, 0).expect("factors match the tensor");
    let inner: f64 = (0..rank).map(|r| dot(&proj.column(r), &columns[0][r])).sum();
    let c = if gram > 0.0 { f64::max(inner / gram, 0.0) } else { 0.0 };
    vec![c; rank]
}
