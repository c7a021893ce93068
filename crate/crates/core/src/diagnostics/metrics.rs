use alloc::vec::Vec;

use crate::assignment::{brute_force_max_score, max_weight_assignment};
use crate::error::{shape_mismatch, Error, Result};
use crate::model::{CpModel, NormalizedFactorModel};
use crate::tensor::{dot, DenseTensor, Matrix};

/// Largest rank scored by exhaustive search over permutations.
const BRUTE_FORCE_MAX_RANK: usize = 8;

/// `‖Y − Ŷ‖²_F / ‖Y‖²_F`.
pub fn nmse(truth: &DenseTensor, estimate: &DenseTensor) -> Result<f64> {
    let diff = truth.sub(estimate)?;
    let denom = truth.frobenius_norm();
    if denom == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let num = diff.frobenius_norm();
    Ok((num / denom) * (num / denom))
}

/// `s[r, s] = Π_n ⟨ã_r^(n), â_s^(n)⟩`.
pub fn sim_score_matrix(truth: &NormalizedFactorModel, estimate: &NormalizedFactorModel) -> Result<Matrix> {
    if truth.dims() != estimate.dims() || truth.rank() != estimate.rank() {
        return Err(shape_mismatch("models differ in dimensions or rank"));
    }
    let rank = truth.rank();
    let truth_cols: Vec<Vec<Vec<f64>>> =
        truth.factors().iter().map(|f| (0..rank).map(|r| f.column(r)).collect()).collect();
    let est_cols: Vec<Vec<Vec<f64>>> =
        estimate.factors().iter().map(|f| (0..rank).map(|r| f.column(r)).collect()).collect();
    Ok(Matrix::from_fn(rank, rank, |r, s| {
        truth_cols.iter().zip(&est_cols).map(|(t, e)| dot(&t[r], &e[s])).product()
    }))
}

/// Similarity of factor sets: `max_σ (1/R) Σ_r Π_n ⟨ã_r^(n), â_σ(r)^(n)⟩`.
///
/// Exhaustive over permutations up to rank 8, optimal assignment beyond.
pub fn sim_score(truth: &NormalizedFactorModel, estimate: &NormalizedFactorModel) -> Result<f64> {
    let score = sim_score_matrix(truth, estimate)?;
    let rank = score.rows();
    let total = if rank <= BRUTE_FORCE_MAX_RANK {
        brute_force_max_score(&score)
    } else {
        let sigma = max_weight_assignment(&score);
        sigma.iter().enumerate().map(|(r, &s)| score[(r, s)]).sum()
    };
    Ok(total / rank as f64)
}
