use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, shape_mismatch, Result};
use crate::tensor::{Shape, WeightMask};

/// Whether `f̃` is coercive for a mask and penalty weights.
///
/// The objective is coercive exactly when `{W = 0}` contains no
/// `{α = 0}`-cylinder, i.e. no choice of coordinates on the unpenalized modes
/// whose whole slice is missing. With every mode penalized the only cylinder
/// is the full grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoercivityVerdict {
    pub coercive: bool,
    /// `(mode, index)` pairs fixing a fully missing cylinder, one per
    /// unpenalized mode; empty when the whole grid is missing and every mode
    /// is penalized. Present iff not coercive.
    pub witness: Option<Vec<(usize, usize)>>,
}

pub fn coercivity_check(w: &WeightMask, alpha: &[f64]) -> Result<CoercivityVerdict> {
    let dims = w.shape().dims();
    if alpha.len() != dims.len() {
        return Err(shape_mismatch(format!("{} weights for an order-{} mask", alpha.len(), dims.len())));
    }
    if alpha.iter().any(|a| !(*a >= 0.0)) {
        return Err(invalid("penalty weights must be non-negative"));
    }
    let fixed: Vec<usize> = (0..dims.len()).filter(|&n| alpha[n] == 0.0).collect();
    if fixed.is_empty() {
        let coercive = w.observed_count() > 0;
        return Ok(CoercivityVerdict { coercive, witness: (!coercive).then(Vec::new) });
    }
    // max of W over the penalized modes, indexed by the unpenalized coordinates
    let reduced_dims: Vec<usize> = fixed.iter().map(|&n| dims[n]).collect();
    let reduced_shape = Shape::new(reduced_dims)?;
    let mut reduced = vec![0.0f64; reduced_shape.num_entries()];
    let mut key = vec![0usize; fixed.len()];
    let values = w.values();
    w.shape().for_each_index(|flat, idx| {
        for (k, &n) in fixed.iter().enumerate() {
            key[k] = idx[n];
        }
        let slot = &mut reduced[reduced_shape.flat_index(&key)];
        *slot = slot.max(values[flat]);
    });
    let mut witness = None;
    reduced_shape.for_each_index(|flat, idx| {
        if witness.is_none() && reduced[flat] <= 0.0 {
            witness = Some(fixed.iter().zip(idx).map(|(&n, &j)| (n, j)).collect());
        }
    });
    Ok(CoercivityVerdict { coercive: witness.is_none(), witness })
}
