//! HALS on the normalized problem.
//!
//! For component `r` and mode `n`, write `v = λ_r ã` for the mode-`n` column
//! scaled by the component weight, and `t` for the outer product of the other
//! columns of `r`. The block objective is then the quadratic
//!
//! ```text
//! q(v) = vᵀ (diag(δ) + α_n M_n + c I) v − 2 βᵀ v
//! β_i = Σ_j W²_ij X^(r)_ij t_j,   δ_i = Σ_j W²_ij t_j²
//! ```
//!
//! where `j` runs over the entries with `i_n = i`. It equals `f̃` up to a
//! constant, with `λ_r = ‖v‖` and `ã = v/‖v‖` after renormalization, when the
//! coupling `c = Σ_{m≠n} α_m μ_m²(ã^(m))` is included; without `c` it is the
//! block objective at fixed `λ_r`. It is minimized over `v ≥ 0` by projected
//! Newton-scaled descent with Armijo backtracking along the projection arc.

use alloc::vec;
use alloc::vec::Vec;

use super::{check_inputs, starting_point, Clock, FitReport, NoClock, Progress, SolverConfig};
use crate::error::{shape_mismatch, Error, Result};
use crate::linalg::{bandwidth, cholesky_banded, cholesky_solve_banded};
use crate::model::NormalizedFactorModel;
use crate::penalties::{NormSpec, Penalty};
use crate::tensor::{accumulate_rank_one, dot, norm2, DenseTensor, Matrix, Shape, WeightMask};

const ARMIJO_SHRINK: f64 = 0.5;
const ARMIJO_SUFFICIENT: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Result of one column update.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnUpdate {
    /// Unit-norm non-negative column.
    pub column: Vec<f64>,
    /// Updated component weight `λ_r`.
    pub lambda: f64,
}

/// The reduced quadratic of one column update.
#[derive(Debug, Clone)]
pub struct SubproblemInput {
    /// `β`
    pub linear: Vec<f64>,
    /// `diag(δ) + α_n M_n + c I`
    pub hessian: Matrix,
}

impl SubproblemInput {
    pub fn value(&self, v: &[f64]) -> f64 {
        self.hessian.quadratic_form(v) - 2.0 * dot(&self.linear, v)
    }

    fn gradient(&self, v: &[f64]) -> Vec<f64> {
        self.hessian.mul_vec(v).iter().zip(&self.linear).map(|(hv, b)| 2.0 * (hv - b)).collect()
    }
}

/// `β` and `δ` for mode `mode`, contracting the residual target against the
/// other columns of the component.
fn contract(x_r: &[f64], shape: &Shape, w_sq: &[f64], columns: &[&[f64]], mode: usize) -> (Vec<f64>, Vec<f64>) {
    let len = shape.dims()[mode];
    let mut beta = vec![0.0; len];
    let mut delta = vec![0.0; len];
    shape.for_each_index(|flat, idx| {
        let w2 = w_sq[flat];
        if w2 == 0.0 {
            return;
        }
        let mut t = 1.0;
        for (m, col) in columns.iter().enumerate() {
            if m != mode {
                t *= col[idx[m]];
            }
        }
        let i = idx[mode];
        beta[i] += w2 * x_r[flat] * t;
        delta[i] += w2 * t * t;
    });
    (beta, delta)
}

fn build_subproblem(
    x_r: &[f64],
    shape: &Shape,
    w_sq: &[f64],
    columns: &[&[f64]],
    mode: usize,
    penalty: &Penalty,
    coupling: bool,
) -> SubproblemInput {
    let (beta, delta) = contract(x_r, shape, w_sq, columns, mode);
    let len = beta.len();
    let ridge = if coupling {
        (0..columns.len()).filter(|&m| m != mode).map(|m| penalty.weighted_seminorm_pow(m, columns[m])).sum()
    } else {
        0.0
    };
    let mut hessian = match penalty.quadratic(mode) {
        Some(m) => {
            let alpha = penalty.alpha(mode);
            Matrix::from_fn(len, len, |i, j| alpha * m[(i, j)])
        }
        None => Matrix::zeros(len, len),
    };
    for i in 0..len {
        hessian[(i, i)] += delta[i] + ridge;
    }
    SubproblemInput { linear: beta, hessian }
}

/// Minimizes `q` over the non-negative orthant from `start`, never
/// returning a point with a larger value.
fn minimize_block(sub: &SubproblemInput, start: &[f64], iters: usize) -> Vec<f64> {
    let len = start.len();
    let h = &sub.hessian;
    let mut v = start.to_vec();
    let mut value = sub.value(&v);
    for _ in 0..iters {
        let g = sub.gradient(&v);
        let free: Vec<usize> = (0..len).filter(|&i| h[(i, i)] > 0.0 && (v[i] > 0.0 || g[i] < 0.0)).collect();
        if free.is_empty() || free.iter().all(|&i| g[i] == 0.0) {
            break;
        }
        let newton = newton_direction(h, &g, &free, len);
        let scaled: Vec<f64> = (0..len)
            .map(|i| if free.contains(&i) { -g[i] / (2.0 * h[(i, i)]) } else { 0.0 })
            .collect();
        let mut accepted = None;
        for dir in newton.iter().chain(core::iter::once(&scaled)) {
            if let Some(step) = armijo(sub, &v, value, &g, dir) {
                accepted = Some(step);
                break;
            }
        }
        match accepted {
            Some((next, next_value)) => {
                let stalled = next == v;
                v = next;
                value = next_value;
                if stalled {
                    break;
                }
            }
            None => break,
        }
    }
    v
}

fn newton_direction(h: &Matrix, g: &[f64], free: &[usize], len: usize) -> Option<Vec<f64>> {
    let k = free.len();
    let sub = Matrix::from_fn(k, k, |a, b| h[(free[a], free[b])]);
    let bw = bandwidth(&sub);
    let l = cholesky_banded(&sub, bw).ok()?;
    let rhs: Vec<f64> = free.iter().map(|&i| -0.5 * g[i]).collect();
    let step = cholesky_solve_banded(&l, &rhs, bw);
    if step.iter().any(|s| !s.is_finite()) {
        return None;
    }
    let mut dir = vec![0.0; len];
    for (&i, s) in free.iter().zip(step) {
        dir[i] = s;
    }
    Some(dir)
}

/// Backtracking along `t ↦ max(0, v + t·dir)` until sufficient decrease.
fn armijo(sub: &SubproblemInput, v: &[f64], value: f64, g: &[f64], dir: &[f64]) -> Option<(Vec<f64>, f64)> {
    let mut t = 1.0;
    for _ in 0..MAX_BACKTRACKS {
        let trial: Vec<f64> = v.iter().zip(dir).map(|(x, d)| f64::max(x + t * d, 0.0)).collect();
        let slope: f64 = g.iter().zip(&trial).zip(v).map(|((gi, xt), x)| gi * (xt - x)).sum();
        if slope < 0.0 {
            let trial_value = sub.value(&trial);
            if trial_value <= value + ARMIJO_SUFFICIENT * slope {
                return Some((trial, trial_value));
            }
        } else if slope == 0.0 {
            return None;
        }
        t *= ARMIJO_SHRINK;
    }
    None
}

fn renormalize(v: Vec<f64>) -> ColumnUpdate {
    let norm = norm2(&v);
    if norm > 0.0 {
        ColumnUpdate { column: v.iter().map(|x| x / norm).collect(), lambda: norm }
    } else {
        ColumnUpdate { column: NormSpec::L2.default_sphere_element(v.len()), lambda: 0.0 }
    }
}

fn check_smooth(penalty: &Penalty) -> Result<()> {
    penalty.check_smooth_quadratic()?;
    if penalty.config().nu.iter().any(|&nu| nu != NormSpec::L2) {
        return Err(Error::Unsupported("the solvers need L2 factor norms".into()));
    }
    Ok(())
}

/// One HALS column update: descent on the block problem of mode `mode` of a
/// component, warm-started at `columns[mode]` scaled by `lambda`, then
/// renormalization `ã ← â/‖â‖`, `λ ← λ‖â‖`.
///
/// `x_r` is the data minus all other components; `columns` holds the
/// component's current unit columns for every mode.
pub fn hals_subproblem(
    x_r: &DenseTensor,
    w: &WeightMask,
    columns: &[Vec<f64>],
    lambda: f64,
    penalty: &Penalty,
    mode: usize,
    cfg: &SolverConfig,
) -> Result<ColumnUpdate> {
    if x_r.shape() != w.shape() {
        return Err(shape_mismatch("data and weights differ in shape"));
    }
    if columns.len() != x_r.dims().len() || columns.iter().zip(x_r.dims()).any(|(c, &d)| c.len() != d) {
        return Err(shape_mismatch("columns do not match the tensor"));
    }
    if mode >= columns.len() {
        return Err(Error::ModeOutOfRange { mode, order: columns.len() });
    }
    check_smooth(penalty)?;
    let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
    let sub = build_subproblem(
        x_r.values(),
        x_r.shape(),
        &w.squared(),
        &refs,
        mode,
        penalty,
        cfg.column_update_includes_scale_coupling,
    );
    let start: Vec<f64> = columns[mode].iter().map(|a| lambda * a).collect();
    Ok(renormalize(minimize_block(&sub, &start, cfg.inner_iters)))
}

/// Block objective value for a column update, exposed for audits.
pub fn hals_block_objective(
    x_r: &DenseTensor,
    w: &WeightMask,
    columns: &[Vec<f64>],
    lambda: f64,
    penalty: &Penalty,
    mode: usize,
    coupling: bool,
) -> f64 {
    let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
    let sub = build_subproblem(x_r.values(), x_r.shape(), &w.squared(), &refs, mode, penalty, coupling);
    let v: Vec<f64> = columns[mode].iter().map(|a| lambda * a).collect();
    sub.value(&v)
}

fn lambda_update_raw(
    x_r: &[f64],
    shape: &Shape,
    w_sq: &[f64],
    columns: &[&[f64]],
    penalty: &Penalty,
    include_penalty: bool,
) -> f64 {
    let mut t = vec![0.0; shape.num_entries()];
    accumulate_rank_one(&mut t, shape.dims(), columns, 1.0, true);
    let mut num = 0.0;
    let mut den = 0.0;
    for ((tv, xv), w2) in t.iter().zip(x_r).zip(w_sq) {
        num += w2 * xv * tv;
        den += w2 * tv * tv;
    }
    if include_penalty {
        den += (0..columns.len()).map(|n| penalty.weighted_seminorm_pow(n, columns[n])).sum::<f64>();
    }
    if den > 0.0 {
        f64::max(num / den, 0.0)
    } else {
        0.0
    }
}

/// Closed-form `λ_r` update: `[⟨W⊛X^(r), W⊛T⟩ / (‖W⊛T‖² + P)]₊` with
/// `T = ã^(1) ∘ … ∘ ã^(N)` and `P = Σ_n α_n μ_n²(ã^(n))` when
/// `include_penalty` is set, else `P = 0`. A zero denominator gives 0.
pub fn lambda_update(
    x_r: &DenseTensor,
    w: &WeightMask,
    columns: &[Vec<f64>],
    penalty: &Penalty,
    include_penalty: bool,
) -> Result<f64> {
    if x_r.shape() != w.shape() {
        return Err(shape_mismatch("data and weights differ in shape"));
    }
    if columns.len() != x_r.dims().len() || columns.iter().zip(x_r.dims()).any(|(c, &d)| c.len() != d) {
        return Err(shape_mismatch("columns do not match the tensor"));
    }
    let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
    Ok(lambda_update_raw(x_r.values(), x_r.shape(), &w.squared(), &refs, penalty, include_penalty))
}

/// HALS with a zero clock.
pub fn hals_fit(x: &DenseTensor, w: &WeightMask, cfg: &SolverConfig) -> Result<(NormalizedFactorModel, FitReport)> {
    hals_fit_with_clock(x, w, cfg, &NoClock)
}

pub fn hals_fit_with_clock<C: Clock>(
    x: &DenseTensor,
    w: &WeightMask,
    cfg: &SolverConfig,
    clock: &C,
) -> Result<(NormalizedFactorModel, FitReport)> {
    check_inputs(x, w, cfg)?;
    let penalty = cfg.penalty.prepare(x.dims())?;
    check_smooth(&penalty)?;
    let (mut model, seed) = starting_point(x, w, cfg)?;
    let shape = x.shape().clone();
    let dims = shape.dims().to_vec();
    let order = dims.len();
    let w_sq = w.squared();

    let recon = crate::model::CpModel::reconstruct(&model);
    let mut residual: Vec<f64> = x.values().iter().zip(recon.values()).map(|(a, b)| a - b).collect();
    let objective = |residual: &[f64], model: &NormalizedFactorModel| -> Result<f64> {
        let loss: f64 = residual.iter().zip(&w_sq).map(|(e, w2)| w2 * e * e).sum();
        Ok(loss + crate::model::penalty_normalized(&penalty, model)?)
    };
    let mut progress = Progress::new(clock, objective(&residual, &model)?, cfg.rel_tol);
    let mut converged = false;
    let mut component = vec![0.0; shape.num_entries()];

    for _ in 0..cfg.max_iter {
        for r in 0..cfg.rank {
            let (lambda, factors) = model.parts_mut();
            let mut columns: Vec<Vec<f64>> = factors.iter().map(|f| f.column(r)).collect();
            // X^(r) = E + λ_r T_r
            {
                let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
                accumulate_rank_one(&mut component, &dims, &refs, lambda[r], true);
            }
            for (e, c) in residual.iter_mut().zip(&component) {
                *e += c;
            }
            let x_r = &residual;
            for n in 0..order {
                let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
                let sub = build_subproblem(
                    x_r,
                    &shape,
                    &w_sq,
                    &refs,
                    n,
                    &penalty,
                    cfg.column_update_includes_scale_coupling,
                );
                let start: Vec<f64> = columns[n].iter().map(|a| lambda[r] * a).collect();
                let update = renormalize(minimize_block(&sub, &start, cfg.inner_iters));
                columns[n] = update.column;
                lambda[r] = update.lambda;
            }
            let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
            lambda[r] = lambda_update_raw(x_r, &shape, &w_sq, &refs, &penalty, cfg.lambda_update_includes_penalty);
            for (n, col) in columns.iter().enumerate() {
                factors[n].set_column(r, col);
            }
            // E = X^(r) − λ_r T_r
            accumulate_rank_one(&mut component, &dims, &refs, lambda[r], true);
            for (e, c) in residual.iter_mut().zip(&component) {
                *e -= c;
            }
        }
        if progress.record(objective(&residual, &model)?) {
            converged = true;
            break;
        }
    }
    Ok((model, progress.finish(converged, seed)))
}
