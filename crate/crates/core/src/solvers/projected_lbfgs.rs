//! Projected limited-memory BFGS on the non-negative orthant.
//!
//! Each iteration holds fixed the variables within `ε` of the bound whose
//! partial derivative pushes them into it, applies the two-loop recursion to
//! the gradient on the remaining ones and backtracks along the projected path
//! `t ↦ max(0, x + t·d)` until the Armijo condition
//! `f(x(t)) ≤ f(x) + c·∇f(x)ᵀ(x(t) − x)` holds. When the quasi-Newton
//! direction fails, the projected steepest descent direction is tried and the
//! memory is cleared. Every accepted step strictly decreases `f`.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::{check_inputs, starting_point, Clock, FitReport, NoClock, Progress, SolverConfig};
use crate::error::{Error, Result};
use crate::model::{FactorModel, SmoothObjective};
use crate::penalties::NormSpec;
use crate::tensor::{dot, DenseTensor, Matrix, WeightMask};

const ARMIJO_SUFFICIENT: f64 = 1e-4;
const ARMIJO_SHRINK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 50;
const MAX_EXPANSIONS: usize = 30;
const ACTIVE_SET_WIDTH: f64 = 1e-3;

struct Problem<'a> {
    objective: SmoothObjective<'a>,
    dims: Vec<usize>,
    rank: usize,
    evaluations: usize,
}

impl Problem<'_> {
    fn model(&self, flat: &[f64]) -> Result<FactorModel> {
        FactorModel::from_flat(&self.dims, self.rank, flat)
    }

    fn value(&mut self, flat: &[f64]) -> Result<f64> {
        self.evaluations += 1;
        self.objective.value(&self.model(flat)?)
    }

    fn value_and_gradient(&mut self, flat: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.evaluations += 1;
        let (f, grads) = self.objective.value_and_gradient(&self.model(flat)?)?;
        Ok((f, grads.into_iter().flat_map(Matrix::into_vec).collect()))
    }
}

/// Bertsekas' ε-active set: variables within `eps` of the bound and pushed
/// against it are held fixed.
fn is_free(x: f64, g: f64, eps: f64) -> bool {
    !(x <= eps && g > 0.0)
}

/// `‖x − P(x − g)‖_∞`.
fn projected_gradient_norm(x: &[f64], g: &[f64]) -> f64 {
    x.iter().zip(g).map(|(&xi, &gi)| crate::math::abs(xi - f64::max(xi - gi, 0.0))).fold(0.0, f64::max)
}

/// `−H·g` on the free set from the stored correction pairs.
fn two_loop(g: &[f64], free: &[bool], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mask = |v: &[f64]| -> Vec<f64> { v.iter().zip(free).map(|(x, &f)| if f { *x } else { 0.0 }).collect() };
    let mut q = mask(g);
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let s = mask(s);
        let y = mask(y);
        let a = rho * dot(&s, &q);
        q.iter_mut().zip(&y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push((a, s, y));
    }
    if let Some((s, y, _)) = memory.back() {
        let (s, y) = (mask(s), mask(y));
        let yy = dot(&y, &y);
        let sy = dot(&s, &y);
        if yy > 0.0 && sy > 0.0 {
            q.iter_mut().for_each(|qi| *qi *= sy / yy);
        }
    }
    for (a, s, y) in alphas.into_iter().rev() {
        let sy = dot(&s, &y);
        let b = if sy > 0.0 { dot(&y, &q) / sy } else { 0.0 };
        q.iter_mut().zip(&s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter().zip(free).map(|(x, &f)| if f { -x } else { 0.0 }).collect()
}

fn project_step(x: &[f64], dir: &[f64], t: f64) -> Vec<f64> {
    x.iter().zip(dir).map(|(xi, di)| f64::max(xi + t * di, 0.0)).collect()
}

fn slope(g: &[f64], trial: &[f64], x: &[f64]) -> f64 {
    g.iter().zip(trial).zip(x).map(|((gi, ti), xi)| gi * (ti - xi)).sum()
}

/// Armijo search along the projected path; `None` when no sufficient decrease.
///
/// Backtracks from `initial_step`; when the first trial is accepted the step
/// is doubled while the value keeps dropping, which lets the method move
/// quickly across flat, negatively curved regions.
fn projected_search(
    problem: &mut Problem<'_>,
    x: &[f64],
    f: f64,
    g: &[f64],
    dir: &[f64],
    initial_step: f64,
) -> Result<Option<(Vec<f64>, f64)>> {
    let mut t = initial_step;
    for attempt in 0..MAX_BACKTRACKS {
        let trial = project_step(x, dir, t);
        let s = slope(g, &trial, x);
        if s == 0.0 && trial == x {
            return Ok(None);
        }
        if s < 0.0 {
            let value = problem.value(&trial)?;
            if value <= f + ARMIJO_SUFFICIENT * s && value < f {
                let mut best = (trial, value);
                if attempt == 0 {
                    for _ in 0..MAX_EXPANSIONS {
                        t *= 2.0;
                        let wider = project_step(x, dir, t);
                        let s = slope(g, &wider, x);
                        let v = problem.value(&wider)?;
                        if !(v <= f + ARMIJO_SUFFICIENT * s && v < best.1) {
                            break;
                        }
                        best = (wider, v);
                    }
                }
                return Ok(Some(best));
            }
        }
        t *= ARMIJO_SHRINK;
    }
    Ok(None)
}

/// Bound-constrained descent with a zero clock.
pub fn grad_fit(x: &DenseTensor, w: &WeightMask, cfg: &SolverConfig) -> Result<(FactorModel, FitReport)> {
    grad_fit_with_clock(x, w, cfg, &NoClock)
}

pub fn grad_fit_with_clock<C: Clock>(
    x: &DenseTensor,
    w: &WeightMask,
    cfg: &SolverConfig,
    clock: &C,
) -> Result<(FactorModel, FitReport)> {
    check_inputs(x, w, cfg)?;
    let penalty = cfg.penalty.prepare(x.dims())?;
    if penalty.config().nu.iter().any(|&nu| nu != NormSpec::L2) {
        return Err(Error::Unsupported("the solvers need L2 factor norms".into()));
    }
    let (start, seed) = starting_point(x, w, cfg)?;
    let mut problem = Problem {
        objective: SmoothObjective::new(x, w, &penalty)?,
        dims: x.dims().to_vec(),
        rank: cfg.rank,
        evaluations: 0,
    };
    let mut xk = start.denormalize().to_flat();
    let (mut f, mut g) = problem.value_and_gradient(&xk)?;
    let mut progress = Progress::new(clock, f, cfg.rel_tol);
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut converged = false;

    for _ in 0..cfg.max_iter {
        let pg_norm = projected_gradient_norm(&xk, &g);
        if pg_norm == 0.0 {
            converged = true;
            break;
        }
        let eps = f64::min(pg_norm, ACTIVE_SET_WIDTH);
        let free: Vec<bool> = xk.iter().zip(&g).map(|(&xi, &gi)| is_free(xi, gi, eps)).collect();
        let steepest: Vec<f64> = g.iter().zip(&free).map(|(gi, &f)| if f { -gi } else { 0.0 }).collect();
        let mut step = None;
        if !memory.is_empty() {
            let dir = two_loop(&g, &free, &memory);
            if dot(&dir, &g) < 0.0 {
                step = projected_search(&mut problem, &xk, f, &g, &dir, 1.0)?;
            }
        }
        if step.is_none() {
            memory.clear();
            let norm = crate::math::sqrt(dot(&steepest, &steepest));
            step = projected_search(&mut problem, &xk, f, &g, &steepest, f64::min(1.0, 1.0 / norm))?;
        }
        let Some((x_next, _)) = step else {
            // no descent possible at working precision
            converged = true;
            break;
        };
        let (f_next, g_next) = problem.value_and_gradient(&x_next)?;
        let s: Vec<f64> = x_next.iter().zip(&xk).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_next.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&y, &y).max(f64::MIN_POSITIVE) && sy > 0.0 {
            if memory.len() == cfg.memory {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        xk = x_next;
        f = f_next;
        g = g_next;
        if progress.record(f) {
            converged = true;
            break;
        }
    }
    log::debug!("projected L-BFGS used {} objective evaluations", problem.evaluations);
    Ok((problem.model(&xk)?, progress.finish(converged, seed)))
}
