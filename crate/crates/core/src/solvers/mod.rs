//! Fitting procedures for both parameterizations.
//!
//! - [`hals_fit`] runs hierarchical alternating least squares on the
//!   normalized problem `min f̃(λ, Ã)`: one component at a time, each factor
//!   column is updated by a bound-constrained descent on its block problem and
//!   renormalized, then `λ_r` gets its closed-form update.
//! - [`grad_fit`] minimizes the unnormalized `f(A)` over the non-negative
//!   orthant with a projected limited-memory quasi-Newton method.
//!
//! Both record the full objective after every iteration and stop when its
//! relative decrease falls below `rel_tol` or after `max_iter` iterations.

mod hals;
mod init;
mod projected_lbfgs;

use alloc::vec::Vec;

pub use hals::{hals_block_objective, hals_fit, hals_fit_with_clock, hals_subproblem, lambda_update, ColumnUpdate, SubproblemInput};
pub use init::{init_random, init_svd};
pub use projected_lbfgs::{grad_fit, grad_fit_with_clock};

use crate::diagnostics::coercivity_check;
use crate::error::{invalid, Error, Result};
use crate::model::NormalizedFactorModel;
use crate::penalties::PenaltyConfig;
use crate::tensor::{DenseTensor, WeightMask};

/// How the starting point is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Leading left singular vectors of each unfolding of the mean-imputed data.
    SvdBased,
    /// Uniform(0, 1) entries, then normalized.
    Random(u64),
    /// A caller-supplied starting point.
    Given(NormalizedFactorModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub rank: usize,
    pub max_iter: usize,
    /// Stop when `|f_k − f_{k+1}| / f_k` drops below this.
    pub rel_tol: f64,
    pub penalty: PenaltyConfig,
    pub init: Init,
    /// Descent steps per HALS column update.
    pub inner_iters: usize,
    /// Minimize the penalized one-dimensional problem in the `λ_r` update
    /// (the plain weighted least-squares ratio when false).
    pub lambda_update_includes_penalty: bool,
    /// Include, in the HALS column problem, the change that renormalizing the
    /// column induces on the other modes' penalty terms through `λ_r`.
    pub column_update_includes_scale_coupling: bool,
    /// Correction pairs kept by the quasi-Newton solver.
    pub memory: usize,
}

impl SolverConfig {
    pub fn new(rank: usize, penalty: PenaltyConfig) -> Self {
        SolverConfig {
            rank,
            max_iter: 10_000,
            rel_tol: 1e-6,
            penalty,
            init: Init::SvdBased,
            inner_iters: 20,
            lambda_update_includes_penalty: true,
            column_update_includes_scale_coupling: true,
            memory: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(invalid("max_iter must be at least 1"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(invalid("rel_tol must be positive"));
        }
        if self.rank < 1 {
            return Err(invalid("rank must be at least 1"));
        }
        if self.memory < 1 {
            return Err(invalid("memory must be at least 1"));
        }
        self.penalty.validate()
    }
}

/// Trajectory and timing of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Objective at the start point followed by one value per iteration.
    pub objective_trajectory: Vec<f64>,
    /// Seconds since the start of the fit, aligned with the trajectory.
    pub elapsed_seconds: Vec<f64>,
    pub iterations: usize,
    /// Mean wall time per iteration.
    pub tpi_seconds: f64,
    pub converged: bool,
    /// Seed of a random initialization, if any.
    pub seed: Option<u64>,
}

impl FitReport {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trajectory.last().unwrap_or(&f64::NAN)
    }
}

/// Monotonic clock in seconds; `no_std` builds use [`NoClock`].
pub trait Clock {
    fn now_seconds(&self) -> f64;
}

/// Clock that always reads zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_seconds(&self) -> f64 {
        0.0
    }
}

pub(crate) fn check_inputs(x: &DenseTensor, w: &WeightMask, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if x.shape() != w.shape() {
        return Err(Error::ShapeMismatch("data and weights differ in shape".into()));
    }
    if cfg.penalty.order() != x.shape().order() {
        return Err(Error::ShapeMismatch("penalty and data have different orders".into()));
    }
    if w.observed_count() == 0 {
        return Err(Error::AllMissing);
    }
    let verdict = coercivity_check(w, &cfg.penalty.alpha)?;
    if !verdict.coercive {
        log::warn!(
            "objective is not coercive for this mask (fully missing cylinder {:?}); a global minimum may not exist",
            verdict.witness
        );
    }
    Ok(())
}

pub(crate) fn starting_point(x: &DenseTensor, w: &WeightMask, cfg: &SolverConfig) -> Result<(NormalizedFactorModel, Option<u64>)> {
    match &cfg.init {
        Init::SvdBased => Ok((init_svd(x, w, cfg.rank)?, None)),
        Init::Random(seed) => Ok((init_random(x.dims(), cfg.rank, *seed), Some(*seed))),
        Init::Given(model) => {
            if model.factors().iter().map(|f| f.rows()).ne(x.dims().iter().copied()) || model.lambda().len() != cfg.rank {
                return Err(Error::ShapeMismatch("initial model does not match the data or rank".into()));
            }
            Ok((model.clone(), None))
        }
    }
}

/// Tracks the objective and decides when to stop.
pub(crate) struct Progress<'c, C: Clock> {
    clock: &'c C,
    start: f64,
    trajectory: Vec<f64>,
    elapsed: Vec<f64>,
    rel_tol: f64,
}

impl<'c, C: Clock> Progress<'c, C> {
    pub fn new(clock: &'c C, initial: f64, rel_tol: f64) -> Self {
        let start = clock.now_seconds();
        Progress { clock, start, trajectory: alloc::vec![initial], elapsed: alloc::vec![0.0], rel_tol }
    }

    /// Records one iteration; returns true once the relative change is small.
    pub fn record(&mut self, value: f64) -> bool {
        let prev = *self.trajectory.last().expect("trajectory starts non-empty");
        self.trajectory.push(value);
        self.elapsed.push(self.clock.now_seconds() - self.start);
        if value == 0.0 {
            return true;
        }
        let change = crate::math::abs(prev - value) / f64::max(crate::math::abs(prev), f64::MIN_POSITIVE);
        change < self.rel_tol
    }

    pub fn finish(self, converged: bool, seed: Option<u64>) -> FitReport {
        let iterations = self.trajectory.len() - 1;
        let total = *self.elapsed.last().unwrap_or(&0.0);
        FitReport {
            objective_trajectory: self.trajectory,
            elapsed_seconds: self.elapsed,
            iterations,
            tpi_seconds: if iterations > 0 { total / iterations as f64 } else { 0.0 },
            converged,
            seed,
        }
    }
}
