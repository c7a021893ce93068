//! K-fold selection of the penalty weight.
//!
//! The observed entries are split into `k` disjoint folds. Each
//! `(fold, α)` cell fits on one side of the split and scores the weighted loss
//! on the other; cells are independent so callers may evaluate them in any
//! order or concurrently before assembling the result.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::coercivity_check;
use crate::error::{invalid, shape_mismatch, Error, Result};
use crate::model::loss_weighted;
use crate::solvers::{grad_fit, hals_fit, SolverConfig};
use crate::tensor::{DenseTensor, WeightMask};

/// Splits the observed entries of `w` into `k` binary masks of sizes
/// differing by at most one.
pub fn mask_partition(w: &WeightMask, k: usize, seed: u64) -> Result<Vec<WeightMask>> {
    if k < 2 {
        return Err(invalid("at least two folds are needed"));
    }
    let mut observed: Vec<usize> = (0..w.values().len()).filter(|&i| w.is_observed(i)).collect();
    if observed.len() < k {
        return Err(Error::TooFewObserved { observed: observed.len(), folds: k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    observed.shuffle(&mut rng);
    let mut fold_of = vec![usize::MAX; w.values().len()];
    for (pos, &flat) in observed.iter().enumerate() {
        fold_of[flat] = pos % k;
    }
    Ok((0..k).map(|f| WeightMask::from_observed(w.shape().clone(), |i| fold_of[i] == f)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    #[default]
    Hals,
    Grad,
}

/// Which side of the split is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CvConvention {
    /// Fit on the other `k − 1` folds, score on fold `k`.
    #[default]
    Standard,
    /// Fit on fold `k`, score on the other `k − 1` folds.
    FitOnFold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub folds: usize,
    pub seed: u64,
    pub solver: SolverKind,
    /// Solver settings; for grid value `a`, `α_n = a` on every mode with a
    /// seminorm and `0` elsewhere.
    pub base: SolverConfig,
    pub convention: CvConvention,
}

impl CvConfig {
    pub fn new(base: SolverConfig) -> Self {
        CvConfig { folds: 5, seed: 0, solver: SolverKind::Hals, base, convention: CvConvention::Standard }
    }
}

/// One `(fold, grid point)` fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvCell {
    pub fold: usize,
    pub grid_index: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub grid: Vec<f64>,
    /// `scores[fold][grid_index]`; `None` for a skipped fold.
    pub scores: Vec<Vec<Option<f64>>>,
    /// Mean over non-skipped folds; `None` for a disqualified grid point.
    pub mean: Vec<Option<f64>>,
    pub selected_index: usize,
    pub selected_alpha: f64,
}

/// Prepared folds and grid.
#[derive(Debug, Clone)]
pub struct CvPlan<'a> {
    x: &'a DenseTensor,
    grid: Vec<f64>,
    cfg: CvConfig,
    train: Vec<WeightMask>,
    holdout: Vec<WeightMask>,
}

impl<'a> CvPlan<'a> {
    pub fn new(x: &'a DenseTensor, w: &WeightMask, grid: &[f64], cfg: &CvConfig) -> Result<Self> {
        if grid.is_empty() {
            return Err(invalid("the grid is empty"));
        }
        if grid.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(invalid("grid values must be finite and non-negative"));
        }
        if x.shape() != w.shape() {
            return Err(shape_mismatch("data and weights differ in shape"));
        }
        cfg.base.validate()?;
        let folds = mask_partition(w, cfg.folds, cfg.seed)?;
        let mut train = Vec::with_capacity(folds.len());
        let mut holdout = Vec::with_capacity(folds.len());
        for fold in &folds {
            let inside = w.restrict(fold)?;
            let outside = WeightMask::new(DenseTensor::new(
                w.shape().clone(),
                w.values().iter().zip(fold.values()).map(|(&v, &f)| if f > 0.0 { 0.0 } else { v }).collect(),
            )?)?;
            match cfg.convention {
                CvConvention::Standard => {
                    train.push(outside);
                    holdout.push(inside);
                }
                CvConvention::FitOnFold => {
                    train.push(inside);
                    holdout.push(outside);
                }
            }
        }
        Ok(CvPlan { x, grid: grid.to_vec(), cfg: cfg.clone(), train, holdout })
    }

    pub fn train_mask(&self, fold: usize) -> &WeightMask {
        &self.train[fold]
    }

    pub fn holdout_mask(&self, fold: usize) -> &WeightMask {
        &self.holdout[fold]
    }

    /// Cells in fold-major order.
    pub fn cells(&self) -> Vec<CvCell> {
        (0..self.train.len())
            .flat_map(|fold| {
                self.grid.iter().enumerate().map(move |(grid_index, &alpha)| CvCell { fold, grid_index, alpha })
            })
            .collect()
    }

    /// Solver settings for one grid value.
    pub fn solver_config(&self, alpha: f64) -> SolverConfig {
        let mut cfg = self.cfg.base.clone();
        cfg.penalty.alpha = cfg.penalty.mu.iter().map(|m| if m.is_some() { alpha } else { 0.0 }).collect();
        cfg
    }

    /// Holdout loss of one cell, or `None` when its training mask leaves the
    /// objective non-coercive.
    pub fn evaluate(&self, cell: &CvCell) -> Result<Option<f64>> {
        let train = &self.train[cell.fold];
        let cfg = self.solver_config(cell.alpha);
        let verdict = coercivity_check(train, &cfg.penalty.alpha)?;
        if !verdict.coercive {
            log::warn!("fold {} skipped for alpha {}: training mask is not coercive", cell.fold, cell.alpha);
            return Ok(None);
        }
        let holdout = &self.holdout[cell.fold];
        let score = match self.cfg.solver {
            SolverKind::Hals => loss_weighted(self.x, holdout, &hals_fit(self.x, train, &cfg)?.0)?,
            SolverKind::Grad => loss_weighted(self.x, holdout, &grad_fit(self.x, train, &cfg)?.0)?,
        };
        Ok(Some(score))
    }

    /// Combines cell scores given in any order.
    pub fn assemble(&self, results: &[(CvCell, Option<f64>)]) -> Result<CvResult> {
        let folds = self.train.len();
        let mut scores = vec![vec![None; self.grid.len()]; folds];
        let mut seen = vec![vec![false; self.grid.len()]; folds];
        for (cell, score) in results {
            if cell.fold >= folds || cell.grid_index >= self.grid.len() {
                return Err(invalid("cell outside the plan"));
            }
            scores[cell.fold][cell.grid_index] = *score;
            seen[cell.fold][cell.grid_index] = true;
        }
        if seen.iter().flatten().any(|s| !s) {
            return Err(invalid("not every cell was evaluated"));
        }
        let mean: Vec<Option<f64>> = (0..self.grid.len())
            .map(|g| {
                let kept: Vec<f64> = scores.iter().filter_map(|row| row[g]).collect();
                (!kept.is_empty()).then(|| kept.iter().sum::<f64>() / kept.len() as f64)
            })
            .collect();
        // ties go to the smaller α
        let mut best: Option<usize> = None;
        for (g, m) in mean.iter().enumerate() {
            let Some(m) = *m else { continue };
            best = match best {
                None => Some(g),
                Some(b) => {
                    let mb = mean[b].expect("best has a mean");
                    if m < mb || (m == mb && self.grid[g] < self.grid[b]) {
                        Some(g)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        let selected_index =
            best.ok_or_else(|| Error::InvalidArgument("every grid value was disqualified".to_string()))?;
        Ok(CvResult {
            grid: self.grid.clone(),
            scores,
            mean,
            selected_index,
            selected_alpha: self.grid[selected_index],
        })
    }
}

/// Evaluates every cell in order and selects the grid value with the least
/// mean holdout loss.
pub fn cv_select_alpha(x: &DenseTensor, w: &WeightMask, grid: &[f64], cfg: &CvConfig) -> Result<CvResult> {
    let plan = CvPlan::new(x, w, grid, cfg)?;
    let mut results = Vec::new();
    for cell in plan.cells() {
        let score = plan.evaluate(&cell)?;
        results.push((cell, score));
    }
    let result = plan.assemble(&results)?;
    log::info!("cv selected alpha {} ({:?})", result.selected_alpha, result.mean);
    Ok(result)
}
