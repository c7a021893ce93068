//! The two CP parameterizations, the weighted loss, both penalty forms and
//! the gradient of the unnormalized objective.
//!
//! With `ν_n = ‖·‖₂` and `d = p = 2`, the unnormalized objective is
//!
//! ```text
//! f(A)    = ‖W ⊛ (X − Σ_r a_r^(1) ∘ … ∘ a_r^(N))‖²
//!         + Σ_n α_n Σ_r μ_n²(a_r^(n)) Π_{m≠n} ‖a_r^(m)‖²
//! f̃(λ, Ã) = ‖W ⊛ (X − Σ_r λ_r ã_r^(1) ∘ … ∘ ã_r^(N))‖² + Σ_n α_n Σ_r λ_r² μ_n²(ã_r^(n))
//! ```
//!
//! and `f(A) = f̃(normalize(A))`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, shape_mismatch, Result};
use crate::math;
use crate::penalties::{NormSpec, Penalty};
use crate::tensor::{accumulate_rank_one, mttkrp, DenseTensor, Matrix, Shape, WeightMask};

/// Tolerance on the unit norm of normalized factor columns.
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// Anything that expands to a dense tensor of rank at most `R`.
pub trait CpModel {
    fn dims(&self) -> Vec<usize>;
    fn rank(&self) -> usize;
    fn reconstruct(&self) -> DenseTensor;
}

fn check_factors(factors: &[Matrix]) -> Result<usize> {
    let rank = factors.first().map(Matrix::cols).ok_or_else(|| invalid("a model needs at least one mode"))?;
    if rank == 0 {
        return Err(invalid("rank must be at least 1"));
    }
    if factors.iter().any(|f| f.cols() != rank) {
        return Err(shape_mismatch("factor matrices have different column counts"));
    }
    if factors.iter().any(|f| f.rows() == 0) {
        return Err(invalid("factor matrices need at least one row"));
    }
    for f in factors {
        if f.as_slice().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("factor entries must be finite and non-negative"));
        }
    }
    Ok(rank)
}

fn reconstruct_scaled(factors: &[Matrix], scales: Option<&[f64]>) -> DenseTensor {
    let dims: Vec<usize> = factors.iter().map(Matrix::rows).collect();
    let shape = Shape::new(dims).expect("factor dimensions are positive");
    let mut values = vec![0.0; shape.num_entries()];
    let rank = factors[0].cols();
    for r in 0..rank {
        let scale = scales.map_or(1.0, |s| s[r]);
        if scale == 0.0 {
            continue;
        }
        let cols: Vec<Vec<f64>> = factors.iter().map(|f| f.column(r)).collect();
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        accumulate_rank_one(&mut values, shape.dims(), &refs, scale, false);
    }
    DenseTensor::from_raw(shape, values)
}

/// Unnormalized factors `A^(1:N)`, each `I_n × R` and entrywise non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    factors: Vec<Matrix>,
}

impl FactorModel {
    pub fn new(factors: Vec<Matrix>) -> Result<Self> {
        check_factors(&factors)?;
        Ok(FactorModel { factors })
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub fn factor(&self, n: usize) -> &Matrix {
        &self.factors[n]
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    /// Concatenation of all factors in storage order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.factors.iter().flat_map(|f| f.as_slice().iter().copied()).collect()
    }

    /// Inverse of [`FactorModel::to_flat`] for the same dimensions and rank.
    pub fn from_flat(dims: &[usize], rank: usize, flat: &[f64]) -> Result<Self> {
        let total: usize = dims.iter().map(|d| d * rank).sum();
        if flat.len() != total {
            return Err(shape_mismatch(format!("{} values for {total} factor entries", flat.len())));
        }
        let mut offset = 0;
        let factors = dims
            .iter()
            .map(|&d| {
                let m = Matrix::from_vec(d, rank, flat[offset..offset + d * rank].to_vec());
                offset += d * rank;
                m
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(factors)
    }

    /// `(λ, Ã)` with `λ_r = Π_n ν_n(a_r^(n))`; zero-norm columns map to the
    /// default sphere element.
    pub fn normalize(&self, nu: &[NormSpec]) -> Result<NormalizedFactorModel> {
        if nu.len() != self.order() {
            return Err(shape_mismatch("one norm per mode is required"));
        }
        let rank = self.rank();
        let mut lambda = vec![1.0; rank];
        let mut factors = Vec::with_capacity(self.order());
        for (f, norm) in self.factors.iter().zip(nu) {
            let mut out = f.clone();
            for r in 0..rank {
                let col = f.column(r);
                let v = norm.value(&col);
                lambda[r] *= v;
                if v > 0.0 {
                    let unit: Vec<f64> = col.iter().map(|x| x / v).collect();
                    out.set_column(r, &unit);
                } else {
                    out.set_column(r, &norm.default_sphere_element(f.rows()));
                }
            }
            factors.push(out);
        }
        Ok(NormalizedFactorModel { lambda, factors })
    }

    pub fn normalize_l2(&self) -> NormalizedFactorModel {
        self.normalize(&vec![NormSpec::L2; self.order()]).expect("one norm per mode")
    }
}

impl CpModel for FactorModel {
    fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(Matrix::rows).collect()
    }

    fn rank(&self) -> usize {
        self.factors[0].cols()
    }

    fn reconstruct(&self) -> DenseTensor {
        reconstruct_scaled(&self.factors, None)
    }
}

/// Scales `λ ∈ ℝ₊^R` and factors whose columns lie on the positive unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedFactorModel {
    lambda: Vec<f64>,
    factors: Vec<Matrix>,
}

impl NormalizedFactorModel {
    /// Validates against L2-normalized columns.
    pub fn new(lambda: Vec<f64>, factors: Vec<Matrix>) -> Result<Self> {
        let nu = vec![NormSpec::L2; factors.len()];
        Self::with_norms(lambda, factors, &nu)
    }

    pub fn with_norms(lambda: Vec<f64>, factors: Vec<Matrix>, nu: &[NormSpec]) -> Result<Self> {
        let rank = check_factors(&factors)?;
        if lambda.len() != rank {
            return Err(shape_mismatch(format!("{} scales for rank {rank}", lambda.len())));
        }
        if lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(invalid("scales must be finite and non-negative"));
        }
        if nu.len() != factors.len() {
            return Err(shape_mismatch("one norm per mode is required"));
        }
        for (n, (f, norm)) in factors.iter().zip(nu).enumerate() {
            for r in 0..rank {
                let v = norm.value(&f.column(r));
                if math::abs(v - 1.0) > UNIT_NORM_TOL {
                    return Err(invalid(format!("column {r} of mode {n} has norm {v}, expected 1")));
                }
            }
        }
        Ok(NormalizedFactorModel { lambda, factors })
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub fn factor(&self, n: usize) -> &Matrix {
        &self.factors[n]
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut Vec<f64>, &mut Vec<Matrix>) {
        (&mut self.lambda, &mut self.factors)
    }

    /// `a_r^(n) = λ_r^{1/N} ã_r^(n)`.
    pub fn denormalize(&self) -> FactorModel {
        let order = self.order() as f64;
        let roots: Vec<f64> = self.lambda.iter().map(|&l| math::powf(l, 1.0 / order)).collect();
        let factors = self
            .factors
            .iter()
            .map(|f| Matrix::from_fn(f.rows(), f.cols(), |i, r| roots[r] * f[(i, r)]))
            .collect();
        FactorModel { factors }
    }

    /// Reorders the components.
    pub fn permute_components(&self, perm: &[usize]) -> Self {
        let lambda = perm.iter().map(|&s| self.lambda[s]).collect();
        let factors = self
            .factors
            .iter()
            .map(|f| Matrix::from_fn(f.rows(), f.cols(), |i, r| f[(i, perm[r])]))
            .collect();
        NormalizedFactorModel { lambda, factors }
    }
}

impl CpModel for NormalizedFactorModel {
    fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(Matrix::rows).collect()
    }

    fn rank(&self) -> usize {
        self.lambda.len()
    }

    fn reconstruct(&self) -> DenseTensor {
        reconstruct_scaled(&self.factors, Some(&self.lambda))
    }
}

fn check_problem(x: &DenseTensor, w: &WeightMask, model_dims: &[usize]) -> Result<()> {
    if x.shape() != w.shape() {
        return Err(shape_mismatch(format!("data {:?} vs weights {:?}", x.dims(), w.shape().dims())));
    }
    if x.dims() != model_dims {
        return Err(shape_mismatch(format!("data {:?} vs model {:?}", x.dims(), model_dims)));
    }
    Ok(())
}

/// `‖W ⊛ (X − X̂)‖²_F` for an already expanded estimate.
pub fn weighted_residual_sq(x: &DenseTensor, w: &WeightMask, estimate: &DenseTensor) -> Result<f64> {
    if x.shape() != w.shape() || x.shape() != estimate.shape() {
        return Err(shape_mismatch("data, weights and estimate must share a shape"));
    }
    Ok(x.values()
        .iter()
        .zip(w.values())
        .zip(estimate.values())
        .map(|((xv, wv), ev)| {
            let r = wv * (xv - ev);
            r * r
        })
        .sum())
}

/// `L_W` (or `L̃_W`): `‖W ⊛ (X − reconstruct(model))‖²_F`.
pub fn loss_weighted<M: CpModel>(x: &DenseTensor, w: &WeightMask, model: &M) -> Result<f64> {
    check_problem(x, w, &model.dims())?;
    weighted_residual_sq(x, w, &model.reconstruct())
}

fn check_penalty(penalty: &Penalty, dims: &[usize]) -> Result<()> {
    if penalty.order() != dims.len() {
        return Err(shape_mismatch("penalty and model have different orders"));
    }
    for (n, &d) in dims.iter().enumerate() {
        if let Some(s) = penalty.seminorm(n) {
            if s.len() != d {
                return Err(shape_mismatch(format!("mode {n}: seminorm length {} vs {d}", s.len())));
            }
        }
    }
    Ok(())
}

/// `P̃_α(λ, Ã) = Σ_n α_n Σ_r λ_r^d μ_n^p(ã_r^(n))`.
pub fn penalty_normalized(penalty: &Penalty, model: &NormalizedFactorModel) -> Result<f64> {
    check_penalty(penalty, &model.dims())?;
    let d = penalty.config().d as i32;
    let mut total = 0.0;
    for n in 0..model.order() {
        if penalty.alpha(n) == 0.0 {
            continue;
        }
        for r in 0..model.rank() {
            let lam = math::powi(model.lambda[r], d);
            if lam == 0.0 {
                continue;
            }
            total += lam * penalty.weighted_seminorm_pow(n, &model.factors[n].column(r));
        }
    }
    Ok(total)
}

/// `P_α(A) = Σ_n α_n Σ_r ν_n^{d−p}(a_r^(n)) μ_n^p(a_r^(n)) Π_{m≠n} ν_m^d(a_r^(m))`.
pub fn penalty_unnormalized(penalty: &Penalty, model: &FactorModel) -> Result<f64> {
    check_penalty(penalty, &model.dims())?;
    let cfg = penalty.config();
    let (d, p) = (cfg.d as i32, cfg.p as i32);
    let order = model.order();
    let mut total = 0.0;
    for r in 0..model.rank() {
        let cols: Vec<Vec<f64>> = model.factors.iter().map(|f| f.column(r)).collect();
        let norms: Vec<f64> = cols.iter().enumerate().map(|(m, c)| penalty.norm(m).value(c)).collect();
        for n in 0..order {
            if penalty.alpha(n) == 0.0 {
                continue;
            }
            let others: f64 = (0..order).filter(|&m| m != n).map(|m| math::powi(norms[m], d)).product();
            if others == 0.0 {
                continue;
            }
            total += math::powi(norms[n], d - p) * penalty.weighted_seminorm_pow(n, &cols[n]) * others;
        }
    }
    Ok(total)
}

/// `f = L_W + P_α`.
pub fn objective_unnormalized(x: &DenseTensor, w: &WeightMask, penalty: &Penalty, model: &FactorModel) -> Result<f64> {
    Ok(loss_weighted(x, w, model)? + penalty_unnormalized(penalty, model)?)
}

/// `f̃ = L̃_W + P̃_α`.
pub fn objective_normalized(
    x: &DenseTensor,
    w: &WeightMask,
    penalty: &Penalty,
    model: &NormalizedFactorModel,
) -> Result<f64> {
    Ok(loss_weighted(x, w, model)? + penalty_normalized(penalty, model)?)
}

/// Objective and gradient of `f` for `d = p = 2`, L2 norms and quadratic
/// seminorms, with the data and squared weights held for repeated calls.
#[derive(Debug, Clone)]
pub struct SmoothObjective<'a> {
    x: &'a DenseTensor,
    w: &'a WeightMask,
    w_sq: Vec<f64>,
    penalty: &'a Penalty,
}

impl<'a> SmoothObjective<'a> {
    pub fn new(x: &'a DenseTensor, w: &'a WeightMask, penalty: &'a Penalty) -> Result<Self> {
        if x.shape() != w.shape() {
            return Err(shape_mismatch("data and weights differ in shape"));
        }
        check_penalty(penalty, x.dims())?;
        penalty.check_smooth_quadratic()?;
        Ok(SmoothObjective { x, w, w_sq: w.squared(), penalty })
    }

    pub fn data(&self) -> &DenseTensor {
        self.x
    }

    pub fn weights(&self) -> &WeightMask {
        self.w
    }

    pub fn penalty(&self) -> &Penalty {
        self.penalty
    }

    /// Per-component squared column norms and seminorm quadratic values.
    fn column_terms(&self, factors: &[Matrix]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let rank = factors[0].cols();
        let mut nsq = Vec::with_capacity(factors.len());
        let mut quad = Vec::with_capacity(factors.len());
        for (n, f) in factors.iter().enumerate() {
            let mut ns = vec![0.0; rank];
            let mut qs = vec![0.0; rank];
            for r in 0..rank {
                let col = f.column(r);
                ns[r] = col.iter().map(|v| v * v).sum();
                if let Some(m) = self.penalty.quadratic(n) {
                    qs[r] = self.penalty.alpha(n) * f64::max(m.quadratic_form(&col), 0.0);
                }
            }
            nsq.push(ns);
            quad.push(qs);
        }
        (nsq, quad)
    }

    fn penalty_value(nsq: &[Vec<f64>], quad: &[Vec<f64>]) -> f64 {
        let order = nsq.len();
        let rank = nsq[0].len();
        let mut total = 0.0;
        for r in 0..rank {
            for n in 0..order {
                if quad[n][r] == 0.0 {
                    continue;
                }
                let others: f64 = (0..order).filter(|&m| m != n).map(|m| nsq[m][r]).product();
                total += quad[n][r] * others;
            }
        }
        total
    }

    fn check_model(&self, model: &FactorModel) -> Result<()> {
        if model.dims() != self.x.dims() {
            return Err(shape_mismatch(format!("data {:?} vs model {:?}", self.x.dims(), model.dims())));
        }
        Ok(())
    }

    pub fn value(&self, model: &FactorModel) -> Result<f64> {
        self.check_model(model)?;
        let loss = weighted_residual_sq(self.x, self.w, &model.reconstruct())?;
        let (nsq, quad) = self.column_terms(model.factors());
        Ok(loss + Self::penalty_value(&nsq, &quad))
    }

    /// `(f(A), ∂f/∂A^(1:N))`.
    pub fn value_and_gradient(&self, model: &FactorModel) -> Result<(f64, Vec<Matrix>)> {
        self.check_model(model)?;
        let factors = model.factors();
        let order = factors.len();
        let rank = model.rank();
        let recon = model.reconstruct();
        let mut loss = 0.0;
        let z: Vec<f64> = self
            .x
            .values()
            .iter()
            .zip(recon.values())
            .zip(&self.w_sq)
            .map(|((xv, rv), w2)| {
                let e = xv - rv;
                loss += w2 * e * e;
                w2 * e
            })
            .collect();
        let z = DenseTensor::from_raw(self.x.shape().clone(), z);
        let (nsq, quad) = self.column_terms(factors);
        let value = loss + Self::penalty_value(&nsq, &quad);

        let mut grads = Vec::with_capacity(order);
        for n in 0..order {
            let mut g = mttkrp(&z, factors, n)?;
            g.as_mut_slice().iter_mut().for_each(|v| *v *= -2.0);
            for r in 0..rank {
                let col = factors[n].column(r);
                // Σ_{n'≠n} α_{n'} μ²(a^(n')) Π_{m∉{n,n'}} ‖a^(m)‖²
                let mut coupling = 0.0;
                for k in 0..order {
                    if k == n || quad[k][r] == 0.0 {
                        continue;
                    }
                    let others: f64 = (0..order).filter(|&m| m != n && m != k).map(|m| nsq[m][r]).product();
                    coupling += quad[k][r] * others;
                }
                let own = match self.penalty.quadratic(n) {
                    Some(m) => {
                        let others: f64 = (0..order).filter(|&m| m != n).map(|m| nsq[m][r]).product();
                        let scale = 2.0 * self.penalty.alpha(n) * others;
                        (scale != 0.0).then(|| (scale, m.mul_vec(&col)))
                    }
                    None => None,
                };
                for i in 0..col.len() {
                    let mut extra = 2.0 * coupling * col[i];
                    if let Some((scale, mv)) = &own {
                        extra += scale * mv[i];
                    }
                    g[(i, r)] += extra;
                }
            }
            grads.push(g);
        }
        Ok((value, grads))
    }
}

/// `∂f/∂A^(n)` for every mode; requires `d = p = 2`, L2 norms and quadratic
/// seminorms on the penalized modes.
pub fn gradient_objective(x: &DenseTensor, w: &WeightMask, penalty: &Penalty, model: &FactorModel) -> Result<Vec<Matrix>> {
    for &nu in &penalty.config().nu {
        if nu != NormSpec::L2 {
            return Err(crate::Error::Unsupported("gradients need L2 factor norms".into()));
        }
    }
    Ok(SmoothObjective::new(x, w, penalty)?.value_and_gradient(model)?.1)
}
