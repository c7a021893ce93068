//! Factor norms `ν_n` and smoothness seminorms `μ_n`.
//!
//! Two seminorm families are provided: the total variation p-norm of
//! consecutive differences and the roughness `(∫₀¹ a''(u)² du)^{1/2}` of the
//! natural cubic spline interpolating `(u_i, a_i)`. Both vanish on a
//! non-trivial subspace (constants, resp. vectors affine in the knots) and are
//! norms on the positive vectors that have at least one zero entry, which is
//! what the existence theory needs. The quadratic members (TV-2 and spline
//! roughness) carry a cached PSD matrix `M` with `μ²(a) = aᵀMa`; only those
//! have gradients and can be used by the solvers.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::linalg::{cholesky_banded, cholesky_solve};
use crate::math;
use crate::tensor::{norm2, Matrix};

/// Norm used to normalize the factor columns of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormSpec {
    #[default]
    L2,
}

impl NormSpec {
    pub fn value(&self, a: &[f64]) -> f64 {
        match self {
            NormSpec::L2 => norm2(a),
        }
    }

    /// Deterministic element of the positive unit sphere used for columns
    /// whose norm vanishes: the uniform vector.
    pub fn default_sphere_element(&self, len: usize) -> Vec<f64> {
        let u = vec![1.0; len];
        let s = self.value(&u);
        u.into_iter().map(|x| x / s).collect()
    }
}

/// Smoothness seminorm of one mode.
#[derive(Debug, Clone, PartialEq)]
pub enum SeminormSpec {
    /// `‖a‖_{TV,p}`, `p ∈ [1, ∞]` (`f64::INFINITY` for the max norm).
    TotalVariation { p: f64 },
    /// Natural cubic spline roughness. `None` selects the knots
    /// `u_i = (i − 0.5)/I`.
    SplineRoughness { knots: Option<Vec<f64>> },
}

impl SeminormSpec {
    pub fn tv2() -> Self {
        SeminormSpec::TotalVariation { p: 2.0 }
    }

    pub fn spline() -> Self {
        SeminormSpec::SplineRoughness { knots: None }
    }

    pub fn is_quadratic(&self) -> bool {
        match self {
            SeminormSpec::TotalVariation { p } => *p == 2.0,
            SeminormSpec::SplineRoughness { .. } => true,
        }
    }
}

/// `(Σ_{i<I} |a_i − a_{i+1}|^p)^{1/p}`, or the largest jump when `p = ∞`.
pub fn tv_seminorm(a: &[f64], p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(invalid(format!("total variation order must be in [1, inf], got {p}")));
    }
    let jumps = a.windows(2).map(|w| math::abs(w[0] - w[1]));
    Ok(if p == f64::INFINITY {
        jumps.fold(0.0, f64::max)
    } else if p == 1.0 {
        jumps.sum()
    } else if p == 2.0 {
        math::sqrt(jumps.map(|j| j * j).sum())
    } else {
        math::powf(jumps.map(|j| math::powf(j, p)).sum(), 1.0 / p)
    })
}

/// `DᵀD` for the `(I−1) × I` first-difference matrix `D`.
pub fn first_difference_gram(len: usize) -> Matrix {
    let mut m = Matrix::zeros(len, len);
    for i in 0..len.saturating_sub(1) {
        m[(i, i)] += 1.0;
        m[(i + 1, i + 1)] += 1.0;
        m[(i, i + 1)] -= 1.0;
        m[(i + 1, i)] -= 1.0;
    }
    m
}

/// Knots `u_i = (i − 0.5)/I`, `i = 1..I`.
pub fn default_knots(len: usize) -> Vec<f64> {
    (0..len).map(|i| (i as f64 + 0.5) / len as f64).collect()
}

/// Roughness matrix `K = Q R⁻¹ Qᵀ` of the natural cubic spline through
/// `(knots[i], a_i)`, so that `aᵀKa = ∫ a''(u)² du`.
///
/// `Q` (`I × (I−2)`) holds the second divided differences and `R`
/// (`(I−2) × (I−2)`, tridiagonal) the Gram matrix of the second derivatives
/// of the cardinal hat functions.
pub fn spline_roughness_matrix(knots: &[f64]) -> Result<Matrix> {
    let n = knots.len();
    let Some(factor) = SplineFactor::new(knots)? else {
        return Ok(Matrix::zeros(n, n));
    };
    let h = &factor.h;
    let inner = n - 2;
    let mut q = Matrix::zeros(n, inner);
    for j in 0..inner {
        q[(j, j)] = 1.0 / h[j];
        q[(j + 1, j)] = -1.0 / h[j] - 1.0 / h[j + 1];
        q[(j + 2, j)] = 1.0 / h[j + 1];
    }
    // R⁻¹Qᵀ one column of Qᵀ at a time.
    let mut rinv_qt = Matrix::zeros(inner, n);
    for i in 0..n {
        let col = cholesky_solve(&factor.chol, q.row(i));
        rinv_qt.set_column(i, &col);
    }
    let mut k = q.matmul(&rinv_qt)?;
    // exact symmetry
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (k[(i, j)] + k[(j, i)]);
            k[(i, j)] = s;
            k[(j, i)] = s;
        }
    }
    Ok(k)
}

/// Knot spacings and the Cholesky factor of `R`; `None` for two knots.
#[derive(Debug, Clone, PartialEq)]
struct SplineFactor {
    h: Vec<f64>,
    chol: Matrix,
}

impl SplineFactor {
    fn new(knots: &[f64]) -> Result<Option<Self>> {
        let n = knots.len();
        if n < 2 {
            return Err(invalid("spline roughness needs at least two knots"));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("spline knots must be strictly increasing"));
        }
        if knots.iter().any(|&u| !(u > 0.0 && u < 1.0)) {
            return Err(invalid("spline knots must lie in (0, 1)"));
        }
        if n == 2 {
            return Ok(None);
        }
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let inner = n - 2;
        let mut r = Matrix::zeros(inner, inner);
        for j in 0..inner {
            r[(j, j)] = (h[j] + h[j + 1]) / 3.0;
            if j + 1 < inner {
                r[(j, j + 1)] = h[j + 1] / 6.0;
                r[(j + 1, j)] = h[j + 1] / 6.0;
            }
        }
        let chol = cholesky_banded(&r, 1)?;
        Ok(Some(SplineFactor { h, chol }))
    }

    /// `(Qᵀa)ᵀ R⁻¹ (Qᵀa)` with `Qᵀa` as second divided differences, so
    /// constant vectors give exactly zero.
    fn squared(&self, a: &[f64]) -> f64 {
        let h = &self.h;
        let inner = h.len() - 1;
        let l = &self.chol;
        let mut y = vec![0.0; inner];
        let mut total = 0.0;
        for j in 0..inner {
            let z = (a[j + 2] - a[j + 1]) / h[j + 1] - (a[j + 1] - a[j]) / h[j];
            let carry = if j > 0 { l[(j, j - 1)] * y[j - 1] } else { 0.0 };
            y[j] = (z - carry) / l[(j, j)];
            total += y[j] * y[j];
        }
        total
    }
}

/// A seminorm bound to a vector length, with its quadratic form cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Seminorm {
    spec: SeminormSpec,
    len: usize,
    quadratic: Option<Matrix>,
    spline: Option<SplineFactor>,
}

impl Seminorm {
    pub fn new(spec: SeminormSpec, len: usize) -> Result<Self> {
        let mut spline = None;
        let quadratic = match &spec {
            SeminormSpec::TotalVariation { p } => {
                if p.is_nan() || *p < 1.0 {
                    return Err(invalid(format!("total variation order must be in [1, inf], got {p}")));
                }
                (*p == 2.0).then(|| first_difference_gram(len))
            }
            SeminormSpec::SplineRoughness { knots } => {
                let knots = match knots {
                    Some(k) if k.len() != len => {
                        return Err(invalid(format!("{} knots for length {len}", k.len())))
                    }
                    Some(k) => k.clone(),
                    None => default_knots(len),
                };
                spline = SplineFactor::new(&knots)?;
                Some(spline_roughness_matrix(&knots)?)
            }
        };
        Ok(Seminorm { spec, len, quadratic, spline })
    }

    pub fn spec(&self) -> &SeminormSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Cached `M` with `μ²(a) = aᵀMa`, for quadratic kinds.
    pub fn quadratic_form(&self) -> Option<&Matrix> {
        self.quadratic.as_ref()
    }

    pub fn value(&self, a: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.len);
        match (&self.spec, &self.quadratic) {
            (SeminormSpec::TotalVariation { p }, _) if *p != 2.0 => {
                tv_seminorm(a, *p).unwrap_or(f64::NAN)
            }
            _ => math::sqrt(self.squared(a)),
        }
    }

    /// `μ²(a)` from the differencing form rather than the dense matrix, so
    /// the null space evaluates to exactly zero.
    fn squared(&self, a: &[f64]) -> f64 {
        match (&self.spec, &self.spline) {
            (SeminormSpec::TotalVariation { .. }, _) => a.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum(),
            (_, Some(f)) => f.squared(a),
            _ => 0.0,
        }
    }

    /// `μ(a)^p` for a positive integer exponent.
    pub fn value_pow(&self, a: &[f64], p: u32) -> f64 {
        match (&self.quadratic, p) {
            (Some(_), 2) => self.squared(a),
            _ => math::powi(self.value(a), p as i32),
        }
    }

    /// Gradient of `μ²`, i.e. `2Ma`. Only defined for quadratic kinds.
    pub fn gradient_sq(&self, a: &[f64]) -> Result<Vec<f64>> {
        let m = self.quadratic.as_ref().ok_or_else(|| {
            Error::Unsupported(format!("no gradient for the non-quadratic seminorm {:?}", self.spec))
        })?;
        Ok(m.mul_vec(a).into_iter().map(|x| 2.0 * x).collect())
    }
}

/// Convenience wrapper over [`Seminorm::value`].
pub fn seminorm_value(spec: &SeminormSpec, a: &[f64]) -> Result<f64> {
    Ok(Seminorm::new(spec.clone(), a.len())?.value(a))
}

/// Convenience wrapper over [`Seminorm::gradient_sq`].
pub fn seminorm_gradient_sq(spec: &SeminormSpec, a: &[f64]) -> Result<Vec<f64>> {
    Seminorm::new(spec.clone(), a.len())?.gradient_sq(a)
}

/// Penalty weights, exponents and per-mode norms and seminorms.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyConfig {
    pub alpha: Vec<f64>,
    /// Exponent of the scale `λ_r` (resp. of the other modes' norms).
    pub d: u32,
    /// Exponent of the seminorm.
    pub p: u32,
    /// Seminorm per mode; required where `alpha[n] > 0`.
    pub mu: Vec<Option<SeminormSpec>>,
    pub nu: Vec<NormSpec>,
}

impl PenaltyConfig {
    /// No smoothing on any of the `order` modes.
    pub fn unpenalized(order: usize) -> Self {
        PenaltyConfig {
            alpha: vec![0.0; order],
            d: 2,
            p: 2,
            mu: vec![None; order],
            nu: vec![NormSpec::L2; order],
        }
    }

    /// `d = p = 2`, L2 norms and the same seminorm on every mode with a
    /// positive weight.
    pub fn quadratic(alpha: Vec<f64>, seminorm: SeminormSpec) -> Self {
        let order = alpha.len();
        let mu = alpha.iter().map(|&a| (a > 0.0).then(|| seminorm.clone())).collect();
        PenaltyConfig { alpha, d: 2, p: 2, mu, nu: vec![NormSpec::L2; order] }
    }

    pub fn order(&self) -> usize {
        self.alpha.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 1 || self.d < self.p {
            return Err(invalid(format!("exponents need d >= p >= 1, got d={} p={}", self.d, self.p)));
        }
        if self.alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(invalid("penalty weights must be finite and non-negative"));
        }
        let n = self.alpha.len();
        if self.mu.len() != n || self.nu.len() != n {
            return Err(invalid("alpha, mu and nu must have one entry per mode"));
        }
        for (mode, (a, mu)) in self.alpha.iter().zip(&self.mu).enumerate() {
            if *a > 0.0 && mu.is_none() {
                return Err(Error::MissingSeminorm { mode });
            }
        }
        Ok(())
    }

    /// Binds the seminorms to the mode lengths and caches their matrices.
    pub fn prepare(&self, dims: &[usize]) -> Result<Penalty> {
        self.validate()?;
        if dims.len() != self.alpha.len() {
            return Err(Error::ShapeMismatch(format!(
                "penalty has {} modes, tensor has {}",
                self.alpha.len(),
                dims.len()
            )));
        }
        let seminorms = self
            .mu
            .iter()
            .zip(dims)
            .map(|(mu, &len)| mu.clone().map(|s| Seminorm::new(s, len)).transpose())
            .collect::<Result<Vec<_>>>()?;
        Ok(Penalty { config: self.clone(), seminorms })
    }
}

/// A [`PenaltyConfig`] bound to tensor dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Penalty {
    config: PenaltyConfig,
    seminorms: Vec<Option<Seminorm>>,
}

impl Penalty {
    pub fn config(&self) -> &PenaltyConfig {
        &self.config
    }

    pub fn alpha(&self, mode: usize) -> f64 {
        self.config.alpha[mode]
    }

    pub fn norm(&self, mode: usize) -> NormSpec {
        self.config.nu[mode]
    }

    pub fn seminorm(&self, mode: usize) -> Option<&Seminorm> {
        self.seminorms[mode].as_ref()
    }

    pub fn order(&self) -> usize {
        self.seminorms.len()
    }

    /// `α_n μ_n^p(a)`, zero for unpenalized modes.
    pub fn weighted_seminorm_pow(&self, mode: usize, a: &[f64]) -> f64 {
        let alpha = self.config.alpha[mode];
        match &self.seminorms[mode] {
            Some(s) if alpha > 0.0 => alpha * s.value_pow(a, self.config.p),
            _ => 0.0,
        }
    }

    /// Whether the smooth solvers can run: `d = p = 2`, L2 norms and a
    /// quadratic seminorm on every penalized mode.
    pub fn check_smooth_quadratic(&self) -> Result<()> {
        if self.config.d != 2 || self.config.p != 2 {
            return Err(Error::Unsupported(format!(
                "gradients need d = p = 2, got d={} p={}",
                self.config.d, self.config.p
            )));
        }
        for (mode, s) in self.seminorms.iter().enumerate() {
            if self.config.alpha[mode] > 0.0 && s.as_ref().and_then(Seminorm::quadratic_form).is_none() {
                return Err(Error::Unsupported(format!("mode {mode} has a non-quadratic seminorm")));
            }
        }
        Ok(())
    }

    /// Quadratic form of mode `n` when it is penalized.
    pub(crate) fn quadratic(&self, mode: usize) -> Option<&Matrix> {
        if self.config.alpha[mode] > 0.0 {
            self.seminorms[mode].as_ref().and_then(Seminorm::quadratic_form)
        } else {
            None
        }
    }
}
