//! Dense N-way tensors and the multilinear kernels used by the solvers.
//!
//! Storage is row-major (last index fastest). Mode-n unfoldings follow the
//! Kolda–Bader convention: in `X_(n)` the column index of entry `i` is
//! `Σ_{k≠n} i_k · J_k` with `J_k = Π_{m<k, m≠n} I_m`, so the lowest remaining
//! mode varies fastest along a row.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, shape_mismatch, Error, Result};
use crate::math;

/// Dimensions `(I_1, …, I_N)` of a tensor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
}

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(invalid("a shape needs at least one mode"));
        }
        if dims.contains(&0) {
            return Err(invalid(format!("all dimensions must be positive, got {dims:?}")));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| invalid("number of entries overflows usize"))?;
        Ok(Shape { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of modes `N`.
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Number of entries `Π I_n`.
    pub fn num_entries(&self) -> usize {
        self.dims.iter().product()
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.dims.len()];
        for n in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[n] = strides[n + 1] * self.dims[n + 1];
        }
        strides
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dims.len());
        index
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    /// Visits every multi-index in storage order.
    pub fn for_each_index(&self, mut f: impl FnMut(usize, &[usize])) {
        let mut index = vec![0usize; self.dims.len()];
        let total = self.num_entries();
        for flat in 0..total {
            f(flat, &index);
            for n in (0..index.len()).rev() {
                index[n] += 1;
                if index[n] < self.dims[n] {
                    break;
                }
                index[n] = 0;
            }
        }
    }
}

/// Row-major dense real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape_mismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(shape_mismatch("columns have different lengths"));
        }
        Ok(Matrix::from_fn(rows, cols, |i, j| columns[j][i]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        debug_assert_eq!(values.len(), self.rows);
        for (i, &v) in values.iter().enumerate() {
            self.data[i * self.cols + j] = v;
        }
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(shape_mismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `vᵀ · self · v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        dot(v, &self.mul_vec(v))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| f64::max(acc, math::abs(a - b)))
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    math::sqrt(dot(a, a))
}

/// Dense real tensor with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    values: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.num_entries() {
            return Err(shape_mismatch(format!(
                "{} values for shape {:?}",
                values.len(),
                shape.dims()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(DenseTensor { shape, values })
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        let n = shape.num_entries();
        DenseTensor { shape, values: vec![value; n] }
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn ones(shape: Shape) -> Self {
        Self::filled(shape, 1.0)
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(shape.num_entries());
        shape.for_each_index(|_, idx| values.push(f(idx)));
        Self::new(shape, values)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.values[self.shape.flat_index(index)]
    }

    #[cfg(test)]
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub(crate) fn from_raw(shape: Shape, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), shape.num_entries());
        DenseTensor { shape, values }
    }

    fn check_same_shape(&self, other: &DenseTensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(shape_mismatch(format!(
                "{:?} vs {:?}",
                self.shape.dims(),
                other.shape.dims()
            )));
        }
        Ok(())
    }

    /// Entrywise product.
    pub fn hadamard(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.check_same_shape(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        DenseTensor::new(self.shape.clone(), values)
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.check_same_shape(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        DenseTensor::new(self.shape.clone(), values)
    }

    pub fn scale(&self, c: f64) -> Result<DenseTensor> {
        DenseTensor::new(self.shape.clone(), self.values.iter().map(|v| v * c).collect())
    }

    pub fn frobenius_inner(&self, other: &DenseTensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(dot(&self.values, &other.values))
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.values)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Mode-`n` unfolding (0-based mode) as an `I_n × Π_{m≠n} I_m` matrix.
    pub fn unfold(&self, n: usize) -> Result<Matrix> {
        let dims = self.dims();
        if n >= dims.len() {
            return Err(Error::ModeOutOfRange { mode: n, order: dims.len() });
        }
        let col_strides = unfolding_strides(dims, n);
        let cols = self.shape.num_entries() / dims[n];
        let mut out = Matrix::zeros(dims[n], cols);
        self.shape.for_each_index(|flat, idx| {
            let col: usize = idx.iter().zip(&col_strides).map(|(i, s)| i * s).sum();
            out[(idx[n], col)] = self.values[flat];
        });
        Ok(out)
    }

    /// Inverse of [`DenseTensor::unfold`].
    pub fn fold(matrix: &Matrix, n: usize, shape: &Shape) -> Result<DenseTensor> {
        let dims = shape.dims();
        if n >= dims.len() {
            return Err(Error::ModeOutOfRange { mode: n, order: dims.len() });
        }
        let cols = shape.num_entries() / dims[n];
        if matrix.rows() != dims[n] || matrix.cols() != cols {
            return Err(shape_mismatch(format!(
                "{}x{} matrix cannot fold into mode {n} of {:?}",
                matrix.rows(),
                matrix.cols(),
                dims
            )));
        }
        let col_strides = unfolding_strides(dims, n);
        let mut values = vec![0.0; shape.num_entries()];
        shape.for_each_index(|flat, idx| {
            let col: usize = idx.iter().zip(&col_strides).map(|(i, s)| i * s).sum();
            values[flat] = matrix[(idx[n], col)];
        });
        DenseTensor::new(shape.clone(), values)
    }
}

/// Column strides of the Kolda–Bader unfolding; zero for mode `n` itself.
fn unfolding_strides(dims: &[usize], n: usize) -> Vec<usize> {
    let mut strides = vec![0usize; dims.len()];
    let mut acc = 1;
    for (k, &d) in dims.iter().enumerate() {
        if k != n {
            strides[k] = acc;
            acc *= d;
        }
    }
    strides
}

/// Outer product `a^(1) ∘ … ∘ a^(N)`.
pub fn outer_rank_one(vectors: &[&[f64]]) -> Result<DenseTensor> {
    if vectors.is_empty() {
        return Err(shape_mismatch("outer product of an empty list"));
    }
    let shape = Shape::new(vectors.iter().map(|v| v.len()).collect())?;
    let mut values = vec![1.0; shape.num_entries()];
    accumulate_rank_one(&mut values, shape.dims(), vectors, 1.0, true);
    DenseTensor::new(shape, values)
}

/// `out += scale · (v_1 ∘ … ∘ v_N)`, or overwrites when `assign` is set.
///
/// Walks the row-major layout one innermost fiber at a time.
pub(crate) fn accumulate_rank_one(
    out: &mut [f64],
    dims: &[usize],
    vectors: &[&[f64]],
    scale: f64,
    assign: bool,
) {
    let order = dims.len();
    let last = dims[order - 1];
    let inner = vectors[order - 1];
    let mut prefix = vec![0usize; order - 1];
    let mut offset = 0;
    loop {
        let mut coef = scale;
        for (m, &i) in prefix.iter().enumerate() {
            coef *= vectors[m][i];
        }
        let fiber = &mut out[offset..offset + last];
        if assign {
            for (o, &v) in fiber.iter_mut().zip(inner) {
                *o = coef * v;
            }
        } else if coef != 0.0 {
            for (o, &v) in fiber.iter_mut().zip(inner) {
                *o += coef * v;
            }
        }
        offset += last;
        let mut m = order - 1;
        loop {
            if m == 0 {
                return;
            }
            m -= 1;
            prefix[m] += 1;
            if prefix[m] < dims[m] {
                break;
            }
            prefix[m] = 0;
        }
    }
}

/// Khatri–Rao product of all matrices except `skip`, ordered to match
/// [`DenseTensor::unfold`]: `reconstruct(A)_(n) = A^(n) · khatri_rao(A, Some(n))ᵀ`.
pub fn khatri_rao(matrices: &[Matrix], skip: Option<usize>) -> Result<Matrix> {
    let rank = matrices
        .first()
        .map(Matrix::cols)
        .ok_or_else(|| shape_mismatch("Khatri-Rao product of an empty list"))?;
    if matrices.iter().any(|m| m.cols() != rank) {
        return Err(shape_mismatch("matrices have different column counts"));
    }
    if let Some(s) = skip {
        if s >= matrices.len() {
            return Err(Error::ModeOutOfRange { mode: s, order: matrices.len() });
        }
    }
    let kept: Vec<&Matrix> =
        matrices.iter().enumerate().filter(|(k, _)| Some(*k) != skip).map(|(_, m)| m).collect();
    let rows: usize = kept.iter().map(|m| m.rows()).product();
    let mut out = Matrix::zeros(rows, rank);
    let mut index = vec![0usize; kept.len()];
    for row in 0..rows {
        for r in 0..rank {
            out[(row, r)] = kept.iter().zip(&index).map(|(m, &i)| m[(i, r)]).product();
        }
        // first kept matrix varies fastest
        for (k, m) in kept.iter().enumerate() {
            index[k] += 1;
            if index[k] < m.rows() {
                break;
            }
            index[k] = 0;
        }
    }
    Ok(out)
}

/// Matricized tensor times Khatri–Rao product, `X_(n) · khatri_rao(factors, Some(n))`,
/// computed without forming either operand.
pub fn mttkrp(tensor: &DenseTensor, factors: &[Matrix], n: usize) -> Result<Matrix> {
    let dims = tensor.dims();
    if factors.len() != dims.len() {
        return Err(shape_mismatch("one factor per mode is required"));
    }
    if n >= dims.len() {
        return Err(Error::ModeOutOfRange { mode: n, order: dims.len() });
    }
    let rank = factors[0].cols();
    for (m, f) in factors.iter().enumerate() {
        if f.rows() != dims[m] || f.cols() != rank {
            return Err(shape_mismatch(format!("factor {m} does not match the tensor")));
        }
    }
    let mut out = Matrix::zeros(dims[n], rank);
    let mut coef = vec![0.0; rank];
    let values = tensor.values();
    tensor.shape().for_each_index(|flat, idx| {
        let x = values[flat];
        if x == 0.0 {
            return;
        }
        coef.iter_mut().for_each(|c| *c = x);
        for (m, f) in factors.iter().enumerate() {
            if m == n {
                continue;
            }
            for (c, &a) in coef.iter_mut().zip(f.row(idx[m])) {
                *c *= a;
            }
        }
        let row = idx[n];
        for (r, c) in coef.iter().enumerate() {
            out[(row, r)] += c;
        }
    });
    Ok(out)
}

/// Non-negative weights; zero marks a missing entry.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMask(DenseTensor);

impl WeightMask {
    pub fn new(weights: DenseTensor) -> Result<Self> {
        if weights.values().iter().any(|&w| w < 0.0) {
            return Err(invalid("weights must be non-negative"));
        }
        Ok(WeightMask(weights))
    }

    /// Fully observed mask.
    pub fn ones(shape: Shape) -> Self {
        WeightMask(DenseTensor::ones(shape))
    }

    /// Binary mask from an observed-predicate over flat indices.
    pub fn from_observed(shape: Shape, mut observed: impl FnMut(usize) -> bool) -> Self {
        let values = (0..shape.num_entries()).map(|i| if observed(i) { 1.0 } else { 0.0 }).collect();
        WeightMask(DenseTensor::from_raw(shape, values))
    }

    pub fn tensor(&self) -> &DenseTensor {
        &self.0
    }

    pub fn shape(&self) -> &Shape {
        self.0.shape()
    }

    pub fn dims(&self) -> &[usize] {
        self.0.dims()
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn is_observed(&self, flat: usize) -> bool {
        self.0.values()[flat] > 0.0
    }

    pub fn observed_count(&self) -> usize {
        self.0.values().iter().filter(|&&w| w > 0.0).count()
    }

    /// `self ⊛ other`.
    pub fn restrict(&self, other: &WeightMask) -> Result<WeightMask> {
        Ok(WeightMask(self.0.hadamard(&other.0)?))
    }

    /// Entrywise squared weights, as used by the gradient of `‖W ⊛ E‖²`.
    pub fn squared(&self) -> Vec<f64> {
        self.0.values().iter().map(|w| w * w).collect()
    }
}
