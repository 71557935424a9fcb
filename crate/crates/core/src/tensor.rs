//! Dense tensors, CP factor sets and observation masks.
//!
//! Storage is first-index-fastest: the multi-index `(i_0, .., i_{d-1})` lives
//! at offset `i_0 + n_0*i_1 + n_0*n_1*i_2 + ...`. Modes are zero-based
//! throughout the API. Mode-`j` unfoldings place `i_j` on the rows and
//! enumerate the remaining modes along the columns with the smallest mode
//! varying fastest, which is the convention of Kolda and Bader. With this
//! layout the mode-0 unfolding, read column-major, is exactly the tensor's
//! own data vector.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{EnrError, Result};

/// Dense real matrix used for factors, unfoldings and Khatri-Rao products.
pub type Matrix = DMatrix<f64>;

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dimensions `n_0 .. n_{d-1}` of an order-`d` tensor, `d >= 2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
    len: usize,
}

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(EnrError::InvalidShape(format!("order must be at least 2, got {}", dims.len())));
        }
        if dims.contains(&0) {
            return Err(EnrError::InvalidShape(format!("zero dimension in {dims:?}")));
        }
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| EnrError::InvalidShape(format!("{dims:?} overflows usize")))?;
        Ok(Shape { dims, len })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Total number of entries.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(EnrError::ModeOutOfRange { mode, order: self.order() });
        }
        Ok(())
    }

    /// Linear offset of a multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.order());
        let mut off = 0;
        let mut stride = 1;
        for (&i, &n) in index.iter().zip(&self.dims) {
            debug_assert!(i < n);
            off += i * stride;
            stride *= n;
        }
        off
    }

    /// Writes the multi-index of `offset` into `out`.
    pub fn index_into(&self, mut offset: usize, out: &mut [usize]) {
        for (slot, &n) in out.iter_mut().zip(&self.dims) {
            *slot = offset % n;
            offset /= n;
        }
    }

    pub fn index_of(&self, offset: usize) -> Vec<usize> {
        let mut out = vec![0; self.order()];
        self.index_into(offset, &mut out);
        out
    }

    /// Product of all dimensions except `mode`.
    pub fn len_without(&self, mode: usize) -> usize {
        self.len / self.dims[mode]
    }

    fn require_same(&self, other: &Shape) -> Result<()> {
        if self != other {
            return Err(EnrError::ShapeMismatch { expected: self.dims.clone(), actual: other.dims.clone() });
        }
        Ok(())
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|n| n.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

/// Order-`d` real tensor with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(EnrError::DimensionMismatch(format!(
                "shape {shape} needs {} entries, got {}",
                shape.len(),
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(EnrError::NonFinite(pos));
        }
        Ok(DenseTensor { shape, data })
    }

    /// Skips the finiteness scan; callers guarantee finite data of the right length.
    pub(crate) fn from_raw(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), shape.len());
        DenseTensor { shape, data }
    }

    pub fn zeros(shape: Shape) -> Self {
        let data = vec![0.0; shape.len()];
        DenseTensor { shape, data }
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut idx = vec![0; shape.order()];
        let data = (0..shape.len())
            .map(|off| {
                shape.index_into(off, &mut idx);
                f(&idx)
            })
            .collect();
        DenseTensor::new(shape, data)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.shape.offset(index)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<DenseTensor> {
        DenseTensor::new(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, c: f64) -> Result<DenseTensor> {
        self.map(|v| c * v)
    }

    fn zip_with(&self, other: &DenseTensor, f: impl Fn(f64, f64) -> f64) -> Result<DenseTensor> {
        self.shape.require_same(&other.shape)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        DenseTensor::new(self.shape.clone(), data)
    }

    pub fn add(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Population standard deviation of the entries (divisor `N`).
    pub fn std_dev(&self) -> f64 {
        let n = self.data.len() as f64;
        let mean = self.data.iter().sum::<f64>() / n;
        (self.data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
    }
}

/// CP factors `X^(0) .. X^(d-1)`, matrix `j` of size `n_j x k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    factors: Vec<Matrix>,
}

impl FactorSet {
    pub fn new(factors: Vec<Matrix>) -> Result<Self> {
        if factors.len() < 2 {
            return Err(EnrError::InvalidShape(format!("need at least 2 factors, got {}", factors.len())));
        }
        let k = factors[0].ncols();
        for (j, f) in factors.iter().enumerate() {
            if f.ncols() != k {
                return Err(EnrError::InconsistentRank(format!(
                    "factor 0 has {k} columns, factor {j} has {}",
                    f.ncols()
                )));
            }
            if f.nrows() == 0 {
                return Err(EnrError::InvalidShape(format!("factor {j} has no rows")));
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(EnrError::Numeric(format!("factor {j} has non-finite entries")));
            }
        }
        Ok(FactorSet { factors })
    }

    pub fn zeros(shape: &Shape, k: usize) -> Self {
        FactorSet { factors: shape.dims().iter().map(|&n| Matrix::zeros(n, k)).collect() }
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    /// Shared column count `k`.
    pub fn rank(&self) -> usize {
        self.factors[0].ncols()
    }

    pub fn factor(&self, mode: usize) -> &Matrix {
        &self.factors[mode]
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub fn into_factors(self) -> Vec<Matrix> {
        self.factors
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.dims()).expect("factor rows are validated on construction")
    }

    /// Replaces one factor, keeping the rank consistent.
    pub fn with_factor(&self, mode: usize, m: Matrix) -> Result<FactorSet> {
        let mut factors = self.factors.clone();
        if mode >= factors.len() {
            return Err(EnrError::ModeOutOfRange { mode, order: factors.len() });
        }
        if m.nrows() != factors[mode].nrows() {
            return Err(EnrError::DimensionMismatch(format!(
                "mode {mode} factor needs {} rows, got {}",
                factors[mode].nrows(),
                m.nrows()
            )));
        }
        factors[mode] = m;
        FactorSet::new(factors)
    }

    pub(crate) fn set_factor(&mut self, mode: usize, m: Matrix) {
        debug_assert_eq!(m.nrows(), self.factors[mode].nrows());
        debug_assert_eq!(m.ncols(), self.rank());
        self.factors[mode] = m;
    }

    /// Euclidean norms of the columns of factor `mode`.
    pub fn column_norms(&self, mode: usize) -> Vec<f64> {
        column_norms(&self.factors[mode])
    }

    /// Keeps the components whose flag is true, in every mode.
    pub fn retain_components(&self, keep: &[bool]) -> FactorSet {
        debug_assert_eq!(keep.len(), self.rank());
        FactorSet { factors: self.factors.iter().map(|f| select_columns(f, keep)).collect() }
    }

    /// Total squared Frobenius norm of all factors.
    pub fn squared_norm(&self) -> f64 {
        self.factors.iter().map(|f| f.norm_squared()).sum()
    }
}

pub(crate) fn column_norms(m: &Matrix) -> Vec<f64> {
    m.column_iter().map(|c| c.norm()).collect()
}

pub(crate) fn select_columns(m: &Matrix, keep: &[bool]) -> Matrix {
    let cols: Vec<usize> = keep.iter().enumerate().filter_map(|(i, &k)| k.then_some(i)).collect();
    Matrix::from_fn(m.nrows(), cols.len(), |r, c| m[(r, cols[c])])
}

/// Sorted, duplicate-free set of observed linear offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationMask {
    shape: Shape,
    offsets: Vec<usize>,
}

impl ObservationMask {
    /// Builds a mask from linear offsets. Offsets are sorted; duplicates and
    /// out-of-range offsets are rejected.
    pub fn from_offsets(shape: Shape, mut offsets: Vec<usize>) -> Result<Self> {
        offsets.sort_unstable();
        if let Some(&last) = offsets.last() {
            if last >= shape.len() {
                return Err(EnrError::DimensionMismatch(format!(
                    "offset {last} out of range for shape {shape}"
                )));
            }
        }
        if offsets.windows(2).any(|w| w[0] == w[1]) {
            return Err(EnrError::param("duplicate offsets in observation mask"));
        }
        Ok(ObservationMask { shape, offsets })
    }

    pub fn from_indices(shape: Shape, indices: &[Vec<usize>]) -> Result<Self> {
        let mut offsets = Vec::with_capacity(indices.len());
        for idx in indices {
            if idx.len() != shape.order() || idx.iter().zip(shape.dims()).any(|(&i, &n)| i >= n) {
                return Err(EnrError::DimensionMismatch(format!(
                    "index {idx:?} out of range for shape {shape}"
                )));
            }
            offsets.push(shape.offset(idx));
        }
        ObservationMask::from_offsets(shape, offsets)
    }

    pub fn full(shape: Shape) -> Self {
        let offsets = (0..shape.len()).collect();
        ObservationMask { shape, offsets }
    }

    pub fn empty(shape: Shape) -> Self {
        ObservationMask { shape, offsets: Vec::new() }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// `|Omega|`.
    pub fn count(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn contains(&self, offset: usize) -> bool {
        self.offsets.binary_search(&offset).is_ok()
    }

    /// The unobserved offsets, ascending.
    pub fn complement(&self) -> ObservationMask {
        let mut out = Vec::with_capacity(self.shape.len() - self.count());
        let mut it = self.offsets.iter().peekable();
        for off in 0..self.shape.len() {
            if it.peek() == Some(&&off) {
                it.next();
            } else {
                out.push(off);
            }
        }
        ObservationMask { shape: self.shape.clone(), offsets: out }
    }

    /// Binary indicator tensor with ones on observed entries.
    pub fn indicator(&self) -> DenseTensor {
        let mut data = vec![0.0; self.shape.len()];
        for &off in &self.offsets {
            data[off] = 1.0;
        }
        DenseTensor::from_raw(self.shape.clone(), data)
    }
}

/// Mode-`mode` matricization, `n_mode x prod_{i != mode} n_i`.
pub fn unfold(t: &DenseTensor, mode: usize) -> Result<Matrix> {
    let shape = t.shape();
    shape.check_mode(mode)?;
    let dims = shape.dims();
    let n = dims[mode];
    let lo: usize = dims[..mode].iter().product();
    let hi: usize = dims[mode + 1..].iter().product();
    let data = t.data();
    let mut m = Matrix::zeros(n, lo * hi);
    for u in 0..hi {
        for i in 0..n {
            let base = lo * i + lo * n * u;
            for l in 0..lo {
                m[(i, l + lo * u)] = data[base + l];
            }
        }
    }
    Ok(m)
}

/// Inverse of [`unfold`].
pub fn fold(m: &Matrix, mode: usize, shape: &Shape) -> Result<DenseTensor> {
    shape.check_mode(mode)?;
    let dims = shape.dims();
    let n = dims[mode];
    if m.nrows() != n || m.ncols() != shape.len_without(mode) {
        return Err(EnrError::DimensionMismatch(format!(
            "mode-{mode} unfolding of {shape} is {}x{}, got {}x{}",
            n,
            shape.len_without(mode),
            m.nrows(),
            m.ncols()
        )));
    }
    let lo: usize = dims[..mode].iter().product();
    let hi: usize = dims[mode + 1..].iter().product();
    let mut data = vec![0.0; shape.len()];
    for u in 0..hi {
        for i in 0..n {
            let base = lo * i + lo * n * u;
            for l in 0..lo {
                data[base + l] = m[(i, l + lo * u)];
            }
        }
    }
    DenseTensor::new(shape.clone(), data)
}

/// Column-wise Kronecker product `A ⊙ B`; row `a * rows(B) + b`.
pub fn khatri_rao_pair(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.ncols() != b.ncols() {
        return Err(EnrError::InconsistentRank(format!("{} vs {} columns", a.ncols(), b.ncols())));
    }
    let nb = b.nrows();
    Ok(Matrix::from_fn(a.nrows() * nb, a.ncols(), |r, c| a[(r / nb, c)] * b[(r % nb, c)]))
}

/// `X^(d-1) ⊙ .. ⊙ X^(skip+1) ⊙ X^(skip-1) ⊙ .. ⊙ X^(0)`.
///
/// Row ordering matches the columns of [`unfold`], so
/// `unfold(cp_reconstruct(f), j) == X^(j) * khatri_rao(f, j)^T`.
pub fn khatri_rao(f: &FactorSet, skip: usize) -> Result<Matrix> {
    if skip >= f.order() {
        return Err(EnrError::ModeOutOfRange { mode: skip, order: f.order() });
    }
    let k = f.rank();
    let mut acc = Matrix::from_element(1, k, 1.0);
    for (m, x) in f.factors().iter().enumerate() {
        if m == skip {
            continue;
        }
        let len = acc.nrows();
        let n = x.nrows();
        // earlier modes vary fastest
        acc = Matrix::from_fn(len * n, k, |r, c| acc[(r % len, c)] * x[(r / len, c)]);
    }
    Ok(acc)
}

/// Sum of the `k` rank-one outer products held by `f`.
pub fn cp_reconstruct(f: &FactorSet) -> DenseTensor {
    let shape = f.shape();
    let kr = khatri_rao(f, 0).expect("mode 0 always exists");
    let m = f.factor(0) * kr.transpose();
    // mode-0 unfolding stored column-major is the first-index-fastest layout
    DenseTensor::from_raw(shape, m.as_slice().to_vec())
}

/// Residual `M * (D - CP(f))` (zero off the mask) and its squared Frobenius norm.
///
/// The squared norm is not halved.
pub fn masked_residual(d: &DenseTensor, f: &FactorSet, m: &ObservationMask) -> Result<(DenseTensor, f64)> {
    d.shape().require_same(m.shape())?;
    let fs = f.shape();
    d.shape().require_same(&fs)?;
    let entries = crate::kernels::ObservedEntries::new(d, m);
    let rows = crate::kernels::RowFactors::from_factors(f);
    let mut data = vec![0.0; d.shape().len()];
    let mut value = 0.0;
    let mut scratch = vec![0.0; f.rank()];
    for (e, &off) in m.offsets().iter().enumerate() {
        let r = entries.values[e] - rows.predict(entries.index(e), &mut scratch);
        data[off] = r;
        value += r * r;
    }
    Ok((DenseTensor::from_raw(d.shape().clone(), data), value))
}

/// Draws `count` distinct offsets from `0..total` by a partial Fisher-Yates
/// shuffle that only stores displaced slots.
pub(crate) fn sample_offsets(total: usize, count: usize, rng: &mut impl Rng) -> Vec<usize> {
    debug_assert!(count <= total);
    let mut displaced: HashMap<usize, usize> = HashMap::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let j = rng.random_range(i..total);
        let at_i = *displaced.get(&i).unwrap_or(&i);
        let at_j = *displaced.get(&j).unwrap_or(&j);
        displaced.insert(j, at_i);
        out.push(at_j);
    }
    out
}

/// Uniformly samples `round((1 - missing_rate) * N)` observed entries
/// without replacement.
pub fn sample_mask(shape: &Shape, missing_rate: f64, seed: u64) -> Result<ObservationMask> {
    if !(0.0..1.0).contains(&missing_rate) {
        return Err(EnrError::param(format!("missing rate must lie in [0, 1), got {missing_rate}")));
    }
    let total = shape.len();
    let count = (((1.0 - missing_rate) * total as f64).round() as usize).min(total);
    let mut rng = rng_from_seed(seed);
    let offsets = sample_offsets(total, count, &mut rng);
    ObservationMask::from_offsets(shape.clone(), offsets)
}
