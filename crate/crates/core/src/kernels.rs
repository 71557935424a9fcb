// Sparse-entry kernels shared by the completion solvers. Work is proportional
// to |Omega| * k * d instead of the full tensor size.

use crate::tensor::{DenseTensor, FactorSet, Matrix, ObservationMask};

/// Observed values with their multi-indices, stored flat.
pub(crate) struct ObservedEntries {
    order: usize,
    idx: Vec<usize>,
    pub(crate) values: Vec<f64>,
}

impl ObservedEntries {
    pub(crate) fn new(d: &DenseTensor, m: &ObservationMask) -> Self {
        let order = d.shape().order();
        let mut idx = vec![0; order * m.count()];
        let mut values = Vec::with_capacity(m.count());
        for (e, &off) in m.offsets().iter().enumerate() {
            d.shape().index_into(off, &mut idx[e * order..(e + 1) * order]);
            values.push(d.data()[off]);
        }
        ObservedEntries { order, idx, values }
    }

    pub(crate) fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub(crate) fn index(&self, e: usize) -> &[usize] {
        &self.idx[e * self.order..(e + 1) * self.order]
    }
}

/// Row-major copies of the factors (`rows[m][i * k + c]`).
pub(crate) struct RowFactors {
    pub(crate) k: usize,
    pub(crate) rows: Vec<Vec<f64>>,
}

impl RowFactors {
    pub(crate) fn from_factors(f: &FactorSet) -> Self {
        let k = f.rank();
        let rows = f.factors().iter().map(to_row_major).collect();
        RowFactors { k, rows }
    }

    pub(crate) fn set_mode(&mut self, mode: usize, x: &Matrix) {
        self.rows[mode] = to_row_major(x);
    }

    #[inline]
    fn row(&self, mode: usize, i: usize) -> &[f64] {
        &self.rows[mode][i * self.k..(i + 1) * self.k]
    }

    /// Componentwise product of the rows of every mode except `skip`.
    #[inline]
    fn partial_product(&self, index: &[usize], skip: usize, out: &mut [f64]) {
        out.fill(1.0);
        for (m, &i) in index.iter().enumerate() {
            if m != skip {
                for (o, v) in out.iter_mut().zip(self.row(m, i)) {
                    *o *= v;
                }
            }
        }
    }

    #[inline]
    pub(crate) fn predict(&self, index: &[usize], scratch: &mut [f64]) -> f64 {
        self.partial_product(index, 0, scratch);
        scratch.iter().zip(self.row(0, index[0])).map(|(a, b)| a * b).sum()
    }
}

fn to_row_major(x: &Matrix) -> Vec<f64> {
    let (n, k) = x.shape();
    let mut out = vec![0.0; n * k];
    for c in 0..k {
        for r in 0..n {
            out[r * k + c] = x[(r, c)];
        }
    }
    out
}

fn from_row_major(n: usize, k: usize, data: &[f64]) -> Matrix {
    Matrix::from_fn(n, k, |r, c| data[r * k + c])
}

/// Squared masked residual norm (not halved).
pub(crate) fn masked_sq_residual(entries: &ObservedEntries, rows: &RowFactors) -> f64 {
    let mut scratch = vec![0.0; rows.k];
    (0..entries.len())
        .map(|e| {
            let r = entries.values[e] - rows.predict(entries.index(e), &mut scratch);
            r * r
        })
        .sum()
}

/// Gradient of ½‖M*(D - CP)‖² with respect to factor `mode`:
/// `-(M_(j) * (D_(j) - X^(j) KR^T)) KR`.
pub(crate) fn masked_mode_gradient(
    entries: &ObservedEntries,
    rows: &RowFactors,
    mode: usize,
    n_mode: usize,
) -> Matrix {
    let k = rows.k;
    let mut grad = vec![0.0; n_mode * k];
    let mut others = vec![0.0; k];
    for e in 0..entries.len() {
        let index = entries.index(e);
        rows.partial_product(index, mode, &mut others);
        let own = rows.row(mode, index[mode]);
        let pred: f64 = others.iter().zip(own).map(|(a, b)| a * b).sum();
        let r = entries.values[e] - pred;
        let g = &mut grad[index[mode] * k..(index[mode] + 1) * k];
        for (gc, o) in g.iter_mut().zip(&others) {
            *gc -= r * o;
        }
    }
    from_row_major(n_mode, k, &grad)
}

/// Loss and gradients for every mode at one point (Jacobi-style, as used by
/// the quasi-Newton path).
pub(crate) fn masked_loss_and_gradients(
    entries: &ObservedEntries,
    rows: &RowFactors,
    dims: &[usize],
) -> (f64, Vec<Matrix>) {
    let k = rows.k;
    let d = dims.len();
    let mut grads: Vec<Vec<f64>> = dims.iter().map(|&n| vec![0.0; n * k]).collect();
    let mut prefix = vec![0.0; (d + 1) * k];
    let mut suffix = vec![0.0; (d + 1) * k];
    let mut loss = 0.0;
    for e in 0..entries.len() {
        let index = entries.index(e);
        for c in 0..k {
            prefix[c] = 1.0;
            suffix[d * k + c] = 1.0;
        }
        for m in 0..d {
            let row = &rows.rows[m][index[m] * k..(index[m] + 1) * k];
            for c in 0..k {
                prefix[(m + 1) * k + c] = prefix[m * k + c] * row[c];
            }
        }
        for m in (0..d).rev() {
            let row = &rows.rows[m][index[m] * k..(index[m] + 1) * k];
            for c in 0..k {
                suffix[m * k + c] = suffix[(m + 1) * k + c] * row[c];
            }
        }
        let pred: f64 = prefix[d * k..(d + 1) * k].iter().sum();
        let r = entries.values[e] - pred;
        loss += r * r;
        for m in 0..d {
            let g = &mut grads[m][index[m] * k..(index[m] + 1) * k];
            for c in 0..k {
                g[c] -= r * prefix[m * k + c] * suffix[(m + 1) * k + c];
            }
        }
    }
    let mats = grads.iter().zip(dims).map(|(g, &n)| from_row_major(n, k, g)).collect();
    (0.5 * loss, mats)
}
