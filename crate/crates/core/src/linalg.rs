//! Small dense linear-algebra helpers: spectral norm estimation, Khatri-Rao
//! Gram matrices and symmetric positive-definite solves.

use nalgebra::Cholesky;
use rand_distr::{Distribution, StandardNormal};

use crate::tensor::{rng_from_seed, FactorSet, Matrix};

/// Default relative tolerance for [`spectral_norm_est`].
pub const SPECTRAL_TOL: f64 = 1e-6;
/// Default iteration cap for [`spectral_norm_est`].
pub const SPECTRAL_MAX_ITERS: usize = 500;
const START_SEED: u64 = 0x005e_ed0f_5eed;

/// Result of a power-iteration spectral norm estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    /// Estimated largest singular value (best iterate when not converged).
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Estimates `‖m‖₂` by power iteration on `mᵀm` from a fixed seeded start.
pub fn spectral_norm_est(m: &Matrix, tol: f64, max_iters: usize) -> SpectralEstimate {
    let gram = m.transpose() * m;
    let est = gram_top_eigenvalue(&gram, tol, max_iters);
    SpectralEstimate { value: est.value.max(0.0).sqrt(), ..est }
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
///
/// Stops when the eigen-residual `‖G v − θ v‖` drops below `tol·θ`.
pub(crate) fn gram_top_eigenvalue(g: &Matrix, tol: f64, max_iters: usize) -> SpectralEstimate {
    let k = g.nrows();
    if k == 0 {
        return SpectralEstimate { value: 0.0, iterations: 0, converged: true };
    }
    let mut rng = rng_from_seed(START_SEED);
    let mut v = nalgebra::DVector::from_fn(k, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z
    });
    v /= v.norm();
    let mut best = 0.0;
    for it in 1..=max_iters {
        let w = g * &v;
        let theta = v.dot(&w);
        best = f64::max(best, theta);
        let wn = w.norm();
        if wn == 0.0 {
            return SpectralEstimate { value: 0.0, iterations: it, converged: true };
        }
        let resid = (&w - &v * theta).norm();
        if resid <= tol * theta.abs() {
            return SpectralEstimate { value: theta, iterations: it, converged: true };
        }
        v = w / wn;
    }
    SpectralEstimate { value: best, iterations: max_iters, converged: false }
}

/// `KRᵀKR` for `KR = khatri_rao(f, skip)`, computed as the Hadamard product
/// of the other factors' Gram matrices.
pub fn khatri_rao_gram(f: &FactorSet, skip: usize) -> Matrix {
    let k = f.rank();
    let mut g = Matrix::from_element(k, k, 1.0);
    for (m, x) in f.factors().iter().enumerate() {
        if m != skip {
            g.component_mul_assign(&(x.transpose() * x));
        }
    }
    g
}

/// `‖khatri_rao(f, skip)‖₂²` with the default tolerances.
pub fn khatri_rao_spectral_sq(f: &FactorSet, skip: usize) -> f64 {
    gram_top_eigenvalue(&khatri_rao_gram(f, skip), SPECTRAL_TOL, SPECTRAL_MAX_ITERS).value.max(0.0)
}

/// Solves `X A = R` for symmetric positive (semi)definite `A` (`k x k`).
///
/// Uses a Cholesky factorization; if `A` is numerically singular a growing
/// diagonal jitter is added until the factorization succeeds.
pub fn solve_spd_right(r: &Matrix, a: &Matrix) -> Matrix {
    let k = a.nrows();
    if k == 0 {
        return Matrix::zeros(r.nrows(), 0);
    }
    let scale = (a.trace() / k as f64).abs().max(f64::MIN_POSITIVE);
    let mut jitter = 0.0;
    loop {
        let mut aj = a.clone();
        for i in 0..k {
            aj[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(aj) {
            return ch.solve(&r.transpose()).transpose();
        }
        jitter = if jitter == 0.0 { scale * 1e-14 } else { jitter * 10.0 };
    }
}
