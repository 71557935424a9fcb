#![allow(dead_code)]

use cp_enr::{FactorSet, Matrix, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn shape(dims: &[usize]) -> Shape {
    Shape::new(dims.to_vec()).unwrap()
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, n: usize, k: usize, scale: f64) -> Matrix {
    Matrix::from_fn(n, k, |_, _| rng.random_range(-scale..scale))
}

pub fn random_factors(rng: &mut ChaCha8Rng, dims: &[usize], k: usize) -> FactorSet {
    FactorSet::new(dims.iter().map(|&n| uniform_matrix(rng, n, k, 1.0)).collect()).unwrap()
}

/// Minimizes a unimodal function on `[lo, hi]` by golden-section search.
pub fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..iters {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Global 1-D minimizer: dense grid, then golden-section around the best
/// grid cell.
pub fn grid_then_golden(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> f64 {
    let h = (hi - lo) / points as f64;
    let mut best = (f(lo), lo);
    for i in 1..=points {
        let x = lo + h * i as f64;
        let v = f(x);
        if v < best.0 {
            best = (v, x);
        }
    }
    let x = golden(&f, (best.1 - h).max(lo), (best.1 + h).min(hi), 100);
    if f(x) < best.0 {
        x
    } else {
        best.1
    }
}

pub fn median(v: &[usize]) -> f64 {
    let mut v = v.to_vec();
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}

/// Minimizer of `f` over the box `[lo, hi]²`, by a global 1-D search on the
/// outer coordinate of the inner minimum.
pub fn min_2d(f: impl Fn(f64, f64) -> f64, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let inner = |a: f64| grid_then_golden(|b| f(a, b), lo, hi, points);
    let a = grid_then_golden(|a| f(a, inner(a)), lo, hi, points);
    (a, inner(a))
}

/// Central finite-difference gradient of `f` at `x`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut x = x.to_vec();
    (0..x.len())
        .map(|i| {
            let x0 = x[i];
            x[i] = x0 + h;
            let up = f(&x);
            x[i] = x0 - h;
            let down = f(&x);
            x[i] = x0;
            (up - down) / (2.0 * h)
        })
        .collect()
}
