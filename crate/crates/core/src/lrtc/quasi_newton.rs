use std::collections::VecDeque;
use std::time::Instant;

use super::{check_inputs, init_factors, relative_change, IterationRecord, LrtcConfig, SolveReport};
use crate::error::Result;
use crate::kernels::{masked_loss_and_gradients, ObservedEntries, RowFactors};
use crate::regularizers::RegularizerSpec;
use crate::tensor::{DenseTensor, FactorSet, Matrix, ObservationMask};

const ARMIJO_C: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const MAX_TRIALS: usize = 30;

struct Problem<'a> {
    entries: ObservedEntries,
    dims: Vec<usize>,
    lambda: f64,
    spec: &'a RegularizerSpec,
}

impl Problem<'_> {
    fn unflatten(&self, x: &[f64], k: usize) -> FactorSet {
        let mut at = 0;
        let factors = self
            .dims
            .iter()
            .map(|&n| {
                let m = Matrix::from_column_slice(n, k, &x[at..at + n * k]);
                at += n * k;
                m
            })
            .collect();
        FactorSet::new(factors).expect("finite flattened factors")
    }

    /// Objective and (minimum-norm sub)gradient, flattened mode by mode.
    fn eval(&self, f: &FactorSet) -> (f64, Vec<f64>) {
        let rows = RowFactors::from_factors(f);
        let (mut value, grads) = masked_loss_and_gradients(&self.entries, &rows, &self.dims);
        let mut out = Vec::with_capacity(grads.iter().map(|g| g.len()).sum());
        for (j, mut g) in grads.into_iter().enumerate() {
            if self.lambda != 0.0 {
                value += self.lambda * self.spec.mode_value(j, f.factor(j));
                g += self.spec.mode_gradient(j, f.factor(j)) * self.lambda;
            }
            out.extend_from_slice(g.as_slice());
        }
        (value, out)
    }
}

fn flatten(f: &FactorSet) -> Vec<f64> {
    f.factors().iter().flat_map(|m| m.as_slice().iter().copied()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Two-loop recursion: returns `-H g` for the stored curvature pairs.
fn two_loop(g: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

struct Step {
    x: Vec<f64>,
    f: FactorSet,
    value: f64,
    grad: Vec<f64>,
}

fn line_search(
    p: &Problem<'_>,
    x: &[f64],
    k: usize,
    value: f64,
    grad: &[f64],
    dir: &[f64],
    initial: f64,
) -> Option<Step> {
    let slope = dot(grad, dir);
    if !(slope < 0.0) {
        return None;
    }
    let mut alpha = initial;
    for _ in 0..MAX_TRIALS {
        let cand: Vec<f64> = x.iter().zip(dir).map(|(xi, di)| xi + alpha * di).collect();
        if cand.iter().all(|v| v.is_finite()) {
            let f = p.unflatten(&cand, k);
            let (v, g) = p.eval(&f);
            if v.is_finite() && v <= value + ARMIJO_C * alpha * slope {
                return Some(Step { x: cand, f, value: v, grad: g });
            }
        }
        alpha *= SHRINK;
    }
    None
}

fn first_step(grad: &[f64]) -> f64 {
    let l1: f64 = grad.iter().map(|g| g.abs()).sum();
    if l1 > 0.0 {
        (1.0 / l1).min(1.0)
    } else {
        1.0
    }
}

/// Limited-memory quasi-Newton solve on all factor entries at once.
///
/// Directions come from the two-loop recursion over the last `qn_memory`
/// curvature pairs; step sizes from Armijo backtracking. When backtracking
/// fails along the quasi-Newton direction the memory is dropped and the
/// steepest descent direction is tried; if that fails too the solve stops.
/// After every step, components with a column norm below `prune_tol` in any
/// mode are removed and the memory is reset.
pub fn quasi_newton_solve(d: &DenseTensor, m: &ObservationMask, cfg: &LrtcConfig) -> Result<SolveReport> {
    check_inputs(d, m, cfg)?;
    let start = Instant::now();
    let p = Problem {
        entries: ObservedEntries::new(d, m),
        dims: d.shape().dims().to_vec(),
        lambda: cfg.lambda,
        spec: &cfg.spec,
    };
    let mut f = init_factors(d.shape(), cfg.k_init, cfg.rng_seed);
    let mut x = flatten(&f);
    let (mut value, mut grad) = p.eval(&f);
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.qn_memory);
    let mut trace = vec![IterationRecord { iter: 0, objective: value, rank: f.rank(), seconds: 0.0 }];
    let mut converged = false;
    let mut iterations = 0;

    for t in 1..=cfg.t_max {
        if f.rank() == 0 || norm(&grad) == 0.0 {
            converged = true;
            break;
        }
        iterations = t;
        let k = f.rank();
        let step = if memory.is_empty() {
            let dir: Vec<f64> = grad.iter().map(|g| -g).collect();
            line_search(&p, &x, k, value, &grad, &dir, first_step(&grad))
        } else {
            let dir = two_loop(&grad, &memory);
            line_search(&p, &x, k, value, &grad, &dir, 1.0).or_else(|| {
                memory.clear();
                let dir: Vec<f64> = grad.iter().map(|g| -g).collect();
                line_search(&p, &x, k, value, &grad, &dir, first_step(&grad))
            })
        };
        let Some(step) = step else {
            // no descent along steepest descent either
            converged = true;
            break;
        };

        let s: Vec<f64> = step.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = step.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * norm(&s) * norm(&y) {
            if memory.len() == cfg.qn_memory {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        let old_value = value;
        x = step.x;
        f = step.f;
        value = step.value;
        grad = step.grad;

        let mut keep = vec![true; f.rank()];
        for j in 0..f.order() {
            for (i, n) in f.column_norms(j).into_iter().enumerate() {
                if n < cfg.prune_tol {
                    keep[i] = false;
                }
            }
        }
        if keep.iter().any(|&k| !k) {
            f = f.retain_components(&keep);
            x = flatten(&f);
            (value, grad) = p.eval(&f);
            memory.clear();
        }

        trace.push(IterationRecord {
            iter: t,
            objective: value,
            rank: f.rank(),
            seconds: start.elapsed().as_secs_f64(),
        });
        if relative_change(old_value, value) < cfg.conv_tol {
            converged = true;
            break;
        }
    }
    Ok(SolveReport::finish(f, trace, iterations, start, converged))
}
