use std::time::Instant;

use super::{
    check_inputs, estimate_lipschitz, eval_objective, extrapolation_weight, init_factors, prox_mode,
    relative_change, IterationRecord, LrtcConfig, SolveReport,
};
use crate::error::Result;
use crate::kernels::{masked_mode_gradient, ObservedEntries, RowFactors};
use crate::tensor::{DenseTensor, FactorSet, ObservationMask};

// doublings tried by the descent safeguard before keeping the previous iterate
const SAFEGUARD_DOUBLINGS: usize = 40;

struct Sweep {
    factors: FactorSet,
    lipschitz: Vec<f64>,
}

struct State<'a> {
    entries: ObservedEntries,
    cfg: &'a LrtcConfig,
    dims: Vec<usize>,
}

impl State<'_> {
    fn objective(&self, f: &FactorSet) -> f64 {
        let rows = RowFactors::from_factors(f);
        eval_objective(&self.entries, &rows, f, self.cfg.lambda, &self.cfg.spec)
    }

    /// One Gauss-Seidel pass over the modes.
    fn sweep(
        &self,
        cur: &FactorSet,
        prev: &FactorSet,
        history: &[[f64; 2]],
        t: usize,
        l_scale: f64,
        extrapolate: bool,
    ) -> Result<Sweep> {
        let mut x = cur.clone();
        let mut rows = RowFactors::from_factors(&x);
        let mut lipschitz = Vec::with_capacity(self.dims.len());
        for (j, &n) in self.dims.iter().enumerate() {
            let omega = if extrapolate {
                extrapolation_weight(history[j][0], history[j][1], t, self.cfg.delta)
            } else {
                0.0
            };
            let x_hat = if omega > 0.0 {
                cur.factor(j) + (cur.factor(j) - prev.factor(j)) * omega
            } else {
                cur.factor(j).clone()
            };
            // KR excludes mode j: modes < j are already updated
            let l_est = estimate_lipschitz(&x, j, self.entries.len(), self.cfg.rho);
            let l = l_est * l_scale;
            rows.set_mode(j, &x_hat);
            let grad = masked_mode_gradient(&self.entries, &rows, j, n);
            let g = &x_hat - grad / l;
            let next = prox_mode(&self.cfg.spec, j, &g, l, self.cfg.lambda, self.cfg)?;
            rows.set_mode(j, &next);
            x.set_factor(j, next);
            lipschitz.push(l_est);
        }
        Ok(Sweep { factors: x, lipschitz })
    }
}

fn zero_component_mask(f: &FactorSet) -> Vec<bool> {
    let mut keep = vec![true; f.rank()];
    for j in 0..f.order() {
        for (i, n) in f.column_norms(j).into_iter().enumerate() {
            if n == 0.0 {
                keep[i] = false;
            }
        }
    }
    keep
}

/// Block coordinate descent with extrapolation.
///
/// Each iteration visits the modes in order: extrapolate the factor, take a
/// gradient step of size `1/L̂` on the masked loss and apply the mode's
/// proximal operator. Components whose column is zero in any mode are then
/// removed from every mode. If a sweep increases the objective it is redone
/// without extrapolation and with `L̂` doubled until it does not; if no
/// doubling helps the previous iterate is kept and the solve stops.
pub fn bcde_solve(d: &DenseTensor, m: &ObservationMask, cfg: &LrtcConfig) -> Result<SolveReport> {
    check_inputs(d, m, cfg)?;
    let start = Instant::now();
    let state = State { entries: ObservedEntries::new(d, m), cfg, dims: d.shape().dims().to_vec() };
    let order = state.dims.len();
    let mut cur = init_factors(d.shape(), cfg.k_init, cfg.rng_seed);
    let mut prev = cur.clone();
    let mut history = vec![[0.0f64; 2]; order];
    let mut obj = state.objective(&cur);
    let data_scale = state.entries.values.iter().map(|v| v * v).sum::<f64>();
    let mut trace = vec![IterationRecord { iter: 0, objective: obj, rank: cur.rank(), seconds: 0.0 }];
    let mut converged = false;
    let mut iterations = 0;

    for t in 1..=cfg.t_max {
        if cur.rank() == 0 {
            converged = true;
            break;
        }
        iterations = t;
        let mut sweep = state.sweep(&cur, &prev, &history, t, 1.0, cfg.delta > 0.0)?;
        let mut new_obj = state.objective(&sweep.factors);
        let mut stalled = false;
        if !(new_obj <= obj) {
            let mut scale = 2.0;
            let mut accepted = false;
            for _ in 0..SAFEGUARD_DOUBLINGS {
                sweep = state.sweep(&cur, &prev, &history, t, scale, false)?;
                new_obj = state.objective(&sweep.factors);
                if new_obj <= obj {
                    accepted = true;
                    break;
                }
                scale *= 2.0;
            }
            if !accepted {
                stalled = true;
                sweep.factors = cur.clone();
                new_obj = obj;
            }
        }
        for (h, &l) in history.iter_mut().zip(&sweep.lipschitz) {
            *h = [h[1], l];
        }
        prev = std::mem::replace(&mut cur, sweep.factors);

        let keep = zero_component_mask(&cur);
        if keep.iter().any(|&k| !k) {
            cur = cur.retain_components(&keep);
            prev = prev.retain_components(&keep);
            new_obj = state.objective(&cur);
        }
        trace.push(IterationRecord {
            iter: t,
            objective: new_obj,
            rank: cur.rank(),
            seconds: start.elapsed().as_secs_f64(),
        });
        let change = relative_change(obj, new_obj);
        obj = new_obj;
        if stalled || change < cfg.conv_tol || obj <= 1e-30 * data_scale {
            converged = true;
            break;
        }
    }
    Ok(SolveReport::finish(cur, trace, iterations, start, converged))
}
