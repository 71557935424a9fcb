//! Low-rank tensor completion with Euclidean-norm regularization.
//!
//! Minimizes `½‖M * (D − CP(X))‖² + λ R(X)` over CP factors, where `R` is a
//! [`RegularizerSpec`]. Two solvers are provided: block coordinate descent
//! with extrapolation ([`bcde_solve`]) and a limited-memory quasi-Newton
//! method on the flattened factors ([`quasi_newton_solve`]).

mod bcde;
mod quasi_newton;

use std::fmt::Write as _;
use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};

pub use bcde::bcde_solve;
pub use quasi_newton::quasi_newton_solve;

use crate::error::{EnrError, Result};
use crate::kernels::{masked_mode_gradient, ObservedEntries, RowFactors};
use crate::linalg::khatri_rao_spectral_sq;
use crate::regularizers::{
    prox_group_soft, prox_irls, prox_power_gradient, prox_ridge_scale, RegularizerSpec, IRLS_EPSILON,
    IRLS_ITERS,
};
use crate::tensor::{
    cp_reconstruct, masked_residual, rng_from_seed, DenseTensor, FactorSet, Matrix, ObservationMask, Shape,
};

/// Floor applied to Lipschitz estimates.
pub const LIPSCHITZ_FLOOR: f64 = 1e-12;
/// Inner gradient steps used for mode exponents above 2 (or between 1 and 2).
pub const POWER_PROX_STEPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrtcSolver {
    Bcde,
    QuasiNewton,
}

impl std::str::FromStr for LrtcSolver {
    type Err = EnrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bcde" => Ok(LrtcSolver::Bcde),
            "qn" | "lbfgs" | "quasi-newton" | "quasi_newton" => Ok(LrtcSolver::QuasiNewton),
            other => Err(EnrError::Config(format!("unknown LRTC solver `{other}`"))),
        }
    }
}

/// Solver settings. Construct with [`LrtcConfig::new`] and adjust fields.
#[derive(Debug, Clone, PartialEq)]
pub struct LrtcConfig {
    pub k_init: usize,
    pub lambda: f64,
    pub spec: RegularizerSpec,
    pub t_max: usize,
    /// Multiplier on the Lipschitz estimate; 0.5, 1 or 2 in practice.
    pub rho: f64,
    /// Extrapolation strength; 0 disables extrapolation.
    pub delta: f64,
    pub prune_tol: f64,
    /// Relative objective change that counts as converged.
    pub conv_tol: f64,
    pub rng_seed: u64,
    pub solver: LrtcSolver,
    pub qn_memory: usize,
    pub irls_iters: usize,
    pub irls_eps: f64,
}

impl LrtcConfig {
    pub fn new(k_init: usize, lambda: f64, spec: RegularizerSpec) -> Self {
        LrtcConfig {
            k_init,
            lambda,
            spec,
            t_max: 500,
            rho: 1.0,
            delta: 0.95,
            prune_tol: 1e-5,
            conv_tol: 1e-8,
            rng_seed: 0,
            solver: LrtcSolver::Bcde,
            qn_memory: 10,
            irls_iters: IRLS_ITERS,
            irls_eps: IRLS_EPSILON,
        }
    }

    pub fn validate(&self, order: usize) -> Result<()> {
        if self.k_init < 1 {
            return Err(EnrError::param("k_init must be at least 1"));
        }
        if self.t_max < 1 {
            return Err(EnrError::param("t_max must be at least 1"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(EnrError::param(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.rho > 0.0) {
            return Err(EnrError::param(format!("rho must be > 0, got {}", self.rho)));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(EnrError::param(format!("delta must lie in [0, 1), got {}", self.delta)));
        }
        if !(self.prune_tol >= 0.0 && self.conv_tol >= 0.0) {
            return Err(EnrError::param("tolerances must be >= 0"));
        }
        if self.qn_memory < 1 {
            return Err(EnrError::param("qn_memory must be at least 1"));
        }
        if self.spec.order() != order {
            return Err(EnrError::param(format!(
                "regularizer order {} does not match tensor order {order}",
                self.spec.order()
            )));
        }
        Ok(())
    }
}

/// One row of the iteration trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub rank: usize,
    pub seconds: f64,
}

/// Output of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub recovered: DenseTensor,
    pub factors: FactorSet,
    pub final_rank: usize,
    /// Iteration 0 is the initial point.
    pub trace: Vec<IterationRecord>,
    pub iterations: usize,
    pub wall_time: f64,
    pub converged: bool,
}

impl SolveReport {
    pub(crate) fn finish(
        factors: FactorSet,
        trace: Vec<IterationRecord>,
        iterations: usize,
        start: Instant,
        converged: bool,
    ) -> Self {
        SolveReport {
            recovered: cp_reconstruct(&factors),
            final_rank: factors.rank(),
            factors,
            trace,
            iterations,
            wall_time: start.elapsed().as_secs_f64(),
            converged,
        }
    }

    pub fn objective_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.objective).collect()
    }

    /// CSV with header `iter,objective,rank,seconds`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,objective,rank,seconds\n");
        for r in &self.trace {
            let _ = writeln!(out, "{},{:e},{},{:.6}", r.iter, r.objective, r.rank, r.seconds);
        }
        out
    }

    /// Everything except timing, for determinism checks.
    pub fn same_result_as(&self, other: &SolveReport) -> bool {
        self.recovered == other.recovered
            && self.factors == other.factors
            && self.iterations == other.iterations
            && self.converged == other.converged
            && self
                .trace
                .iter()
                .zip(&other.trace)
                .all(|(a, b)| a.objective.to_bits() == b.objective.to_bits() && a.rank == b.rank)
            && self.trace.len() == other.trace.len()
    }
}

/// Standard-normal factors with every column rescaled to unit norm.
pub fn init_factors(shape: &Shape, k: usize, seed: u64) -> FactorSet {
    let mut rng = rng_from_seed(seed);
    let factors = shape
        .dims()
        .iter()
        .map(|&n| {
            let mut x = Matrix::from_fn(n, k, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z
            });
            for mut col in x.column_iter_mut() {
                let norm = col.norm();
                if norm > 0.0 {
                    col /= norm;
                }
            }
            x
        })
        .collect();
    FactorSet::new(factors).expect("finite factors with shared rank")
}

/// `½‖M * (D − CP(f))‖² + λ R(f)`.
pub fn objective(
    d: &DenseTensor,
    m: &ObservationMask,
    f: &FactorSet,
    lambda: f64,
    spec: &RegularizerSpec,
) -> Result<f64> {
    let (_, sq) = masked_residual(d, f, m)?;
    Ok(0.5 * sq + lambda * spec.reg_value(f)?)
}

/// Gradient of the smooth loss `½‖M * (D − CP(f))‖²` with respect to
/// factor `mode`: `−(M_(j) * (D_(j) − X^(j) KRᵀ)) KR`.
pub fn smooth_grad(d: &DenseTensor, m: &ObservationMask, f: &FactorSet, mode: usize) -> Result<Matrix> {
    d.shape().check_mode(mode)?;
    check_shapes(d, m, f)?;
    let entries = ObservedEntries::new(d, m);
    let rows = RowFactors::from_factors(f);
    Ok(masked_mode_gradient(&entries, &rows, mode, d.shape().dims()[mode]))
}

/// `ρ · sqrt(|Ω| / N) · ‖khatri_rao(f, mode)‖₂²`, floored at 1e-12.
pub fn estimate_lipschitz(f: &FactorSet, mode: usize, observed: usize, rho: f64) -> f64 {
    let total: usize = f.dims().iter().product();
    let l = rho * (observed as f64 / total as f64).sqrt() * khatri_rao_spectral_sq(f, mode);
    if l.is_finite() {
        l.max(LIPSCHITZ_FLOOR)
    } else {
        l
    }
}

/// Extrapolation weight `δ·sqrt(L_prev / L_curr)`, zero for the first two
/// iterations (`t` is one-based).
pub fn extrapolation_weight(l_prev: f64, l_curr: f64, t: usize, delta: f64) -> f64 {
    if t <= 2 {
        0.0
    } else {
        delta * (l_prev / l_curr).sqrt()
    }
}

/// Runs the solver selected in `cfg`.
pub fn solve(d: &DenseTensor, m: &ObservationMask, cfg: &LrtcConfig) -> Result<SolveReport> {
    match cfg.solver {
        LrtcSolver::Bcde => bcde_solve(d, m, cfg),
        LrtcSolver::QuasiNewton => quasi_newton_solve(d, m, cfg),
    }
}

fn check_shapes(d: &DenseTensor, m: &ObservationMask, f: &FactorSet) -> Result<()> {
    if d.shape() != m.shape() {
        return Err(EnrError::ShapeMismatch {
            expected: d.shape().dims().to_vec(),
            actual: m.shape().dims().to_vec(),
        });
    }
    if d.shape().dims() != f.dims().as_slice() {
        return Err(EnrError::ShapeMismatch { expected: d.shape().dims().to_vec(), actual: f.dims() });
    }
    Ok(())
}

fn check_inputs(d: &DenseTensor, m: &ObservationMask, cfg: &LrtcConfig) -> Result<()> {
    if d.shape() != m.shape() {
        return Err(EnrError::ShapeMismatch {
            expected: d.shape().dims().to_vec(),
            actual: m.shape().dims().to_vec(),
        });
    }
    if m.is_empty() {
        return Err(EnrError::EmptyMask);
    }
    cfg.validate(d.shape().order())
}

/// Smooth loss plus penalty, evaluated from row-major factors.
pub(crate) fn eval_objective(
    entries: &ObservedEntries,
    rows: &RowFactors,
    f: &FactorSet,
    lambda: f64,
    spec: &RegularizerSpec,
) -> f64 {
    let loss = 0.5 * crate::kernels::masked_sq_residual(entries, rows);
    if lambda == 0.0 {
        return loss;
    }
    let reg: f64 = (0..f.order()).map(|j| spec.mode_value(j, f.factor(j))).sum();
    loss + lambda * reg
}

/// Proximal step for mode `mode`:
/// `argmin_X (L/2)‖X − G‖² + λ · coefficient · w_j Σ‖x_i‖^{e_j}`.
pub(crate) fn prox_mode(
    spec: &RegularizerSpec,
    mode: usize,
    g: &Matrix,
    l: f64,
    lambda: f64,
    cfg: &LrtcConfig,
) -> Result<Matrix> {
    let term = spec.term(mode);
    let penalty = lambda * spec.coefficient() * term.weight;
    if penalty == 0.0 {
        return Ok(g.clone());
    }
    let e = term.exponent;
    if e == 1.0 {
        prox_group_soft(g, penalty / l)
    } else if e == 2.0 {
        prox_ridge_scale(g, l, penalty)
    } else if e < 1.0 {
        prox_irls(g, e, penalty / l, cfg.irls_iters, cfg.irls_eps)
    } else {
        Ok(prox_power_gradient(g, penalty / l, e, POWER_PROX_STEPS))
    }
}

pub(crate) fn relative_change(old: f64, new: f64) -> f64 {
    let denom = old.abs().max(new.abs());
    if denom == 0.0 {
        0.0
    } else {
        (old - new).abs() / denom
    }
}
