//! Tensor robust PCA: split an observed tensor into a low-rank CP part plus a
//! sparse part.
//!
//! Three solvers share [`TrpcaConfig`]:
//!
//! * [`trpca_admm_solve`] for a group-lasso penalty on every mode (effective
//!   exponent `1/d`), splitting each factor into `X = Y` with dual `Z`;
//! * [`trpca_asym_solve`] for the asymmetric form with a `q`-power penalty on
//!   mode 0 (handled by ADMM with an iteratively reweighted prox) and ridge
//!   penalties on the other modes;
//! * [`trpca_als_solve`] for ridge penalties on every mode (effective exponent
//!   `2/d`), where every block has a closed form.
//!
//! All three update the sparse part by entrywise soft thresholding at `λ_e`.

use std::time::Instant;

use crate::error::{EnrError, Result};
use crate::linalg::{khatri_rao_gram, solve_spd_right};
use crate::lrtc::{init_factors, IterationRecord, SolveReport};
use crate::regularizers::{
    prox_group_soft, prox_irls, soft_threshold_elem, RegularizerKind, RegularizerSpec, IRLS_EPSILON,
    IRLS_ITERS,
};
use crate::tensor::{cp_reconstruct, khatri_rao, select_columns, unfold, DenseTensor, FactorSet, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct TrpcaConfig {
    pub k_init: usize,
    pub lambda_x: f64,
    /// May be `f64::INFINITY`, which forces the sparse part to zero.
    pub lambda_e: f64,
    pub mu: f64,
    /// Mode-0 exponent for the asymmetric solver. When `None` it is taken
    /// from an `asym_b` regularizer.
    pub q: Option<f64>,
    pub spec: RegularizerSpec,
    pub t_max: usize,
    pub conv_tol: f64,
    pub rng_seed: u64,
}

impl TrpcaConfig {
    pub fn new(k_init: usize, lambda_x: f64, lambda_e: f64, spec: RegularizerSpec) -> Self {
        TrpcaConfig {
            k_init,
            lambda_x,
            lambda_e,
            mu: 10.0,
            q: None,
            spec,
            t_max: 500,
            conv_tol: 1e-8,
            rng_seed: 0,
        }
    }

    pub fn validate(&self, order: usize) -> Result<()> {
        if self.k_init == 0 {
            return Err(EnrError::param("k_init must be >= 1"));
        }
        if !(self.lambda_x >= 0.0 && self.lambda_x.is_finite()) {
            return Err(EnrError::param(format!("lambda_x must be finite and >= 0, got {}", self.lambda_x)));
        }
        if !(self.lambda_e >= 0.0) {
            return Err(EnrError::param(format!("lambda_e must be >= 0, got {}", self.lambda_e)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(EnrError::param(format!("mu must be finite and > 0, got {}", self.mu)));
        }
        if self.t_max == 0 {
            return Err(EnrError::param("t_max must be >= 1"));
        }
        if !(self.conv_tol >= 0.0) {
            return Err(EnrError::param("conv_tol must be >= 0"));
        }
        if self.spec.order() != order {
            return Err(EnrError::DimensionMismatch(format!(
                "regularizer is for order {}, tensor has order {order}",
                self.spec.order()
            )));
        }
        Ok(())
    }

    /// Exponent used by [`trpca_asym_solve`].
    pub fn asym_q(&self) -> Result<f64> {
        let q = match (self.q, self.spec.kind()) {
            (Some(q), _) => q,
            (None, RegularizerKind::AsymmetricB { q }) => q,
            (None, kind) => {
                return Err(EnrError::param(format!(
                    "the asymmetric solver needs q or an asym_b regularizer, got {kind}"
                )))
            }
        };
        if !(q > 0.0 && q < 1.0) {
            return Err(EnrError::param(format!("q must lie in (0, 1), got {q}")));
        }
        Ok(q)
    }
}

/// Which TRPCA solver a configuration selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrpcaMethod {
    Admm,
    Asymmetric,
    Als,
}

impl TrpcaMethod {
    /// `q` set or an `asym_b` regularizer selects the asymmetric solver;
    /// otherwise a uniform exponent of 1 selects ADMM and 2 selects ALS.
    pub fn select(cfg: &TrpcaConfig) -> Result<Self> {
        if cfg.q.is_some() || matches!(cfg.spec.kind(), RegularizerKind::AsymmetricB { .. }) {
            return Ok(TrpcaMethod::Asymmetric);
        }
        match cfg.spec.uniform_exponent() {
            Some(1.0) => Ok(TrpcaMethod::Admm),
            Some(2.0) => Ok(TrpcaMethod::Als),
            _ => Err(EnrError::param(format!(
                "no TRPCA solver for regularizer {} (use p=1/d, p=2/d or asym_b)",
                cfg.spec.kind()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrpcaReport {
    pub solve: SolveReport,
    pub sparse: DenseTensor,
}

impl TrpcaReport {
    /// Number of sparse entries with magnitude above `tol`, and their share.
    pub fn sparsity(&self, tol: f64) -> (usize, f64) {
        let nnz = self.sparse.data().iter().filter(|v| v.abs() > tol).count();
        (nnz, nnz as f64 / self.sparse.data().len() as f64)
    }
}

/// Runs the solver chosen by [`TrpcaMethod::select`].
pub fn trpca_solve(d: &DenseTensor, cfg: &TrpcaConfig) -> Result<TrpcaReport> {
    match TrpcaMethod::select(cfg)? {
        TrpcaMethod::Admm => trpca_admm_solve(d, cfg),
        TrpcaMethod::Asymmetric => trpca_asym_solve(d, cfg),
        TrpcaMethod::Als => trpca_als_solve(d, cfg),
    }
}

/// `((D − E)_(j) KR + μY − Z)(KRᵀKR + μI)⁻¹` with `KR = khatri_rao(f, j)`.
pub fn trpca_x_update(
    d: &DenseTensor,
    e: &DenseTensor,
    f: &FactorSet,
    y: &Matrix,
    z: &Matrix,
    j: usize,
    mu: f64,
) -> Result<Matrix> {
    if !(mu > 0.0) {
        return Err(EnrError::param(format!("mu must be > 0, got {mu}")));
    }
    let (rhs, gram) = normal_equations(d, e, f, j)?;
    let n = f.factor(j).nrows();
    if y.shape() != (n, f.rank()) || z.shape() != (n, f.rank()) {
        return Err(EnrError::DimensionMismatch(format!(
            "Y and Z must be {n}x{}, got {:?} and {:?}",
            f.rank(),
            y.shape(),
            z.shape()
        )));
    }
    Ok(solve_shifted(rhs + y * mu - z, gram, mu))
}

/// `(D − E)_(j)·KR` and `KRᵀKR` for mode `j`.
fn normal_equations(d: &DenseTensor, e: &DenseTensor, f: &FactorSet, j: usize) -> Result<(Matrix, Matrix)> {
    if d.shape() != e.shape() {
        return Err(EnrError::ShapeMismatch {
            expected: d.shape().dims().to_vec(),
            actual: e.shape().dims().to_vec(),
        });
    }
    if d.shape().dims() != f.dims().as_slice() {
        return Err(EnrError::ShapeMismatch { expected: d.shape().dims().to_vec(), actual: f.dims() });
    }
    d.shape().check_mode(j)?;
    let kr = khatri_rao(f, j)?;
    let rhs = unfold(&d.sub(e)?, j)? * kr;
    Ok((rhs, khatri_rao_gram(f, j)))
}

fn solve_shifted(rhs: Matrix, mut gram: Matrix, shift: f64) -> Matrix {
    for i in 0..gram.nrows() {
        gram[(i, i)] += shift;
    }
    solve_spd_right(&rhs, &gram)
}

fn sparse_update(d: &DenseTensor, f: &FactorSet, lambda_e: f64) -> Result<DenseTensor> {
    soft_threshold_elem(&d.sub(&cp_reconstruct(f))?, lambda_e)
}

fn fit_and_sparse(d: &DenseTensor, f: &FactorSet, e: &DenseTensor, lambda_e: f64) -> f64 {
    let cp = cp_reconstruct(f);
    let fit: f64 = d.data().iter().zip(cp.data()).zip(e.data()).map(|((a, b), c)| (a - b - c).powi(2)).sum();
    let l1 = e.l1_norm();
    0.5 * fit + if l1 == 0.0 { 0.0 } else { lambda_e * l1 }
}

fn relative_diff(new: &Matrix, old: &Matrix) -> f64 {
    let denom = old.norm();
    if denom == 0.0 {
        if new.norm() == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (new - old).norm() / denom
    }
}

fn relative_tensor_diff(new: &DenseTensor, old: &DenseTensor) -> f64 {
    let diff: f64 = new.data().iter().zip(old.data()).map(|(a, b)| (a - b).powi(2)).sum();
    let denom = old.frobenius_norm();
    if denom == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff.sqrt() / denom
    }
}

/// Which variant of the split updates to run.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Split {
    /// Group soft thresholding on every mode.
    AllModes,
    /// IRLS prox with exponent `q` on mode 0, ridge on the rest.
    ModeZero { q: f64 },
}

/// Iterate of the ADMM solvers, exposed for inspection and step-by-step use.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub x: FactorSet,
    /// Split copies of the factors; only mode 0 is split in the asymmetric
    /// variant, so `y` and `z` then hold a single matrix.
    pub y: Vec<Matrix>,
    pub z: Vec<Matrix>,
    pub e: DenseTensor,
    split: Split,
}

impl AdmmState {
    /// Starting point `X = Y` from the seeded initialization, `Z = 0`, `E = 0`.
    pub fn new(d: &DenseTensor, cfg: &TrpcaConfig) -> Result<Self> {
        let split = match TrpcaMethod::select(cfg)? {
            TrpcaMethod::Admm => Split::AllModes,
            TrpcaMethod::Asymmetric => Split::ModeZero { q: cfg.asym_q()? },
            TrpcaMethod::Als => {
                return Err(EnrError::param("ridge penalties on every mode use trpca_als_solve"))
            }
        };
        cfg.validate(d.shape().order())?;
        let x = init_factors(d.shape(), cfg.k_init, cfg.rng_seed);
        let split_modes = match split {
            Split::AllModes => x.order(),
            Split::ModeZero { .. } => 1,
        };
        let y: Vec<Matrix> = x.factors()[..split_modes].to_vec();
        let z = y.iter().map(|m| Matrix::zeros(m.nrows(), m.ncols())).collect();
        Ok(AdmmState { x, y, z, e: DenseTensor::zeros(d.shape().clone()), split })
    }

    /// Penalized objective at the current `X` and `E`.
    pub fn objective(&self, d: &DenseTensor, cfg: &TrpcaConfig) -> f64 {
        let base = fit_and_sparse(d, &self.x, &self.e, cfg.lambda_e);
        let reg: f64 = match self.split {
            Split::AllModes => {
                self.x.factors().iter().map(|m| m.column_iter().map(|c| c.norm()).sum::<f64>()).sum()
            }
            Split::ModeZero { q } => {
                let lead: f64 = self.x.factor(0).column_iter().map(|c| c.norm().powf(q)).sum();
                let rest: f64 = self.x.factors()[1..].iter().map(|m| m.norm_squared()).sum();
                lead + 0.5 * rest
            }
        };
        base + cfg.lambda_x * reg
    }

    /// One full pass: factor blocks in mode order, then the sparse part, then
    /// removal of components whose split copy is zero in some mode.
    pub fn step(&mut self, d: &DenseTensor, cfg: &TrpcaConfig) -> Result<()> {
        let mu = cfg.mu;
        for j in 0..self.x.order() {
            let split_here = j < self.y.len();
            let next = if split_here {
                let xj = trpca_x_update(d, &self.e, &self.x, &self.y[j], &self.z[j], j, mu)?;
                let v = &xj - &self.z[j] / mu;
                let yj = match self.split {
                    Split::AllModes => prox_group_soft(&v, cfg.lambda_x / mu)?,
                    Split::ModeZero { q } => prox_irls(&v, q, cfg.lambda_x / mu, IRLS_ITERS, IRLS_EPSILON)?,
                };
                self.z[j] += (&yj - &xj) * mu;
                self.y[j] = yj;
                xj
            } else {
                let (rhs, gram) = normal_equations(d, &self.e, &self.x, j)?;
                solve_shifted(rhs, gram, cfg.lambda_x)
            };
            check_finite(&next)?;
            self.x.set_factor(j, next);
        }
        self.e = sparse_update(d, &self.x, cfg.lambda_e)?;
        self.prune();
        Ok(())
    }

    fn prune(&mut self) {
        let mut keep = vec![true; self.x.rank()];
        for y in &self.y {
            for (i, c) in y.column_iter().enumerate() {
                if c.iter().all(|&v| v == 0.0) {
                    keep[i] = false;
                }
            }
        }
        if keep.iter().all(|&k| k) {
            return;
        }
        self.x = self.x.retain_components(&keep);
        for m in self.y.iter_mut().chain(self.z.iter_mut()) {
            *m = select_columns(m, &keep);
        }
    }
}

fn check_finite(m: &Matrix) -> Result<()> {
    match m.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(EnrError::Numeric(format!("factor update produced a non-finite entry at {i}"))),
    }
}

fn run_admm(d: &DenseTensor, cfg: &TrpcaConfig, mut state: AdmmState) -> Result<TrpcaReport> {
    let start = Instant::now();
    let mut trace = vec![IterationRecord {
        iter: 0,
        objective: state.objective(d, cfg),
        rank: state.x.rank(),
        seconds: 0.0,
    }];
    let mut converged = false;
    let mut iterations = 0;
    for t in 1..=cfg.t_max {
        if state.x.rank() == 0 {
            converged = true;
            break;
        }
        iterations = t;
        let before = (state.x.clone(), state.e.clone());
        state.step(d, cfg)?;
        trace.push(IterationRecord {
            iter: t,
            objective: state.objective(d, cfg),
            rank: state.x.rank(),
            seconds: start.elapsed().as_secs_f64(),
        });
        if stalled(&before.0, &before.1, &state.x, &state.e, cfg.conv_tol) {
            converged = true;
            break;
        }
    }
    Ok(TrpcaReport {
        solve: SolveReport::finish(state.x, trace, iterations, start, converged),
        sparse: state.e,
    })
}

fn stalled(x0: &FactorSet, e0: &DenseTensor, x1: &FactorSet, e1: &DenseTensor, tol: f64) -> bool {
    if x0.rank() != x1.rank() {
        return false;
    }
    let fx = x0.factors().iter().zip(x1.factors()).map(|(a, b)| relative_diff(b, a)).fold(0.0, f64::max);
    fx < tol && relative_tensor_diff(e1, e0) < tol
}

/// ADMM with a group soft-thresholding step on every mode.
///
/// Requires a regularizer whose exponent is 1 on every mode. Each mode's
/// factor `X` is solved in closed form, its copy `Y` is the column-wise
/// shrinkage of `X − Z/μ` at `λ_x/μ`, and the dual moves by `μ(Y − X)`.
/// The reported objective is `½‖D − [[X]] − E‖² + λ_x Σ_j Σ_i ‖x_i^(j)‖ +
/// λ_e‖E‖₁`; it is not guaranteed to decrease.
pub fn trpca_admm_solve(d: &DenseTensor, cfg: &TrpcaConfig) -> Result<TrpcaReport> {
    if cfg.spec.uniform_exponent() != Some(1.0) {
        return Err(EnrError::param(format!("ADMM needs exponent 1 on every mode, got {}", cfg.spec.kind())));
    }
    let cfg = TrpcaConfig { q: None, ..cfg.clone() };
    let state = AdmmState::new(d, &cfg)?;
    run_admm(d, &cfg, state)
}

/// ADMM on mode 0 with the reweighted `q`-power prox, ridge solves on the
/// other modes.
///
/// Objective: `½‖D − [[X]] − E‖² + λ_x (Σ_i ‖x_i^(0)‖^q + ½ Σ_{j≥1} ‖X^(j)‖²)
/// + λ_e‖E‖₁`.
pub fn trpca_asym_solve(d: &DenseTensor, cfg: &TrpcaConfig) -> Result<TrpcaReport> {
    let q = cfg.asym_q()?;
    let cfg = TrpcaConfig { q: Some(q), ..cfg.clone() };
    let state = AdmmState::new(d, &cfg)?;
    run_admm(d, &cfg, state)
}

/// Alternating least squares for ridge penalties on every mode.
///
/// Each factor is the exact minimizer
/// `(D − E)_(j) KR (KRᵀKR + (2λ_x/d) I)⁻¹` and `E` is the exact soft
/// threshold, so the objective `½‖D − [[X]] − E‖² + (λ_x/d) Σ_j ‖X^(j)‖² +
/// λ_e‖E‖₁` never increases.
pub fn trpca_als_solve(d: &DenseTensor, cfg: &TrpcaConfig) -> Result<TrpcaReport> {
    if cfg.spec.uniform_exponent() != Some(2.0) {
        return Err(EnrError::param(format!("ALS needs exponent 2 on every mode, got {}", cfg.spec.kind())));
    }
    cfg.validate(d.shape().order())?;
    let start = Instant::now();
    let order = d.shape().order();
    let ridge = 2.0 * cfg.lambda_x / order as f64;
    let objective = |x: &FactorSet, e: &DenseTensor| -> f64 {
        let reg: f64 = x.factors().iter().map(|m| m.norm_squared()).sum();
        fit_and_sparse(d, x, e, cfg.lambda_e) + cfg.lambda_x / order as f64 * reg
    };
    let mut x = init_factors(d.shape(), cfg.k_init, cfg.rng_seed);
    let mut e = DenseTensor::zeros(d.shape().clone());
    let mut trace =
        vec![IterationRecord { iter: 0, objective: objective(&x, &e), rank: x.rank(), seconds: 0.0 }];
    let mut converged = false;
    let mut iterations = 0;
    for t in 1..=cfg.t_max {
        if x.rank() == 0 {
            converged = true;
            break;
        }
        iterations = t;
        let (x0, e0) = (x.clone(), e.clone());
        for j in 0..order {
            let next = als_block(d, &e, &x, j, ridge)?;
            check_finite(&next)?;
            x.set_factor(j, next);
        }
        e = sparse_update(d, &x, cfg.lambda_e)?;
        let mut keep = vec![true; x.rank()];
        for j in 0..order {
            for (i, n) in x.column_norms(j).into_iter().enumerate() {
                if n == 0.0 {
                    keep[i] = false;
                }
            }
        }
        if keep.iter().any(|&k| !k) {
            x = x.retain_components(&keep);
        }
        trace.push(IterationRecord {
            iter: t,
            objective: objective(&x, &e),
            rank: x.rank(),
            seconds: start.elapsed().as_secs_f64(),
        });
        if stalled(&x0, &e0, &x, &e, cfg.conv_tol) {
            converged = true;
            break;
        }
    }
    Ok(TrpcaReport { solve: SolveReport::finish(x, trace, iterations, start, converged), sparse: e })
}

/// Exact ridge block update `(D − E)_(j) KR (KRᵀKR + ridge·I)⁻¹`.
pub fn als_block(d: &DenseTensor, e: &DenseTensor, f: &FactorSet, j: usize, ridge: f64) -> Result<Matrix> {
    if !(ridge >= 0.0) {
        return Err(EnrError::param(format!("ridge must be >= 0, got {ridge}")));
    }
    let (rhs, gram) = normal_equations(d, e, f, j)?;
    Ok(solve_shifted(rhs, gram, ridge))
}
