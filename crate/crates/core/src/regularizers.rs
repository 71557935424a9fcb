//! Euclidean-norm regularizers on CP components and their proximal operators.
//!
//! Every regularizer here has the per-component form
//!
//! ```text
//! coefficient * sum_i sum_j w_j * ‖x_i^(j)‖^(e_j)
//! ```
//!
//! with a mode weight `w_j` and exponent `e_j`. By the weighted AM-GM
//! inequality its infimum over rescalings of a component with
//! `prod_j ‖x_i^(j)‖ = λ_i` is proportional to `λ_i^p` with
//! `p = 1 / sum_j (1 / e_j)`, attained when every `w_j e_j ‖x_i^(j)‖^(e_j)`
//! is equal. The coefficients below make that proportionality an equality,
//! so at balance the regularizer is exactly `sum_i λ_i^p`.

use std::fmt;
use std::str::FromStr;

use crate::error::{EnrError, Result};
use crate::tensor::{column_norms, DenseTensor, FactorSet, Matrix};

/// Default IRLS smoothing `ε`.
pub const IRLS_EPSILON: f64 = 1e-6;
/// Default IRLS inner sweeps `t_q`.
pub const IRLS_ITERS: usize = 10;

// exponents and reciprocals closer than this to an integer are snapped to it
const SNAP_TOL: f64 = 1e-3;

/// Fixed third-order regularizers with only convex terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table2Row {
    /// `√2/4 · Σ(‖x¹‖² + ‖x²‖² + ‖x³‖)`, p = 1/2.
    S12,
    /// `16^{1/5}/5 · Σ(‖x¹‖² + ‖x²‖ + ‖x³‖)`, p = 2/5.
    S25,
    /// `3^{6/7}/7 · Σ(‖x¹‖³ + ‖x²‖ + ‖x³‖)`, p = 3/7.
    S37,
}

impl Table2Row {
    pub fn coefficient(self) -> f64 {
        match self {
            Table2Row::S12 => 2f64.sqrt() / 4.0,
            Table2Row::S25 => 16f64.powf(0.2) / 5.0,
            Table2Row::S37 => 729f64.powf(1.0 / 7.0) / 7.0,
        }
    }

    fn exponents(self) -> [f64; 3] {
        match self {
            Table2Row::S12 => [2.0, 2.0, 1.0],
            Table2Row::S25 => [2.0, 1.0, 1.0],
            Table2Row::S37 => [3.0, 1.0, 1.0],
        }
    }
}

/// Which regularizer family, with its free exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegularizerKind {
    /// `(1/d) Σ_i Σ_j ‖x_i^(j)‖^{pd}`, `0 < p <= 1`.
    SymmetricPd { p: f64 },
    /// `p₁ Σ_i ((1/q)‖x_i^(0)‖^q + Σ_{j≥1} ‖x_i^(j)‖)`, `p₁ = q/(1+qd-q)`.
    AsymmetricA { q: f64 },
    /// `(p₂/2) Σ_i ((2/q)‖x_i^(0)‖^q + Σ_{j≥1} ‖x_i^(j)‖²)`, effective
    /// exponent `p₂ = 2q/(2+qd-q)`.
    AsymmetricB { q: f64 },
    /// Third-order only.
    Table2(Table2Row),
}

/// Weight and exponent of one mode's term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeTerm {
    pub weight: f64,
    pub exponent: f64,
}

/// A regularizer bound to a tensor order.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerSpec {
    kind: RegularizerKind,
    order: usize,
    coefficient: f64,
    terms: Vec<ModeTerm>,
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if r > 0.0 && (x - r).abs() <= SNAP_TOL * r {
        r
    } else {
        x
    }
}

fn check_q(q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(EnrError::param(format!("q must lie in (0, 1], got {q}")));
    }
    let inv = snap(1.0 / q);
    if inv.fract() != 0.0 {
        return Err(EnrError::param(format!("q must be the reciprocal of a positive integer, got {q}")));
    }
    Ok(1.0 / inv)
}

impl RegularizerSpec {
    pub fn new(kind: RegularizerKind, order: usize) -> Result<Self> {
        if order < 2 {
            return Err(EnrError::param(format!("order must be at least 2, got {order}")));
        }
        let d = order as f64;
        let (kind, coefficient, terms) = match kind {
            RegularizerKind::SymmetricPd { p } => {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(EnrError::param(format!("p must lie in (0, 1], got {p}")));
                }
                let e = snap(p * d);
                let term = ModeTerm { weight: 1.0, exponent: e };
                (RegularizerKind::SymmetricPd { p: e / d }, 1.0 / d, vec![term; order])
            }
            RegularizerKind::AsymmetricA { q } => {
                let q = check_q(q)?;
                let mut terms = vec![ModeTerm { weight: 1.0, exponent: 1.0 }; order];
                terms[0] = ModeTerm { weight: 1.0 / q, exponent: q };
                (RegularizerKind::AsymmetricA { q }, q / (1.0 + q * d - q), terms)
            }
            RegularizerKind::AsymmetricB { q } => {
                let q = check_q(q)?;
                let mut terms = vec![ModeTerm { weight: 1.0, exponent: 2.0 }; order];
                terms[0] = ModeTerm { weight: 2.0 / q, exponent: q };
                (RegularizerKind::AsymmetricB { q }, q / (2.0 + q * d - q), terms)
            }
            RegularizerKind::Table2(row) => {
                if order != 3 {
                    return Err(EnrError::param(format!(
                        "fixed third-order regularizer needs order 3, got {order}"
                    )));
                }
                let terms = row.exponents().iter().map(|&e| ModeTerm { weight: 1.0, exponent: e }).collect();
                (kind, row.coefficient(), terms)
            }
        };
        Ok(RegularizerSpec { kind, order, coefficient, terms })
    }

    pub fn symmetric(order: usize, p: f64) -> Result<Self> {
        Self::new(RegularizerKind::SymmetricPd { p }, order)
    }

    pub fn kind(&self) -> RegularizerKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Leading constant of the variational form.
    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn term(&self, mode: usize) -> ModeTerm {
        self.terms[mode]
    }

    pub fn terms(&self) -> &[ModeTerm] {
        &self.terms
    }

    /// Schatten exponent `p` whose `p`-th power this regularizer represents.
    pub fn effective_p(&self) -> f64 {
        1.0 / self.terms.iter().map(|t| 1.0 / t.exponent).sum::<f64>()
    }

    /// True when every mode carries the same exponent `e`.
    pub fn uniform_exponent(&self) -> Option<f64> {
        let e = self.terms[0].exponent;
        self.terms.iter().all(|t| t.exponent == e).then_some(e)
    }

    /// `coefficient * w_j * Σ_i ‖x_i‖^{e_j}` for one factor matrix.
    pub fn mode_value(&self, mode: usize, x: &Matrix) -> f64 {
        let t = self.terms[mode];
        self.coefficient * t.weight * column_norms(x).iter().map(|&n| pow_norm(n, t.exponent)).sum::<f64>()
    }

    /// Gradient of [`mode_value`](Self::mode_value); zero on zero columns.
    pub fn mode_gradient(&self, mode: usize, x: &Matrix) -> Matrix {
        let t = self.terms[mode];
        let c = self.coefficient * t.weight * t.exponent;
        let mut g = x.clone();
        for (mut col, n) in g.column_iter_mut().zip(column_norms(x)) {
            if n > 0.0 {
                col *= c * n.powf(t.exponent - 2.0);
            } else {
                col.fill(0.0);
            }
        }
        g
    }

    /// Value of the regularizer at `f`.
    pub fn reg_value(&self, f: &FactorSet) -> Result<f64> {
        if f.order() != self.order {
            return Err(EnrError::param(format!(
                "regularizer order {} does not match factor order {}",
                self.order,
                f.order()
            )));
        }
        Ok((0..self.order).map(|j| self.mode_value(j, f.factor(j))).sum())
    }

    /// Rescales every component to the equality point of this regularizer's
    /// AM-GM bound, leaving the reconstructed tensor unchanged. Components
    /// with a zero column are zeroed in every mode.
    pub fn balance(&self, f: &FactorSet) -> Result<FactorSet> {
        if f.order() != self.order {
            return Err(EnrError::param("regularizer order does not match factor order"));
        }
        let we: Vec<f64> = self.terms.iter().map(|t| t.weight * t.exponent).collect();
        let inv_sum: f64 = self.terms.iter().map(|t| 1.0 / t.exponent).sum();
        let norms: Vec<Vec<f64>> = (0..self.order).map(|j| f.column_norms(j)).collect();
        let mut factors = f.factors().to_vec();
        for i in 0..f.rank() {
            let col: Vec<f64> = norms.iter().map(|n| n[i]).collect();
            if col.contains(&0.0) {
                for x in factors.iter_mut() {
                    x.column_mut(i).fill(0.0);
                }
                continue;
            }
            let log_lambda: f64 = col.iter().map(|n| n.ln()).sum();
            let log_mu = (log_lambda
                + self.terms.iter().zip(&we).map(|(t, w)| w.ln() / t.exponent).sum::<f64>())
                / inv_sum;
            for (j, x) in factors.iter_mut().enumerate() {
                let target = ((log_mu - we[j].ln()) / self.terms[j].exponent).exp();
                let mut c = x.column_mut(i);
                c *= target / col[j];
            }
        }
        FactorSet::new(factors)
    }
}

#[inline]
fn pow_norm(n: f64, e: f64) -> f64 {
    if n == 0.0 {
        0.0
    } else if e == 1.0 {
        n
    } else if e == 2.0 {
        n * n
    } else {
        n.powf(e)
    }
}

impl fmt::Display for RegularizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegularizerKind::SymmetricPd { p } => write!(f, "sym:p={p}"),
            RegularizerKind::AsymmetricA { q } => write!(f, "asym_a:q={q}"),
            RegularizerKind::AsymmetricB { q } => write!(f, "asym_b:q={q}"),
            RegularizerKind::Table2(row) => {
                let name = match row {
                    Table2Row::S12 => "s12",
                    Table2Row::S25 => "s25",
                    Table2Row::S37 => "s37",
                };
                write!(f, "table2:{name}")
            }
        }
    }
}

/// Parses a number or a fraction such as `1/3`.
pub(crate) fn parse_ratio(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().ok()?;
            let b: f64 = b.trim().parse().ok()?;
            (b != 0.0).then_some(a / b)
        }
        None => s.trim().parse().ok(),
    }
}

impl FromStr for RegularizerKind {
    type Err = EnrError;

    /// Accepts `sym:p=0.3333`, `sym:p=1/3`, `asym_a:q=1/2`, `asym_b:q=0.5`,
    /// `table2:s12|s25|s37`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || EnrError::Config(format!("unrecognized regularizer `{s}`"));
        let (family, arg) = s.trim().split_once(':').ok_or_else(bad)?;
        let value = |key: &str| -> Result<f64> {
            let (k, v) = arg.split_once('=').ok_or_else(bad)?;
            if k.trim() != key {
                return Err(bad());
            }
            parse_ratio(v).ok_or_else(bad)
        };
        match family.trim().to_ascii_lowercase().as_str() {
            "sym" => Ok(RegularizerKind::SymmetricPd { p: value("p")? }),
            "asym_a" => Ok(RegularizerKind::AsymmetricA { q: value("q")? }),
            "asym_b" => Ok(RegularizerKind::AsymmetricB { q: value("q")? }),
            "table2" => match arg.trim().to_ascii_lowercase().as_str() {
                "s12" => Ok(RegularizerKind::Table2(Table2Row::S12)),
                "s25" => Ok(RegularizerKind::Table2(Table2Row::S25)),
                "s37" => Ok(RegularizerKind::Table2(Table2Row::S37)),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }
}

/// Value of a symmetric regularizer, `(1/d) Σ_i Σ_j ‖x_i^(j)‖^{pd}`.
pub fn reg_value(f: &FactorSet, spec: &RegularizerSpec) -> Result<f64> {
    spec.reg_value(f)
}

/// Rescales each component so every mode's column norm equals
/// `(prod_j ‖x_i^(j)‖)^{1/d}`.
pub fn balance_factors(f: &FactorSet) -> FactorSet {
    let spec = RegularizerSpec::symmetric(f.order(), 1.0).expect("order >= 2");
    spec.balance(f).expect("orders agree")
}

/// Column-wise soft thresholding: `(1 - t/‖y‖) y` if `‖y‖ > t`, else zero.
pub fn prox_group_soft(y: &Matrix, threshold: f64) -> Result<Matrix> {
    if !(threshold >= 0.0) {
        return Err(EnrError::param(format!("threshold must be >= 0, got {threshold}")));
    }
    let mut out = y.clone();
    for mut col in out.column_iter_mut() {
        let n = col.norm();
        if n > threshold {
            col *= 1.0 - threshold / n;
        } else {
            col.fill(0.0);
        }
    }
    Ok(out)
}

/// `L / (L + 2λ) · Y`, the minimizer of `(L/2)‖X − Y‖² + λ‖X‖²`.
pub fn prox_ridge_scale(y: &Matrix, l: f64, lambda: f64) -> Result<Matrix> {
    if !(l > 0.0) {
        return Err(EnrError::param(format!("L must be > 0, got {l}")));
    }
    if !(lambda >= 0.0) {
        return Err(EnrError::param(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(y * (l / (l + 2.0 * lambda)))
}

// Smoothed column penalty whose majorize-minimize step is the IRLS update
// y <- g / (1 + q λ (‖y‖+ε)^{q-2}); tends to r^q as ε -> 0.
fn irls_surrogate(r: f64, q: f64, eps: f64) -> f64 {
    let u = r + eps;
    u.powf(q) + q * eps / (1.0 - q) * u.powf(q - 1.0) - eps.powf(q) / (1.0 - q)
}

/// Iteratively reweighted solve of `min_Y ½‖Y − G‖² + λ Σ_i ‖y_i‖^q`,
/// returning the result and the smoothed surrogate objective after the
/// initial point and after each sweep.
pub fn prox_irls_traced(
    g: &Matrix,
    q: f64,
    lambda: f64,
    iters: usize,
    eps: f64,
) -> Result<(Matrix, Vec<f64>)> {
    if !(q > 0.0 && q < 1.0) {
        return Err(EnrError::param(format!("q must lie in (0, 1), got {q}")));
    }
    if !(lambda >= 0.0) {
        return Err(EnrError::param(format!("lambda must be >= 0, got {lambda}")));
    }
    if !(eps > 0.0) {
        return Err(EnrError::param(format!("epsilon must be > 0, got {eps}")));
    }
    let g_norms = column_norms(g);
    let mut scale = vec![1.0; g.ncols()];
    let surrogate = |scale: &[f64]| -> f64 {
        scale
            .iter()
            .zip(&g_norms)
            .map(|(&s, &gn)| {
                let r = s * gn;
                0.5 * (gn - r).powi(2) + lambda * irls_surrogate(r, q, eps)
            })
            .sum()
    };
    let mut trace = Vec::with_capacity(iters + 1);
    trace.push(surrogate(&scale));
    // every iterate is a nonnegative multiple of the matching column of G
    for _ in 0..iters {
        for (s, &gn) in scale.iter_mut().zip(&g_norms) {
            let r = *s * gn;
            *s = 1.0 / (1.0 + q * lambda * (r + eps).powf(q - 2.0));
        }
        trace.push(surrogate(&scale));
    }
    debug_assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0)));
    // the separable problem's global minimizer is either the IRLS point or zero
    for (s, &gn) in scale.iter_mut().zip(&g_norms) {
        let r = *s * gn;
        let at_r = 0.5 * (gn - r).powi(2) + lambda * pow_norm(r, q);
        if 0.5 * gn * gn <= at_r {
            *s = 0.0;
        }
    }
    let mut y = g.clone();
    for (mut col, &s) in y.column_iter_mut().zip(&scale) {
        col *= s;
    }
    Ok((y, trace))
}

/// Iteratively reweighted proximal operator for a `q`-power column penalty.
pub fn prox_irls(g: &Matrix, q: f64, lambda: f64, iters: usize, eps: f64) -> Result<Matrix> {
    prox_irls_traced(g, q, lambda, iters, eps).map(|(y, _)| y)
}

/// Approximate prox of `λ Σ‖y_i‖^e` for exponents other than 1, 2 or below
/// 1: a few gradient steps with backtracking, starting from `G`.
pub(crate) fn prox_power_gradient(g: &Matrix, lambda: f64, e: f64, steps: usize) -> Matrix {
    let phi = |y: &Matrix| -> f64 {
        0.5 * (y - g).norm_squared() + lambda * column_norms(y).iter().map(|&n| pow_norm(n, e)).sum::<f64>()
    };
    let mut y = g.clone();
    let mut cur = phi(&y);
    for _ in 0..steps {
        let mut grad = &y - g;
        for (mut gc, yc) in grad.column_iter_mut().zip(y.column_iter()) {
            let n = yc.norm();
            if n > 0.0 {
                gc += yc * (lambda * e * n.powf(e - 2.0));
            }
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = &y - &grad * step;
            let val = phi(&cand);
            if val < cur {
                y = cand;
                cur = val;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    y
}

/// `sign(v) max(0, |v| − λ)`.
#[inline]
pub fn soft_threshold(v: f64, lambda: f64) -> f64 {
    v.signum() * (v.abs() - lambda).max(0.0)
}

/// Entrywise soft thresholding of a tensor.
pub fn soft_threshold_elem(t: &DenseTensor, lambda: f64) -> Result<DenseTensor> {
    if !(lambda >= 0.0) {
        return Err(EnrError::param(format!("lambda must be >= 0, got {lambda}")));
    }
    t.map(|v| soft_threshold(v, lambda))
}
