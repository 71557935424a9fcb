//! Synthetic benchmarks: data generators, recovery metrics, and a sweep
//! runner that writes one CSV row per `(seed, λ)` run plus a per-λ summary.

mod config;
mod data;
mod metrics;

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

pub use config::parse_config;
pub use data::{component_weights, gen_lrtc_data, gen_trpca_data, LrtcData, TrpcaData};
pub use metrics::{psnr, relative_error, Metrics};

use crate::error::{EnrError, Result};
use crate::lrtc::{self, LrtcConfig, LrtcSolver, SolveReport};
use crate::regularizers::{RegularizerKind, RegularizerSpec};
use crate::tensor::Shape;
use crate::trpca::{trpca_solve, TrpcaConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Lrtc,
    Trpca,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightsMode {
    Unit,
    /// `w_i = i/r`.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corruption {
    Additive,
    Replace,
}

macro_rules! keyword_enum {
    ($ty:ident { $($name:literal => $variant:ident),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $name),+ })
            }
        }
        impl FromStr for $ty {
            type Err = EnrError;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($name => Ok($ty::$variant),)+
                    other => Err(EnrError::Config(format!(
                        concat!("unknown ", stringify!($ty), " '{}'"), other
                    ))),
                }
            }
        }
    };
}

keyword_enum!(Task { "lrtc" => Lrtc, "trpca" => Trpca });
keyword_enum!(WeightsMode { "unit" => Unit, "linear" => Linear });
keyword_enum!(Corruption { "additive" => Additive, "replace" => Replace });

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i == n - 1 {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Everything needed to generate, solve and score a batch of synthetic runs.
///
/// For completion `rate` is the missing rate and the grid is over `λ`; for
/// robust PCA `rate` is the corruption density and the grid is over `λ_x`
/// with `λ_e` fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub task: Task,
    pub shape: Shape,
    pub rank: usize,
    pub noise: f64,
    pub rate: f64,
    pub weights: WeightsMode,
    pub corruption: Corruption,
    pub regularizer: RegularizerKind,
    pub k_init: usize,
    pub solver: LrtcSolver,
    pub rho: f64,
    pub delta: f64,
    pub lambda_e: f64,
    pub mu: f64,
    pub q: Option<f64>,
    pub t_max: usize,
    pub conv_tol: f64,
    pub prune_tol: f64,
    pub seeds: Vec<u64>,
    pub lambdas: Vec<f64>,
    pub psnr_peak: f64,
    /// When false the `seconds` columns are written as 0 so reruns are
    /// byte-identical.
    pub timing: bool,
}

impl ExperimentSpec {
    /// Completion defaults: rank-5 30×30×30, noise 0.1, missing rate 0.7,
    /// `p = 1/3`, `k = 2r`, seeds `0..10`, twenty log-spaced `λ` in
    /// `[0.01, 500]`.
    pub fn lrtc_default() -> Self {
        ExperimentSpec {
            task: Task::Lrtc,
            shape: Shape::new(vec![30, 30, 30]).expect("valid shape"),
            rank: 5,
            noise: 0.1,
            rate: 0.7,
            weights: WeightsMode::Unit,
            corruption: Corruption::Additive,
            regularizer: RegularizerKind::SymmetricPd { p: 1.0 / 3.0 },
            k_init: 10,
            solver: LrtcSolver::Bcde,
            rho: 1.0,
            delta: 0.95,
            lambda_e: 1.0,
            mu: 10.0,
            q: None,
            t_max: 500,
            conv_tol: 1e-8,
            prune_tol: 1e-5,
            seeds: (0..10).collect(),
            lambdas: log_grid(0.01, 500.0, 20),
            psnr_peak: 1.0,
            timing: true,
        }
    }

    /// Robust PCA defaults: as [`lrtc_default`](Self::lrtc_default) but with
    /// corruption density 0.1 and linear component weights.
    pub fn trpca_default() -> Self {
        ExperimentSpec { task: Task::Trpca, rate: 0.1, weights: WeightsMode::Linear, ..Self::lrtc_default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(EnrError::Config(m));
        if self.rank == 0 {
            return bad("rank must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.rate) {
            return bad(format!("rate must lie in [0, 1), got {}", self.rate));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be finite and >= 0, got {}", self.noise));
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.lambdas.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return bad("lambda grid values must be finite and >= 0".into());
        }
        if !(self.psnr_peak > 0.0) {
            return bad("psnr_peak must be > 0".into());
        }
        RegularizerSpec::new(self.regularizer, self.shape.order())?;
        Ok(())
    }

    pub fn regularizer_spec(&self) -> Result<RegularizerSpec> {
        RegularizerSpec::new(self.regularizer, self.shape.order())
    }

    /// Solver seed for a data seed: distinct from the data stream.
    pub fn init_seed(seed: u64) -> u64 {
        seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1)
    }

    pub fn lrtc_config(&self, lambda: f64, seed: u64) -> Result<LrtcConfig> {
        let mut cfg = LrtcConfig::new(self.k_init, lambda, self.regularizer_spec()?);
        cfg.t_max = self.t_max;
        cfg.rho = self.rho;
        cfg.delta = self.delta;
        cfg.conv_tol = self.conv_tol;
        cfg.prune_tol = self.prune_tol;
        cfg.solver = self.solver;
        cfg.rng_seed = Self::init_seed(seed);
        Ok(cfg)
    }

    pub fn trpca_config(&self, lambda_x: f64, seed: u64) -> Result<TrpcaConfig> {
        let mut cfg = TrpcaConfig::new(self.k_init, lambda_x, self.lambda_e, self.regularizer_spec()?);
        cfg.mu = self.mu;
        cfg.q = self.q;
        cfg.t_max = self.t_max;
        cfg.conv_tol = self.conv_tol;
        cfg.rng_seed = Self::init_seed(seed);
        Ok(cfg)
    }

    /// Generates the data for `seed`, solves with `lambda` and scores the
    /// result (unobserved entries for completion, all entries for robust PCA).
    pub fn run_once(&self, seed: u64, lambda: f64) -> Result<(Metrics, SolveReport)> {
        let (truth, report, observed) = match self.task {
            Task::Lrtc => {
                let data = gen_lrtc_data(self, seed)?;
                let r = lrtc::solve(&data.observed, &data.mask, &self.lrtc_config(lambda, seed)?)?;
                (data.truth, r, Some(data.mask))
            }
            Task::Trpca => {
                let data = gen_trpca_data(self, seed)?;
                let r = trpca_solve(&data.corrupted, &self.trpca_config(lambda, seed)?)?;
                (data.truth, r.solve, None)
            }
        };
        let rel = relative_error(&truth, &report.recovered, observed.as_ref())?;
        let metrics = Metrics {
            relative_error: rel,
            psnr: Some(psnr(&truth, &report.recovered, self.psnr_peak)?),
            wall_time: if self.timing { report.wall_time } else { 0.0 },
            final_rank: report.final_rank,
        };
        Ok((metrics, report))
    }
}

/// One `(seed, λ)` run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub seed: u64,
    pub lambda: f64,
    pub outcome: std::result::Result<RunOutcome, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOutcome {
    pub metrics: Metrics,
    pub iterations: usize,
}

/// Aggregate over the successful runs at one `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub lambda: f64,
    pub runs: usize,
    pub failures: usize,
    pub mean_error: f64,
    pub std_error: f64,
    pub mean_psnr: f64,
    pub mean_rank: f64,
    pub mean_iterations: f64,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub task: Task,
    pub p_effective: f64,
    pub rate: f64,
    /// Ordered by λ grid position, then by seed order.
    pub rows: Vec<RunRow>,
    /// One per λ, in grid order.
    pub summaries: Vec<SummaryRow>,
}

pub const CSV_HEADER: &str = "task,seed,lambda,p_effective,missing_rate_or_density,rel_error,psnr,final_rank,iters,seconds,rel_error_std,error";

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn population_std(v: &[f64]) -> f64 {
    let m = mean(v);
    mean(&v.iter().map(|x| (x - m) * (x - m)).collect::<Vec<_>>()).sqrt()
}

impl ExperimentReport {
    /// Summary with the lowest mean error (ties to the earlier grid point).
    pub fn best(&self) -> Option<&SummaryRow> {
        self.summaries.iter().filter(|s| s.mean_error.is_finite()).fold(
            None,
            |best: Option<&SummaryRow>, s| match best {
                Some(b) if b.mean_error <= s.mean_error => Some(b),
                _ => Some(s),
            },
        )
    }

    /// Successful runs at `lambda`, in seed order.
    pub fn runs_at(&self, lambda: f64) -> Vec<(u64, RunOutcome)> {
        self.rows
            .iter()
            .filter(|r| r.lambda == lambda)
            .filter_map(|r| r.outcome.as_ref().ok().map(|o| (r.seed, *o)))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        let head = |out: &mut String, seed: &dyn fmt::Display, lambda: f64| {
            let _ = write!(out, "{},{seed},{lambda:e},{:.6},{},", self.task, self.p_effective, self.rate);
        };
        for r in &self.rows {
            head(&mut out, &r.seed, r.lambda);
            match &r.outcome {
                Ok(o) => {
                    let m = o.metrics;
                    let _ = writeln!(
                        out,
                        "{:.10e},{},{},{},{:.6},,",
                        m.relative_error,
                        fmt_psnr(m.psnr),
                        m.final_rank,
                        o.iterations,
                        m.wall_time
                    );
                }
                Err(e) => {
                    let _ = writeln!(out, ",,,,,,{}", csv_text(e));
                }
            }
        }
        for s in &self.summaries {
            head(&mut out, &"summary", s.lambda);
            let _ = writeln!(
                out,
                "{:.10e},{},{:.3},{:.3},{:.6},{:.10e},{}",
                s.mean_error,
                fmt_psnr(Some(s.mean_psnr)),
                s.mean_rank,
                s.mean_iterations,
                s.mean_seconds,
                s.std_error,
                if s.failures > 0 {
                    format!("{} of {} runs failed", s.failures, s.failures + s.runs)
                } else {
                    String::new()
                }
            );
        }
        out
    }
}

fn fmt_psnr(p: Option<f64>) -> String {
    match p {
        None => String::new(),
        Some(v) if v.is_infinite() => "inf".into(),
        Some(v) => format!("{v:.4}"),
    }
}

fn csv_text(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

/// Runs every `(λ, seed)` pair in order. A failing run becomes a row with
/// its error message; the sweep carries on.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let p_effective = spec.regularizer_spec()?.effective_p();
    let mut rows = Vec::with_capacity(spec.lambdas.len() * spec.seeds.len());
    let mut summaries = Vec::with_capacity(spec.lambdas.len());
    for &lambda in &spec.lambdas {
        let first = rows.len();
        for &seed in &spec.seeds {
            let outcome = spec
                .run_once(seed, lambda)
                .map(|(metrics, r)| RunOutcome { metrics, iterations: r.iterations })
                .map_err(|e| e.to_string());
            rows.push(RunRow { seed, lambda, outcome });
        }
        let ok: Vec<RunOutcome> =
            rows[first..].iter().filter_map(|r| r.outcome.as_ref().ok().copied()).collect();
        let pick = |f: fn(&RunOutcome) -> f64| ok.iter().map(f).collect::<Vec<_>>();
        let errors = pick(|o| o.metrics.relative_error);
        summaries.push(SummaryRow {
            lambda,
            runs: ok.len(),
            failures: spec.seeds.len() - ok.len(),
            mean_error: mean(&errors),
            std_error: population_std(&errors),
            mean_psnr: mean(&pick(|o| o.metrics.psnr.unwrap_or(f64::NAN))),
            mean_rank: mean(&pick(|o| o.metrics.final_rank as f64)),
            mean_iterations: mean(&pick(|o| o.iterations as f64)),
            mean_seconds: mean(&pick(|o| o.metrics.wall_time)),
        });
    }
    Ok(ExperimentReport { task: spec.task, p_effective, rate: spec.rate, rows, summaries })
}
