use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cp_enr::harness::{self, gen_lrtc_data, gen_trpca_data, parse_config, Task};
use cp_enr::io::{load_mask, load_tensor, save_mask, save_tensor};
use cp_enr::lrtc::{self, LrtcConfig, LrtcSolver};
use cp_enr::trpca::{trpca_solve, TrpcaConfig};
use cp_enr::{EnrError, ObservationMask, RegularizerKind, RegularizerSpec};

/// Low-rank tensor completion and robust PCA with Euclidean-norm CP
/// regularizers.
#[derive(Parser)]
#[command(name = "cp-enr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic problem from an experiment config file.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Complete a partially observed tensor.
    Lrtc {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value = "sym:p=1/3")]
        reg: RegularizerKind,
        #[arg(long, default_value = "bcde")]
        solver: LrtcSolver,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, default_value_t = 0.95)]
        delta: f64,
        #[arg(long, default_value_t = 500)]
        tmax: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for recovered.tnsr and trace.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Separate a tensor into low-rank and sparse parts.
    Trpca {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long = "lambda-x", default_value_t = 1.0)]
        lambda_x: f64,
        #[arg(long = "lambda-e", default_value_t = 0.2)]
        lambda_e: f64,
        #[arg(long, default_value_t = 10.0)]
        mu: f64,
        #[arg(long, default_value = "sym:p=1/3")]
        reg: RegularizerKind,
        /// Mode-0 exponent; selects the asymmetric solver.
        #[arg(long)]
        q: Option<f64>,
        #[arg(long, default_value_t = 500)]
        tmax: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Magnitude above which a sparse entry counts as nonzero.
        #[arg(long = "nnz-tol", default_value_t = 1e-8)]
        nnz_tol: f64,
        /// Output directory for recovered.tnsr, sparse.tnsr and trace.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a parameter sweep described by a key=value config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score an estimate against the truth.
    Eval {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
        /// Observation mask; scores only the entries outside it.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        peak: f64,
    },
}

fn out_dir(dir: &Path) -> Result<&Path, EnrError> {
    fs::create_dir_all(dir)?;
    Ok(dir)
}

fn run(cmd: Command) -> Result<(), EnrError> {
    match cmd {
        Command::Gen { config, seed, out } => {
            let spec = parse_config(&fs::read_to_string(&config)?)?;
            let dir = out_dir(&out)?;
            match spec.task {
                Task::Lrtc => {
                    let data = gen_lrtc_data(&spec, seed)?;
                    save_tensor(dir.join("truth.tnsr"), &data.truth)?;
                    save_tensor(dir.join("data.tnsr"), &data.observed)?;
                    save_mask(dir.join("mask.mask"), &data.mask)?;
                }
                Task::Trpca => {
                    let data = gen_trpca_data(&spec, seed)?;
                    save_tensor(dir.join("truth.tnsr"), &data.truth)?;
                    save_tensor(dir.join("data.tnsr"), &data.corrupted)?;
                    save_tensor(dir.join("sparse_truth.tnsr"), &data.sparse)?;
                }
            }
            println!("wrote {} problem to {}", spec.task, dir.display());
        }
        Command::Lrtc { data, mask, k, lambda, reg, solver, rho, delta, tmax, seed, out } => {
            let d = load_tensor(&data)?;
            let m = load_mask(&mask)?;
            let mut cfg = LrtcConfig::new(k, lambda, RegularizerSpec::new(reg, d.shape().order())?);
            cfg.solver = solver;
            cfg.rho = rho;
            cfg.delta = delta;
            cfg.t_max = tmax;
            cfg.rng_seed = seed;
            let r = lrtc::solve(&d, &m, &cfg)?;
            let dir = out_dir(&out)?;
            save_tensor(dir.join("recovered.tnsr"), &r.recovered)?;
            fs::write(dir.join("trace.csv"), r.trace_csv())?;
            println!(
                "final_rank={} iterations={} converged={} objective={:e}",
                r.final_rank,
                r.iterations,
                r.converged,
                r.trace.last().map_or(f64::NAN, |t| t.objective)
            );
        }
        Command::Trpca { data, k, lambda_x, lambda_e, mu, reg, q, tmax, seed, nnz_tol, out } => {
            let d = load_tensor(&data)?;
            let mut cfg =
                TrpcaConfig::new(k, lambda_x, lambda_e, RegularizerSpec::new(reg, d.shape().order())?);
            cfg.mu = mu;
            cfg.q = q;
            cfg.t_max = tmax;
            cfg.rng_seed = seed;
            let r = trpca_solve(&d, &cfg)?;
            let dir = out_dir(&out)?;
            save_tensor(dir.join("recovered.tnsr"), &r.solve.recovered)?;
            save_tensor(dir.join("sparse.tnsr"), &r.sparse)?;
            fs::write(dir.join("trace.csv"), r.solve.trace_csv())?;
            let (nnz, fraction) = r.sparsity(nnz_tol);
            println!(
                "final_rank={} iterations={} converged={}",
                r.solve.final_rank, r.solve.iterations, r.solve.converged
            );
            println!("nnz_above_tol,fraction");
            println!("{nnz},{fraction:.6}");
        }
        Command::Sweep { config, out } => {
            let spec = parse_config(&fs::read_to_string(&config)?)?;
            let csv = harness::run_experiment(&spec)?.to_csv();
            match out {
                Some(path) => fs::write(path, csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Eval { truth, estimate, mask, peak } => {
            let t = load_tensor(&truth)?;
            let e = load_tensor(&estimate)?;
            let m: Option<ObservationMask> = mask.map(load_mask).transpose()?;
            let rel = harness::relative_error(&t, &e, m.as_ref())?;
            let p = harness::psnr(&t, &e, peak)?;
            println!("rel_error={rel:.10e} psnr={p:.4}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 2 } else { 1 })
        }
    }
}
