//! Recovers a noisy rank-5 tensor with 70% of its entries hidden, comparing
//! the plain fit with the p = 1/3 regularized fit for both solvers.

use cp_enr::harness::{gen_lrtc_data, relative_error, ExperimentSpec};
use cp_enr::lrtc::{self, LrtcConfig, LrtcSolver};
use cp_enr::*;

fn main() -> Result<()> {
    let mut spec = ExperimentSpec::lrtc_default();
    spec.shape = Shape::new(vec![25, 25, 25])?;
    let data = gen_lrtc_data(&spec, 1)?;
    println!("observed {} of {} entries", data.mask.count(), spec.shape.len());

    for solver in [LrtcSolver::Bcde, LrtcSolver::QuasiNewton] {
        for lambda in [0.0, 5.0] {
            let mut cfg = LrtcConfig::new(10, lambda, RegularizerSpec::symmetric(3, 1.0 / 3.0)?);
            cfg.solver = solver;
            cfg.rng_seed = 7;
            let r = lrtc::solve(&data.observed, &data.mask, &cfg)?;
            println!(
                "{solver:?} λ={lambda}: hidden-entry error {:.4}, rank {}, {} iterations",
                relative_error(&data.truth, &r.recovered, Some(&data.mask))?,
                r.final_rank,
                r.iterations
            );
        }
    }
    Ok(())
}
