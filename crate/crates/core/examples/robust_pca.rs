//! Separates a low-rank tensor from sparse gross corruption with each of the
//! three robust PCA solvers.

use cp_enr::harness::{gen_trpca_data, relative_error, ExperimentSpec};
use cp_enr::trpca::{trpca_solve, TrpcaMethod};
use cp_enr::*;

fn main() -> Result<()> {
    let mut spec = ExperimentSpec::trpca_default();
    spec.shape = Shape::new(vec![20, 20, 20])?;
    let data = gen_trpca_data(&spec, 3)?;
    println!(
        "input error {:.4}, corrupted entries {}",
        relative_error(&data.truth, &data.corrupted, None)?,
        data.sparse.data().iter().filter(|v| **v != 0.0).count()
    );

    let runs = [
        (RegularizerKind::SymmetricPd { p: 1.0 / 3.0 }, 0.5),
        (RegularizerKind::AsymmetricB { q: 0.5 }, 2.0),
        (RegularizerKind::SymmetricPd { p: 2.0 / 3.0 }, 1.0),
    ];
    for (kind, lambda_x) in runs {
        let cfg = TrpcaConfig::new(10, lambda_x, 0.2, RegularizerSpec::new(kind, 3)?);
        let r = trpca_solve(&data.corrupted, &cfg)?;
        let (nnz, frac) = r.sparsity(1e-8);
        println!(
            "{:?} ({kind}): error {:.4}, rank {}, sparse nnz {nnz} ({:.1}%)",
            TrpcaMethod::select(&cfg)?,
            relative_error(&data.truth, &r.solve.recovered, None)?,
            r.solve.final_rank,
            100.0 * frac
        );
    }
    Ok(())
}
