//! Balancing a CP decomposition drives each Euclidean-norm regularizer down
//! to `Σ λ_i^p`, its value as a Schatten-p quasi-norm.

use cp_enr::regularizers::balance_factors;
use cp_enr::*;

fn main() -> Result<()> {
    let f = FactorSet::new(vec![
        Matrix::from_column_slice(3, 2, &[8.0, 0.0, 0.0, 0.0, 1.0, 1.0]),
        Matrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 0.5]),
        Matrix::from_column_slice(2, 2, &[0.0, 1.0, 4.0, 0.0]),
    ])?;
    let lambdas: Vec<f64> =
        (0..f.rank()).map(|i| (0..3).map(|j| f.factor(j).column(i).norm()).product()).collect();
    println!("component magnitudes λ = {lambdas:?}");

    let kinds = [
        RegularizerKind::SymmetricPd { p: 1.0 / 3.0 },
        RegularizerKind::SymmetricPd { p: 2.0 / 3.0 },
        RegularizerKind::AsymmetricA { q: 0.5 },
        RegularizerKind::AsymmetricB { q: 0.5 },
        RegularizerKind::Table2(Table2Row::S12),
        RegularizerKind::Table2(Table2Row::S25),
        RegularizerKind::Table2(Table2Row::S37),
    ];
    println!("{:<16} {:>6} {:>12} {:>12} {:>12}", "regularizer", "p", "raw", "balanced", "Σλ^p");
    for kind in kinds {
        let spec = RegularizerSpec::new(kind, 3)?;
        let p = spec.effective_p();
        let target: f64 = lambdas.iter().map(|l| l.powf(p)).sum();
        let raw = spec.reg_value(&f)?;
        let balanced = spec.reg_value(&spec.balance(&f)?)?;
        println!("{:<16} {p:>6.3} {raw:>12.6} {balanced:>12.6} {target:>12.6}", kind.to_string());
    }

    let geo = balance_factors(&f);
    println!(
        "equal-norm balancing keeps the tensor: {}",
        cp_reconstruct(&geo).sub(&cp_reconstruct(&f))?.frobenius_norm() < 1e-12
    );
    Ok(())
}
