#![allow(clippy::needless_range_loop)]

//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! with its measurements and elapsed time. The process exits non-zero if any
//! criterion fails.

mod common;

use std::time::Instant;

use common::{central_diff, grid_then_golden, median, min_2d, random_factors, rng, shape};
use cp_enr::harness::{log_grid, relative_error, run_experiment, ExperimentSpec};
use cp_enr::lrtc::{self, init_factors, objective, smooth_grad};
use cp_enr::regularizers::{prox_group_soft, prox_irls, prox_ridge_scale, soft_threshold_elem};
use cp_enr::trpca::{trpca_als_solve, trpca_solve, AdmmState};
use cp_enr::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn criterion(n: u32, name: &str, limit_s: f64, run: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = run();
    let secs = start.elapsed().as_secs_f64();
    let pass = out.pass && secs < limit_s;
    let limit = if limit_s.is_finite() { format!("limit {limit_s:.0}s") } else { "no limit".into() };
    println!(
        "{} criterion {n}: {name}: {} ({secs:.1}s, {limit})",
        if pass { "PASS" } else { "FAIL" },
        out.detail
    );
    pass
}

fn all_specs(d: usize) -> Vec<RegularizerSpec> {
    let mut kinds = vec![];
    for e in 1..=d {
        kinds.push(RegularizerKind::SymmetricPd { p: e as f64 / d as f64 });
    }
    kinds.push(RegularizerKind::SymmetricPd { p: 0.25 });
    for q in [1.0, 0.5, 1.0 / 3.0, 0.25] {
        kinds.push(RegularizerKind::AsymmetricA { q });
        kinds.push(RegularizerKind::AsymmetricB { q });
    }
    if d == 3 {
        for row in [Table2Row::S12, Table2Row::S25, Table2Row::S37] {
            kinds.push(RegularizerKind::Table2(row));
        }
    }
    kinds.into_iter().map(|k| RegularizerSpec::new(k, d).unwrap()).collect()
}

/// Factors with column scales spread over several orders of magnitude.
fn unbalanced_factors(g: &mut ChaCha8Rng, d: usize) -> FactorSet {
    let k = g.random_range(1..=8);
    let dims: Vec<usize> = (0..d).map(|_| g.random_range(2..6)).collect();
    let mut f = random_factors(g, &dims, k).into_factors();
    for x in f.iter_mut() {
        for mut c in x.column_iter_mut() {
            c *= g.random_range(-2.0f64..2.0).exp();
        }
    }
    FactorSet::new(f).unwrap()
}

fn regularizer_identities() -> Outcome {
    let mut g = rng(1);
    let (mut eq_gap, mut ineq_gap, mut specs) = (0.0f64, 0.0f64, 0);
    for d in [3, 4] {
        for spec in all_specs(d) {
            specs += 1;
            for _ in 0..200 {
                let f = unbalanced_factors(&mut g, d);
                let target: f64 = (0..f.rank())
                    .map(|i| (0..d).map(|j| f.factor(j).column(i).norm()).product::<f64>())
                    .map(|l| l.powf(spec.effective_p()))
                    .sum();
                let raw = spec.reg_value(&f).unwrap();
                let balanced = spec.reg_value(&spec.balance(&f).unwrap()).unwrap();
                eq_gap = eq_gap.max((balanced - target).abs() / target);
                ineq_gap = ineq_gap.max((target - raw) / target);
            }
        }
    }
    Outcome {
        pass: eq_gap <= 1e-10 && ineq_gap <= 1e-12,
        detail: format!(
            "{specs} specs x 200 sets, max balanced gap {eq_gap:.1e}, max bound violation {ineq_gap:.1e}"
        ),
    }
}

fn prox_oracles() -> Outcome {
    let mut g = rng(2);
    let (mut worst, mut worst_irls) = (0.0f64, 0.0f64);
    let dist = |y: &Matrix, (a, b): (f64, f64)| ((y[0] - a).powi(2) + (y[1] - b).powi(2)).sqrt();
    for i in 0..100 {
        let t = g.random_range(0.0..2.0);
        let q = [0.5, 1.0 / 3.0, 0.25][i % 3];
        if i % 2 == 0 {
            let v: f64 = g.random_range(-3.0..3.0);
            let one = Matrix::from_element(1, 1, v);
            let fit = |y: f64| 0.5 * (y - v) * (y - v);
            let o = grid_then_golden(|y| fit(y) + t * y.abs(), -4.0, 4.0, 800);
            worst = worst.max((prox_group_soft(&one, t).unwrap()[0] - o).abs());
            let l = g.random_range(0.5..4.0);
            let o = grid_then_golden(|y| l * fit(y) + t * y * y, -4.0, 4.0, 800);
            worst = worst.max((prox_ridge_scale(&one, l, t).unwrap()[0] - o).abs());
            let tensor = DenseTensor::new(shape(&[1, 1]), vec![v]).unwrap();
            let o = grid_then_golden(|y| fit(y) + t * y.abs(), -4.0, 4.0, 800);
            worst = worst.max((soft_threshold_elem(&tensor, t).unwrap().data()[0] - o).abs());
            let o = grid_then_golden(|y| fit(y) + t * y.abs().powf(q), -4.0, 4.0, 8000);
            worst_irls = worst_irls.max((prox_irls(&one, q, t, 10, 1e-6).unwrap()[0] - o).abs());
        } else {
            let v = [g.random_range(-2.0..2.0), g.random_range(-2.0..2.0)];
            let col = Matrix::from_column_slice(2, 1, &v);
            let fit = |a: f64, b: f64| 0.5 * ((a - v[0]).powi(2) + (b - v[1]).powi(2));
            let o = min_2d(|a, b| fit(a, b) + t * a.hypot(b), -3.0, 3.0, 200);
            worst = worst.max(dist(&prox_group_soft(&col, t).unwrap(), o));
            let l = g.random_range(0.5..4.0);
            let o = min_2d(|a, b| l * fit(a, b) + t * (a * a + b * b), -3.0, 3.0, 200);
            worst = worst.max(dist(&prox_ridge_scale(&col, l, t).unwrap(), o));
            let tensor = DenseTensor::new(shape(&[2, 1]), v.to_vec()).unwrap();
            let o = min_2d(|a, b| fit(a, b) + t * (a.abs() + b.abs()), -3.0, 3.0, 200);
            let st = soft_threshold_elem(&tensor, t).unwrap();
            worst = worst.max(dist(&Matrix::from_column_slice(2, 1, st.data()), o));
            let o = min_2d(|a, b| fit(a, b) + t * a.hypot(b).powf(q), -3.0, 3.0, 200);
            worst_irls = worst_irls.max(dist(&prox_irls(&col, q, t, 10, 1e-6).unwrap(), o));
        }
    }
    Outcome {
        pass: worst <= 1e-4 && worst_irls <= 1e-3,
        detail: format!("100 instances, max gap {worst:.1e} (closed forms), {worst_irls:.1e} (IRLS)"),
    }
}

fn gradient_check() -> Outcome {
    let mut g = rng(3);
    let dims = [4, 5, 6];
    let spec = RegularizerSpec::symmetric(3, 1.0).unwrap();
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let d = cp_reconstruct(&random_factors(&mut g, &dims, 2)).map(|v| v + 0.2).unwrap();
        let m = sample_mask(d.shape(), 0.3, trial).unwrap();
        let f = random_factors(&mut g, &dims, 3);
        for j in 0..3 {
            let grad = smooth_grad(&d, &m, &f, j).unwrap();
            let loss = |x: &[f64]| {
                let fj = f.with_factor(j, Matrix::from_column_slice(dims[j], 3, x)).unwrap();
                objective(&d, &m, &fj, 0.0, &spec).unwrap()
            };
            let fd = central_diff(loss, f.factor(j).as_slice(), 1e-6);
            let fd = Matrix::from_column_slice(dims[j], 3, &fd);
            worst = worst.max((&grad - &fd).norm() / grad.norm());
        }
    }
    Outcome { pass: worst < 1e-6, detail: format!("20 instances x 3 modes, max relative gap {worst:.1e}") }
}

fn exact_fit() -> Outcome {
    let s = shape(&[10, 10, 10]);
    let full = ObservationMask::full(s.clone());
    let mut worst_lrtc = 0.0f64;
    let mut max_iters = 0;
    let mut cases = vec![(102, 0, 2)];
    cases.extend((0..5).map(|t| (t, 0, 1)));
    for (truth_seed, init_seed, k) in cases {
        let truth = cp_reconstruct(&init_factors(&s, 1, truth_seed)).scale(10.0).unwrap();
        for solver in [LrtcSolver::Bcde, LrtcSolver::QuasiNewton] {
            let mut cfg = LrtcConfig::new(k, 0.0, RegularizerSpec::symmetric(3, 1.0 / 3.0).unwrap());
            cfg.solver = solver;
            cfg.t_max = 200;
            cfg.rng_seed = init_seed;
            let r = lrtc::solve(&truth, &full, &cfg).unwrap();
            worst_lrtc = worst_lrtc.max(relative_error(&truth, &r.recovered, None).unwrap());
            max_iters = max_iters.max(r.iterations);
        }
    }
    let truth = cp_reconstruct(&init_factors(&s, 1, 7)).scale(10.0).unwrap();
    let mut worst_trpca = 0.0f64;
    for (kind, q) in [
        (RegularizerKind::SymmetricPd { p: 1.0 / 3.0 }, None),
        (RegularizerKind::AsymmetricB { q: 0.5 }, None),
        (RegularizerKind::SymmetricPd { p: 2.0 / 3.0 }, None),
        (RegularizerKind::SymmetricPd { p: 1.0 / 3.0 }, Some(0.5)),
    ] {
        let mut cfg = TrpcaConfig::new(1, 0.0, 1e6, RegularizerSpec::new(kind, 3).unwrap());
        cfg.q = q;
        let r = trpca_solve(&truth, &cfg).unwrap();
        worst_trpca = worst_trpca.max(relative_error(&truth, &r.solve.recovered, None).unwrap());
    }
    Outcome {
        pass: worst_lrtc < 1e-4 && max_iters <= 200 && worst_trpca < 1e-4,
        detail: format!(
            "LRTC worst error {worst_lrtc:.1e} in <= {max_iters} iterations, TRPCA worst {worst_trpca:.1e}"
        ),
    }
}

fn best_positive(report: &cp_enr::harness::ExperimentReport) -> (f64, f64) {
    report
        .summaries
        .iter()
        .filter(|s| s.lambda > 0.0 && s.mean_error.is_finite())
        .map(|s| (s.mean_error, s.lambda))
        .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a })
}

fn regularization_helps() -> Outcome {
    let mut spec = ExperimentSpec::lrtc_default();
    spec.lambdas = std::iter::once(0.0).chain(log_grid(0.01, 500.0, 20)).collect();
    let report = run_experiment(&spec).unwrap();
    let plain = report.summaries[0].mean_error;
    let (tuned, lambda) = best_positive(&report);
    Outcome {
        pass: tuned < plain,
        detail: format!("mean error tuned {tuned:.4} (λ={lambda:.3}) vs λ=0 {plain:.4}"),
    }
}

fn p_trend() -> Outcome {
    let mut spec = ExperimentSpec::lrtc_default();
    spec.rate = 0.9;
    let mut best = vec![];
    for p in [1.0 / 3.0, 1.0] {
        spec.regularizer = RegularizerKind::SymmetricPd { p };
        best.push(best_positive(&run_experiment(&spec).unwrap()));
    }
    Outcome {
        pass: best[0].0 <= best[1].0,
        detail: format!(
            "missing 0.9: p=1/3 {:.4} (λ={:.3}) vs p=1 {:.4} (λ={:.3})",
            best[0].0, best[0].1, best[1].0, best[1].1
        ),
    }
}

// observed median final rank at the tuned λ, pinned
const PINNED_MEDIAN_RANK: f64 = 5.0;

fn adaptive_rank() -> Outcome {
    let mut spec = ExperimentSpec::lrtc_default();
    spec.rate = 0.5;
    let (r, k) = (spec.rank, spec.k_init);
    let report = run_experiment(&spec).unwrap();
    let (_, lambda) = best_positive(&report);
    let ranks: Vec<usize> = report.runs_at(lambda).iter().map(|(_, o)| o.metrics.final_rank).collect();
    let med = median(&ranks);
    Outcome {
        pass: ranks.len() == spec.seeds.len()
            && ranks.iter().all(|&x| (r..=k).contains(&x))
            && med == PINNED_MEDIAN_RANK
            && med == r as f64,
        detail: format!("λ={lambda:.3}, final ranks {ranks:?}, median {med}"),
    }
}

fn trpca_ablation() -> Outcome {
    let mut pass = true;
    let mut detail = vec![];
    for (name, kind) in [
        ("p=1/3 asymmetric", RegularizerKind::AsymmetricB { q: 0.5 }),
        ("p=1/d group", RegularizerKind::SymmetricPd { p: 1.0 / 3.0 }),
    ] {
        let mut spec = ExperimentSpec::trpca_default();
        spec.regularizer = kind;
        spec.lambda_e = 0.2;
        spec.lambdas = log_grid(0.01, 500.0, 8);
        let (tuned, lambda) = best_positive(&run_experiment(&spec).unwrap());
        spec.lambda_e = 0.0;
        spec.lambdas = vec![lambda];
        let ablated = run_experiment(&spec).unwrap().summaries[0].mean_error;
        pass &= tuned <= 0.5 * ablated;
        detail.push(format!("{name} {tuned:.4} (λx={lambda:.3}) vs λe=0 {ablated:.4}"));
    }
    Outcome { pass, detail: detail.join("; ") }
}

fn solver_contracts() -> Outcome {
    let mut g = rng(9);
    let monotone = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
    let mut als_ok = 0;
    for i in 0..50 {
        let dims: Vec<usize> = (0..3).map(|_| g.random_range(3..7)).collect();
        let t = cp_reconstruct(&random_factors(&mut g, &dims, 2));
        let data = t
            .data()
            .iter()
            .map(|v| v + 0.05 * g.random_range(-1.0..1.0) + if g.random_bool(0.1) { 3.0 } else { 0.0 })
            .collect();
        let d = DenseTensor::new(t.shape().clone(), data).unwrap();
        let mut cfg = TrpcaConfig::new(
            g.random_range(1..5),
            g.random_range(0.0..2.0),
            g.random_range(0.01..1.0),
            RegularizerSpec::symmetric(3, 2.0 / 3.0).unwrap(),
        );
        cfg.t_max = 100;
        cfg.rng_seed = i;
        if monotone(&trpca_als_solve(&d, &cfg).unwrap().solve.objective_trace()) {
            als_ok += 1;
        }
    }
    let mut bcde_ok = 0;
    for i in 0..10 {
        let t = cp_reconstruct(&random_factors(&mut g, &[6, 7, 8], 3));
        let data = t.data().iter().map(|v| v + 0.1 * g.random_range(-1.0..1.0)).collect();
        let d = DenseTensor::new(t.shape().clone(), data).unwrap();
        let m = sample_mask(d.shape(), 0.5, i).unwrap();
        let p = [1.0 / 3.0, 2.0 / 3.0, 1.0][i as usize % 3];
        let mut cfg = LrtcConfig::new(5, 0.2, RegularizerSpec::symmetric(3, p).unwrap());
        cfg.delta = 0.0;
        cfg.t_max = 150;
        cfg.rng_seed = i;
        if monotone(&lrtc::solve(&d, &m, &cfg).unwrap().objective_trace()) {
            bcde_ok += 1;
        }
    }
    let mut dual_ok = 0;
    for i in 0..10 {
        let d = cp_reconstruct(&random_factors(&mut g, &[5, 6, 7], 2)).scale(3.0).unwrap();
        let kind = if i % 2 == 0 {
            RegularizerKind::SymmetricPd { p: 1.0 / 3.0 }
        } else {
            RegularizerKind::AsymmetricB { q: 0.5 }
        };
        let mut cfg = TrpcaConfig::new(3, 0.01, 1.0, RegularizerSpec::new(kind, 3).unwrap());
        cfg.rng_seed = i;
        let mut st = AdmmState::new(&d, &cfg).unwrap();
        st.step(&d, &cfg).unwrap();
        let exact =
            st.x.rank() == 3 && (0..st.y.len()).all(|j| st.z[j] == (&st.y[j] - st.x.factor(j)) * cfg.mu);
        if exact {
            dual_ok += 1;
        }
    }
    Outcome {
        pass: als_ok == 50 && bcde_ok == 10 && dual_ok == 10,
        detail: format!(
            "ALS monotone {als_ok}/50, BCDE δ=0 monotone {bcde_ok}/10, dual step exact {dual_ok}/10"
        ),
    }
}

fn main() {
    let results = [
        criterion(1, "regularizer identities", 5.0, regularizer_identities),
        criterion(2, "prox oracles", 10.0, prox_oracles),
        criterion(3, "gradient vs finite differences", 5.0, gradient_check),
        criterion(4, "exact fit", 10.0, exact_fit),
        criterion(5, "regularization helps", 300.0, regularization_helps),
        criterion(6, "p trend", 600.0, p_trend),
        criterion(7, "adaptive rank", f64::INFINITY, adaptive_rank),
        criterion(8, "robust PCA ablation", 300.0, trpca_ablation),
        criterion(9, "solver contracts", 60.0, solver_contracts),
    ];
    let failed: Vec<usize> = (1..=9).filter(|i| !results[i - 1]).collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
