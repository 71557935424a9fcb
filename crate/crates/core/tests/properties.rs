mod common;

use common::{rng, shape};
use cp_enr::harness::relative_error;
use cp_enr::io::{read_mask, read_tensor, write_mask, write_tensor};
use cp_enr::linalg::{khatri_rao_gram, spectral_norm_est, SPECTRAL_MAX_ITERS};
use cp_enr::regularizers::{
    balance_factors, prox_group_soft, prox_irls, prox_ridge_scale, soft_threshold_elem,
};
use cp_enr::*;
use proptest::prelude::*;

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..5, 2..5)
}

fn factors_strategy() -> impl Strategy<Value = FactorSet> {
    (dims_strategy(), 1usize..5).prop_flat_map(|(dims, k)| {
        let mats: Vec<_> = dims
            .iter()
            .map(|&n| {
                prop::collection::vec(-2.0f64..2.0, n * k)
                    .prop_map(move |v| Matrix::from_column_slice(n, k, &v))
            })
            .collect();
        mats.prop_map(|m| FactorSet::new(m).unwrap())
    })
}

fn tensor_strategy() -> impl Strategy<Value = DenseTensor> {
    dims_strategy().prop_flat_map(|dims| {
        let n: usize = dims.iter().product();
        prop::collection::vec(-5.0f64..5.0, n).prop_map(move |v| DenseTensor::new(shape(&dims), v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fold_inverts_unfold(t in tensor_strategy()) {
        for j in 0..t.shape().order() {
            let m = unfold(&t, j).unwrap();
            prop_assert_eq!(m.nrows(), t.shape().dims()[j]);
            prop_assert_eq!(fold(&m, j, t.shape()).unwrap(), t.clone());
        }
    }

    #[test]
    fn unfolded_cp_is_factor_times_khatri_rao(f in factors_strategy()) {
        let t = cp_reconstruct(&f);
        for j in 0..f.order() {
            let kr = khatri_rao(&f, j).unwrap();
            let lhs = unfold(&t, j).unwrap();
            let rhs = f.factor(j) * kr.transpose();
            prop_assert!((lhs - rhs).abs().max() <= 1e-12 * (1.0 + t.frobenius_norm()));
        }
    }

    #[test]
    fn gram_matches_explicit_product(f in factors_strategy()) {
        for j in 0..f.order() {
            let kr = khatri_rao(&f, j).unwrap();
            let g = kr.transpose() * &kr;
            prop_assert!((g - khatri_rao_gram(&f, j)).abs().max() <= 1e-12 * (1.0 + kr.norm_squared()));
        }
    }

    #[test]
    fn opposite_rescaling_leaves_tensor_unchanged(
        f in factors_strategy(),
        c in 0.1f64..10.0,
    ) {
        let mut a = f.factor(0).clone();
        let mut b = f.factor(1).clone();
        a.column_mut(0).scale_mut(c);
        b.column_mut(0).scale_mut(1.0 / c);
        let g = f.with_factor(0, a).unwrap().with_factor(1, b).unwrap();
        let (t0, t1) = (cp_reconstruct(&f), cp_reconstruct(&g));
        prop_assert!(t0.sub(&t1).unwrap().frobenius_norm() <= 1e-12 * (1.0 + t0.frobenius_norm()));
    }

    #[test]
    fn balancing_keeps_tensor_and_never_raises_regularizer(f in factors_strategy()) {
        let b = balance_factors(&f);
        let (t0, t1) = (cp_reconstruct(&f), cp_reconstruct(&b));
        prop_assert!(t0.sub(&t1).unwrap().frobenius_norm() <= 1e-12 * (1.0 + t0.frobenius_norm()));
        for p in [0.25, 0.5, 1.0] {
            let spec = RegularizerSpec::symmetric(f.order(), p).unwrap();
            let before = spec.reg_value(&f).unwrap();
            let after = spec.reg_value(&b).unwrap();
            prop_assert!(after <= before * (1.0 + 1e-12) + 1e-300);
        }
    }

    #[test]
    fn spectral_norm_between_column_and_frobenius_norms(
        n in 1usize..8,
        k in 1usize..6,
        seed in any::<u64>(),
    ) {
        let m = common::uniform_matrix(&mut rng(seed), n, k, 3.0);
        let s = spectral_norm_est(&m, 1e-10, SPECTRAL_MAX_ITERS).value;
        let max_col = m.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
        prop_assert!(s <= m.norm() * (1.0 + 1e-12));
        prop_assert!(s >= max_col * (1.0 - 1e-6));
    }

    #[test]
    fn column_prox_maps_are_non_expansive(
        a in prop::collection::vec(-3.0f64..3.0, 6),
        b in prop::collection::vec(-3.0f64..3.0, 6),
        t in 0.0f64..4.0,
    ) {
        let (a, b) = (Matrix::from_column_slice(3, 2, &a), Matrix::from_column_slice(3, 2, &b));
        let d = (&a - &b).norm();
        let gs = (prox_group_soft(&a, t).unwrap() - prox_group_soft(&b, t).unwrap()).norm();
        prop_assert!(gs <= d * (1.0 + 1e-12) + 1e-15);
        let rs = (prox_ridge_scale(&a, 1.0, t).unwrap() - prox_ridge_scale(&b, 1.0, t).unwrap()).norm();
        prop_assert!(rs <= d * (1.0 + 1e-12) + 1e-15);
        let s = shape(&[3, 2]);
        let ta = DenseTensor::new(s.clone(), a.as_slice().to_vec()).unwrap();
        let tb = DenseTensor::new(s, b.as_slice().to_vec()).unwrap();
        let st = soft_threshold_elem(&ta, t).unwrap().sub(&soft_threshold_elem(&tb, t).unwrap()).unwrap();
        prop_assert!(st.frobenius_norm() <= d * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn irls_shrinks_along_each_column(
        g in prop::collection::vec(-3.0f64..3.0, 8),
        q in 0.1f64..0.9,
        lambda in 0.0f64..2.0,
    ) {
        let g = Matrix::from_column_slice(4, 2, &g);
        let y = prox_irls(&g, q, lambda, 10, 1e-6).unwrap();
        for (yc, gc) in y.column_iter().zip(g.column_iter()) {
            let s = yc.dot(&gc) / gc.norm_squared().max(1e-300);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&s));
            prop_assert!((yc - gc * s).norm() <= 1e-12 * (1.0 + gc.norm()));
        }
    }

    #[test]
    fn relative_error_is_scale_invariant(
        t in tensor_strategy(),
        c in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0],
        seed in any::<u64>(),
    ) {
        prop_assume!(t.frobenius_norm() > 0.0);
        let noise = t.map(|v| v * 0.3 + (seed % 7) as f64 * 0.01).unwrap();
        let e = t.add(&noise).unwrap();
        let r0 = relative_error(&t, &e, None).unwrap();
        let r1 = relative_error(&t.scale(c).unwrap(), &e.scale(c).unwrap(), None).unwrap();
        prop_assert!((r0 - r1).abs() <= 1e-14 * (1.0 + r0));
    }

    #[test]
    fn mask_and_complement_partition_the_tensor(
        dims in dims_strategy(),
        rate in 0.0f64..0.99,
        seed in any::<u64>(),
    ) {
        let s = shape(&dims);
        let m = sample_mask(&s, rate, seed).unwrap();
        let c = m.complement();
        prop_assert_eq!(m.count() + c.count(), s.len());
        prop_assert!(m.offsets().iter().all(|o| !c.contains(*o)));
        prop_assert!(m.offsets().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn files_round_trip(t in tensor_strategy(), rate in 0.0f64..0.99, seed in any::<u64>()) {
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        prop_assert_eq!(read_tensor(&mut buf.as_slice()).unwrap(), t.clone());
        let m = sample_mask(t.shape(), rate, seed).unwrap();
        let mut buf = Vec::new();
        write_mask(&mut buf, &m).unwrap();
        prop_assert_eq!(read_mask(&mut buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn masked_residual_vanishes_off_mask(f in factors_strategy(), rate in 0.0f64..0.99, seed in any::<u64>()) {
        let t = cp_reconstruct(&f);
        let noisy = t.map(|v| v + 1.0).unwrap();
        let m = sample_mask(t.shape(), rate, seed).unwrap();
        let (r, sq) = masked_residual(&noisy, &f, &m).unwrap();
        for o in m.complement().offsets() {
            prop_assert_eq!(r.data()[*o], 0.0);
        }
        prop_assert!((sq - m.count() as f64).abs() <= 1e-9 * (1.0 + sq));
    }
}
