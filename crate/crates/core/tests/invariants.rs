//! Property tests of the structural invariants over every registered model family.

use hsb_core::chart::{apply_j, complexify, realify, real_metric_from_h};
use hsb_core::comparison::ModelSpace;
use hsb_core::connections::{christoffel, connection_difference_defect, torsion_sb};
use hsb_core::curvature::curvature;
use hsb_core::geodesy::{exp_jacobian, integrate_geodesic, normalize, transport_operator};
use hsb_core::{model_from_str, ChartPoint, Flavor, MetricModel, TangentVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MODELS: [&str; 7] = [
    "flat(1)",
    "flat(2)",
    "fubini_study(1,1.0)",
    "fubini_study(2,1.0)",
    "hopf(2)",
    "fs_perturbed(1,0.1)",
    "fs_perturbed(2,0.1)",
];

fn kahler(spec: &str) -> bool {
    spec.starts_with("flat") || spec.starts_with("fubini_study")
}

/// A registered model and a seeded point of its domain.
fn model_point() -> impl Strategy<Value = (&'static str, MetricModel, ChartPoint)> {
    (0..MODELS.len(), any::<u64>()).prop_map(|(i, seed)| {
        let model = model_from_str(MODELS[i]).unwrap();
        let p = model.random_point(&mut ChaCha8Rng::seed_from_u64(seed));
        (MODELS[i], model, p)
    })
}

fn vectors(n: usize, count: usize) -> impl Strategy<Value = Vec<TangentVector>> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2 * n), count)
        .prop_map(|vs| vs.into_iter().map(TangentVector::from_real).collect())
}

fn with_vectors(count: usize) -> impl Strategy<Value = (&'static str, MetricModel, ChartPoint, Vec<TangentVector>)> {
    model_point().prop_flat_map(move |(s, m, p)| {
        let n = m.n();
        (Just(s), Just(m), Just(p), vectors(n, count))
    })
}

fn nonzero(v: &TangentVector) -> bool {
    v.euclidean_norm() > 1e-3
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn metric_is_hermitian_and_matches_its_real_form((_s, model, p) in model_point()) {
        let ev = model.eval_metric(&p).unwrap();
        let scale = ev.h.norm();
        prop_assert!((&ev.h - ev.h.adjoint()).norm() <= 1e-12 * scale);
        let eig = nalgebra::SymmetricEigen::new(ev.g_real.clone());
        prop_assert!(eig.eigenvalues.min() > 0.0);
        let rebuilt = real_metric_from_h(&ev.h);
        prop_assert!((&rebuilt - &ev.g_real).norm() <= 1e-12 * ev.g_real.norm());
    }

    #[test]
    fn metric_is_j_invariant_and_omega_skew((_s, model, p, v) in with_vectors(2)) {
        let (x, y) = (&v[0], &v[1]);
        let g = model.pairings(&p, x, y).unwrap().g_real_val;
        let gj = model.pairings(&p, &apply_j(x), &apply_j(y)).unwrap().g_real_val;
        let scale = 1.0 + g.abs();
        prop_assert!((g - gj).abs() <= 1e-10 * scale);
        let w = model.fundamental_form(&p, x, y).unwrap() + model.fundamental_form(&p, y, x).unwrap();
        prop_assert!(w.abs() <= 1e-12 * scale);
    }

    #[test]
    fn complexification_round_trips(x in prop::collection::vec(-10.0f64..10.0, 2..=6usize).prop_filter("even", |x| x.len() % 2 == 0)) {
        let back = realify(&complexify(&x));
        for (a, b) in x.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()));
        }
        let v = TangentVector::from_real(x.clone());
        let again = TangentVector::from_holomorphic(&v.v10());
        for (a, b) in x.iter().zip(&again.x) {
            prop_assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn d_omega_is_alternating_and_closed_when_kahler((s, model, p, v) in with_vectors(3)) {
        let (x, y, z) = (&v[0], &v[1], &v[2]);
        let xyz = model.d_omega(&p, x, y, z).unwrap();
        let yxz = model.d_omega(&p, y, x, z).unwrap();
        let xzy = model.d_omega(&p, x, z, y).unwrap();
        let scale = 1.0 + xyz.abs();
        prop_assert!((xyz + yxz).abs() <= 1e-10 * scale);
        prop_assert!((xyz + xzy).abs() <= 1e-10 * scale);
        if kahler(s) {
            prop_assert!(xyz.abs() <= 1e-8);
        }
    }

    #[test]
    fn connection_tables_are_conjugation_symmetric((s, model, p) in model_point()) {
        let sb = christoffel(Flavor::StromingerBismut, &model, &p).unwrap();
        let lc = christoffel(Flavor::LeviCivita, &model, &p).unwrap();
        prop_assert!(sb.conjugation_defect() <= 1e-12 * (1.0 + sb.gamma.max_abs()));
        prop_assert!(lc.conjugation_defect() <= 1e-12 * (1.0 + lc.gamma.max_abs()));
        prop_assert!(connection_difference_defect(&model, &p).unwrap() <= 1e-8);
        if kahler(s) {
            prop_assert!(sb.gamma.max_abs_diff(&lc.gamma) <= 1e-8);
        }
    }

    #[test]
    fn torsion_is_totally_skew((_s, model, p, v) in with_vectors(3)) {
        let t = torsion_sb(&model, &p).unwrap();
        let (x, y, z) = (&v[0], &v[1], &v[2]);
        let xyz = t.eval(x, y, z);
        let scale = 1.0 + xyz.abs();
        prop_assert!((xyz + t.eval(y, x, z)).abs() <= 1e-10 * scale);
        prop_assert!((xyz + t.eval(x, z, y)).abs() <= 1e-10 * scale);
        prop_assert!((xyz - t.eval(y, z, x)).abs() <= 1e-10 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn curvature_symmetries((s, model, p, v) in with_vectors(4)) {
        let sb = curvature(Flavor::StromingerBismut, &model, &p).unwrap();
        let lc = curvature(Flavor::LeviCivita, &model, &p).unwrap();
        let scale = 1.0 + sb.r.max_abs().max(lc.r.max_abs());
        prop_assert!(sb.skew_defect() <= 1e-8 * scale);
        prop_assert!(lc.skew_defect() <= 1e-8 * scale);
        prop_assert!(sb.type_vanishing_defect() <= 1e-8 * scale);
        prop_assert!(sb.conjugation_defect() <= 1e-10 * scale);
        prop_assert!(lc.conjugation_defect() <= 1e-10 * scale);
        prop_assert!(lc.pair_interchange_defect(&v[0], &v[1], &v[2], &v[3]) <= 1e-7 * scale);
        if kahler(s) {
            prop_assert!(sb.r.max_abs_diff(&lc.r) <= 1e-7);
        }
    }

    #[test]
    fn hsc_is_scale_invariant_and_ricci_real((_s, model, p, v) in with_vectors(2), c in prop_oneof![-5.0f64..-0.2, 0.2f64..5.0]) {
        prop_assume!(nonzero(&v[0]));
        let sb = curvature(Flavor::StromingerBismut, &model, &p).unwrap();
        let a = sb.hsc(&v[0]).unwrap();
        let b = sb.hsc(&v[0].scaled(c)).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        let ric = sb.ricci_real(&v[0], &v[1]);
        prop_assert!(ric.im.abs() <= 1e-10 * (1.0 + ric.re.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn transport_is_isometric_and_sb_commutes_with_j((_s, model, p, v) in with_vectors(1)) {
        prop_assume!(nonzero(&v[0]));
        let u = normalize(&model, &p, &v[0]).unwrap();
        let Ok(curve) = integrate_geodesic(&model, &p, &u, 0.5, 200) else { return Ok(()) };
        prop_assert!(curve.geodesic_residual <= 1e-6);
        for flavor in [Flavor::LeviCivita, Flavor::StromingerBismut] {
            let op = transport_operator(flavor, &model, &curve).unwrap();
            prop_assert!(op.isometry_defect(&model, &curve).unwrap() <= 1e-8);
            if flavor == Flavor::StromingerBismut {
                prop_assert!(op.j_commutation_defect() <= 1e-8);
            }
        }
    }

    #[test]
    fn small_normal_jacobian_is_nearly_scalar((_s, model, p, v) in with_vectors(1)) {
        prop_assume!(nonzero(&v[0]));
        let rho = 1e-3;
        let jac = exp_jacobian(&model, &p, rho, &v[0]).unwrap();
        let m = jac.a.nrows();
        let gap = (&jac.a / rho - nalgebra::DMatrix::<f64>::identity(m, m)).norm();
        prop_assert!(gap <= 1e-5, "gap {gap}");
    }

    #[test]
    fn sn_solves_its_ode(k in -4.0f64..4.0, t in 0.01f64..1.2) {
        let sn = ModelSpace::new(k);
        prop_assert_eq!(sn.sn(0.0), 0.0);
        prop_assert!((sn.sn_prime(0.0) - 1.0).abs() <= 1e-15);
        let h = 1e-4;
        let second = (sn.sn_prime(t + h) - sn.sn_prime(t - h)) / (2.0 * h);
        prop_assert!((second + k * sn.sn(t)).abs() <= 1e-7);
        let near_zero = ModelSpace::new(k * 1e-14);
        prop_assert!((near_zero.sn(t) - t).abs() <= 1e-12);
    }
}
