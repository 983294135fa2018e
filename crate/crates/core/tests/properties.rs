//! Invariants checked on randomly generated inputs.

use parabolic_ls::cubes::{
    bmo_norm, inf_oscillation, oscillation, BmoForm, CubeSearchPolicy, ParabolicCube,
};
use parabolic_ls::extension::{extend_axis, vandermonde_coeffs};
use parabolic_ls::families::random_trig;
use parabolic_ls::grid::{anisotropic_dilate, parabolic_distance, AnisotropicGrid, SampledField};
use parabolic_ls::harness::{log_plus, verify_theorem1, HarnessConfig};
use parabolic_ls::io::{decode_field, encode_field};
use parabolic_ls::littlewood_paley::{build_partition, lizorkin_triebel_norm, BumpProfile};
use parabolic_ls::norms::{lp_norm, parabolic_sobolev_norm, SobolevOrder};
use parabolic_ls::pde::{self, InitialGradient, PdeConfig};
use parabolic_ls::spectral::{forward_transform, inverse_transform, physical_energy};
use parabolic_ls::Exponent;
use proptest::prelude::*;

fn periodic(nx: usize, nt: usize) -> AnisotropicGrid {
    AnisotropicGrid::new(1, vec![1.0], 1.0, vec![nx, nt]).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn exponent() -> impl Strategy<Value = Exponent> {
    prop_oneof![
        Just(Exponent::Infinite),
        (1.0f64..4.0).prop_map(|p| Exponent::new(p).unwrap())
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transform_is_unitary_and_invertible(seed in any::<u64>(), nx in 3usize..6, nt in 3usize..6) {
        let u = random_trig(&periodic(1 << nx, 1 << nt), seed, 3, 6).unwrap();
        let spec = forward_transform(&u);
        prop_assert!(close(spec.energy(), physical_energy(&u), 1e-12));
        let back = inverse_transform(&spec).unwrap();
        prop_assert!(back.sub(&u).unwrap().max_abs() <= 1e-13 * u.max_abs().max(1.0));
    }

    #[test]
    fn parabolic_distance_scales_with_dilation(x in -3.0f64..3.0, t in -3.0f64..3.0, eta in 0.1f64..10.0) {
        let z = [x, t];
        let d = anisotropic_dilate(&z, eta).unwrap();
        prop_assert!(close(parabolic_distance(&d), eta * parabolic_distance(&z), 1e-12));
    }

    #[test]
    fn band_norms_are_homogeneous(seed in any::<u64>(), lambda in -5.0f64..5.0, p in exponent(), q in exponent()) {
        let g = periodic(32, 32);
        let partition = build_partition(&g, BumpProfile::default()).unwrap();
        let u = random_trig(&g, seed, 4, 6).unwrap();
        let a = lizorkin_triebel_norm(&u, &partition, 0.0, p, q, true).unwrap();
        let b = lizorkin_triebel_norm(&u.scale(lambda).unwrap(), &partition, 0.0, p, q, true).unwrap();
        prop_assert!(close(b, lambda.abs() * a, 1e-10));
    }

    #[test]
    fn lp_norm_satisfies_triangle_inequality(s1 in any::<u64>(), s2 in any::<u64>(), p in exponent()) {
        let g = periodic(16, 16);
        let (u, v) = (random_trig(&g, s1, 3, 5).unwrap(), random_trig(&g, s2, 3, 5).unwrap());
        let d = g.extent();
        let sum = lp_norm(&u.add(&v).unwrap(), p, &d).unwrap();
        prop_assert!(sum <= lp_norm(&u, p, &d).unwrap() + lp_norm(&v, p, &d).unwrap() + 1e-12);
    }

    #[test]
    fn sobolev_norm_is_homogeneous(seed in any::<u64>(), lambda in -4.0f64..4.0) {
        let g = periodic(32, 32);
        let u = random_trig(&g, seed, 3, 5).unwrap();
        let order = SobolevOrder::new(1).unwrap();
        let a = parabolic_sobolev_norm(&u, order, &g.extent()).unwrap().value;
        let b = parabolic_sobolev_norm(&u.scale(lambda).unwrap(), order, &g.extent()).unwrap().value;
        prop_assert!(close(b, lambda.abs() * a, 1e-12));
    }

    #[test]
    fn bmo_ignores_constants_and_is_a_seminorm(
        s1 in any::<u64>(), s2 in any::<u64>(), c in -10.0f64..10.0, lambda in -3.0f64..3.0
    ) {
        let g = periodic(24, 24).bounded();
        let (u, v) = (random_trig(&g, s1, 3, 5).unwrap(), random_trig(&g, s2, 3, 5).unwrap());
        let d = g.extent();
        let policy = CubeSearchPolicy::default();
        let bmo = |f: &SampledField| bmo_norm(f, &d, &policy, BmoForm::Oscillation).unwrap().value;
        let base = bmo(&u);
        prop_assert!(close(bmo(&u.map(|x| x + c).unwrap()), base, 1e-10));
        prop_assert!(close(bmo(&u.scale(lambda).unwrap()), lambda.abs() * base, 1e-12));
        prop_assert!(bmo(&u.add(&v).unwrap()) <= base + bmo(&v) + 1e-12);
    }

    #[test]
    fn inf_form_sits_between_half_and_full_oscillation(
        seed in any::<u64>(), r in 0.05f64..0.4, fx in 0.0f64..1.0, ft in 0.0f64..1.0
    ) {
        let g = periodic(32, 32).bounded();
        let u = random_trig(&g, seed, 5, 6).unwrap().map(|v| v.abs().sqrt()).unwrap();
        let q = ParabolicCube::new(vec![r + fx * (1.0 - 2.0 * r), r * r + ft * (1.0 - 2.0 * r * r)], r).unwrap();
        let osc = oscillation(&u, &q).unwrap();
        let (inf, _) = inf_oscillation(&u, &q).unwrap();
        prop_assert!(inf <= osc + 1e-12);
        prop_assert!(inf >= 0.5 * osc - 1e-12);
    }

    #[test]
    fn extension_reproduces_low_degree_polynomials(
        terms in 1usize..5, coef in prop::collection::vec(-1.0f64..1.0, 4), axis in 0usize..2
    ) {
        let scheme = vandermonde_coeffs(terms).unwrap();
        let poly = |x: f64| coef[..terms].iter().rev().fold(0.0, |acc, c| acc * x + c);
        let g = periodic(20, 20).bounded();
        let u = SampledField::from_fn(g, |z| poly(z[axis])).unwrap();
        let ext = extend_axis(&u, axis, &scheme).unwrap();
        let exact = SampledField::from_fn(ext.grid().clone(), |z| poly(z[axis])).unwrap();
        prop_assert!(ext.sub(&exact).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn log_plus_is_clipped_log(x in 0.0f64..1e6) {
        let v = log_plus(x);
        if x <= 1.0 {
            prop_assert_eq!(v, 0.0);
        } else {
            prop_assert_eq!(v, x.ln());
        }
    }

    #[test]
    fn field_files_round_trip(seed in any::<u64>(), nx in 2usize..9, nt in 2usize..9, bounded in any::<bool>()) {
        let g = periodic(2 * nx, 2 * nt);
        let g = if bounded { g.bounded() } else { g };
        let u = SampledField::from_fn(g, |z| (seed as f64 * 1e-9 + z[0] * 3.1).sin() * z[1]).unwrap();
        let bytes = encode_field(&u, None).unwrap();
        let (_, back) = decode_field(bytes.as_slice()).unwrap();
        prop_assert_eq!(back, u);
    }

    #[test]
    fn heat_flow_keeps_the_mean(amplitude in 0.01f64..0.5) {
        let cfg = PdeConfig {
            modes: 32,
            dt: 1e-3,
            t_end: 0.05,
            v0: InitialGradient::Sine { amplitude },
            forcing: false,
            snapshots: 5,
            diag_space: 16,
            ..PdeConfig::default()
        };
        let stepper = pde::Stepper::new(&cfg).unwrap();
        let mut s = stepper.initial_state();
        let mean = |p: Vec<f64>| p.iter().sum::<f64>() / p.len() as f64;
        let m0 = mean(stepper.perturbation(&s));
        for _ in 0..cfg.step_count().unwrap() {
            stepper.step(&mut s).unwrap();
        }
        prop_assert!((mean(stepper.perturbation(&s)) - m0).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn whole_space_report_scales_as_its_formula(seed in any::<u64>(), lambda in 0.05f64..20.0) {
        let g = AnisotropicGrid::with_origin(1, vec![4.0], 4.0, vec![32, 32], vec![-2.0, -2.0]).unwrap();
        let u = random_trig(&g, seed, 2, 4).unwrap();
        let cfg = HarnessConfig::default();
        let a = verify_theorem1(&u, "u", &cfg).unwrap();
        let b = verify_theorem1(&u.scale(lambda).unwrap(), "u", &cfg).unwrap();
        let (bmo, w) = (a.bmo.unwrap(), a.sobolev.unwrap());
        prop_assert!(close(b.lhs, lambda * a.lhs, 1e-12));
        prop_assert!(close(b.bmo.unwrap(), lambda * bmo, 1e-10));
        prop_assert!(close(b.sobolev.unwrap(), lambda * w, 1e-12));
        let predicted = lambda * a.lhs / (1.0 + lambda * bmo * (1.0 + log_plus(lambda * w)));
        prop_assert!(close(b.implied_constant, predicted, 1e-9));
    }

    #[test]
    fn reports_are_reproducible(seed in any::<u64>()) {
        let g = AnisotropicGrid::with_origin(1, vec![4.0], 4.0, vec![32, 32], vec![-2.0, -2.0]).unwrap();
        let u = random_trig(&g, seed, 2, 4).unwrap();
        let cfg = HarnessConfig::default();
        let a = serde_json::to_vec(&verify_theorem1(&u, "u", &cfg).unwrap()).unwrap();
        let b = serde_json::to_vec(&verify_theorem1(&u, "u", &cfg).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }
}
