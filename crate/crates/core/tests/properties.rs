use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cylflow::modulation::SymmetryParams;
use cylflow::nonlinearity::{nonlinear_remainder, random_shape};
use cylflow::rescaling::build_on_s;
use cylflow::spectral_operator::{apply_linearized, build_modes, eigenvalue, propagate_stable};
use cylflow::weighted_space::{
    inner_product, interpolation_check, pivot_norm, random_field, slot_frequency, sobolev_norm,
    sobolev_norm_quadrature, SpectralField,
};
use cylflow::Truncation;

fn field(seed: u64, tr: Truncation, b: f64) -> SpectralField {
    random_field(&mut ChaCha8Rng::seed_from_u64(seed), tr, b, 0.7, 1.0)
}

fn small() -> Truncation {
    Truncation::new(1, 10, 3)
}

fn rel_close(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * x.abs().max(y.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn inner_product_is_symmetric_bilinear(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>(),
                                           c in -3.0f64..3.0, a in 0.4f64..0.6) {
        let tr = small();
        let (f, g, h) = (field(s1, tr, 0.5), field(s2, tr, 0.5), field(s3, tr, 0.5));
        let fg = inner_product(&f, &g, a).unwrap();
        prop_assert!(rel_close(fg, inner_product(&g, &f, a).unwrap(), 1e-12));
        let lhs = inner_product(&f.axpy(c, &g).unwrap(), &h, a).unwrap();
        let rhs = inner_product(&f, &h, a).unwrap() + c * inner_product(&g, &h, a).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn spectral_and_quadrature_norms_agree(seed in any::<u64>(), a in 0.3f64..0.6, s in 0usize..3, two_axes in any::<bool>()) {
        let tr = if two_axes { Truncation::new(2, 5, 2) } else { small() };
        let f = field(seed, tr, 0.5);
        let spectral = sobolev_norm(&f, a, s).unwrap();
        let quadrature = sobolev_norm_quadrature(&f, a, s).unwrap();
        prop_assert!(rel_close(spectral, quadrature, 1e-9), "{} vs {}", spectral, quadrature);
    }

    #[test]
    fn heavier_weight_gives_smaller_norm(seed in any::<u64>(), a in 0.3f64..0.6, gap in 0.0f64..0.2, s in 0usize..3) {
        let f = field(seed, small(), 0.5);
        prop_assert!(sobolev_norm(&f, a + gap, s).unwrap() <= sobolev_norm(&f, a, s).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn higher_order_norm_dominates(seed in any::<u64>(), a in 0.3f64..0.6, s in 0usize..3) {
        let f = field(seed, small(), 0.5);
        prop_assert!(sobolev_norm(&f, a, s).unwrap() <= sobolev_norm(&f, a, s + 1).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn rebasing_round_trips(seed in any::<u64>(), b in 0.3f64..0.7) {
        let f = field(seed, small(), 0.5);
        let back = f.rebased(b).unwrap().rebased(0.5).unwrap();
        let err = back.sub(&f).unwrap().max_abs();
        prop_assert!(err <= 1e-9 * f.max_abs().max(1.0), "{}", err);
    }

    #[test]
    fn binary_encoding_round_trips(seed in any::<u64>(), b in 0.3f64..0.7) {
        let f = field(seed, Truncation::new(2, 4, 2), b);
        prop_assert_eq!(SpectralField::from_le_bytes(&f.to_le_bytes()).unwrap(), f);
    }

    #[test]
    fn operator_is_self_adjoint(s1 in any::<u64>(), s2 in any::<u64>(), a in 0.45f64..0.6) {
        let tr = small();
        let (f, g) = (field(s1, tr, a), field(s2, tr, a));
        let lf_g = inner_product(&apply_linearized(&f, a).unwrap(), &g, a).unwrap();
        let f_lg = inner_product(&f, &apply_linearized(&g, a).unwrap(), a).unwrap();
        prop_assert!((lf_g - f_lg).abs() <= 1e-9 * (1.0 + lf_g.abs()));
    }

    #[test]
    fn basis_functions_are_eigenfunctions(deg in 0usize..10, slot in 0usize..7, a in 0.3f64..0.7) {
        let tr = small();
        let mut e = SpectralField::zeros(tr, a);
        e.set(&[deg], slot, 1.0);
        let le = apply_linearized(&e, a).unwrap();
        let expected = e.scaled(eigenvalue(deg, slot_frequency(slot), a));
        prop_assert!(le.sub(&expected).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn stable_flow_is_a_contracting_semigroup(seed in any::<u64>(), t1 in 0.0f64..2.0, t2 in 0.0f64..2.0, a in 0.5f64..0.54) {
        let tr = small();
        let modes = build_modes(a, tr, 0.5).unwrap();
        let f = modes.project_stable(&field(seed, tr, 0.5)).unwrap();
        let both = propagate_stable(&f, a, t1 + t2).unwrap();
        let split = propagate_stable(&propagate_stable(&f, a, t1).unwrap(), a, t2).unwrap();
        prop_assert!(both.sub(&split).unwrap().max_abs() <= 1e-10 * f.max_abs().max(1e-3));
        prop_assert!(sobolev_norm(&both, a, 0).unwrap() <= sobolev_norm(&f, a, 0).unwrap() * (1.0 + 1e-10));
    }

    #[test]
    fn interpolation_inequality_holds(seed in any::<u64>(), c in 1e-4f64..1.0, fill in 0.05f64..1.0, frac in 0.0f64..1.0,
                                      delta in 0.002f64..0.1) {
        let f = field(seed, small(), 0.5);
        // scale so that the pivot norm is `fill * c <= c`
        let f = f.scaled((fill * c / pivot_norm(&f, delta, 2).unwrap()).sqrt());
        let a = 0.5 + 2.0 * delta * frac;
        let (lhs, rhs) = interpolation_check(&f, a, c, delta, 2).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12), "{} > {}", lhs, rhs);
    }

    #[test]
    fn symmetry_coordinates_round_trip(c in proptest::collection::vec(-1.0f64..1.0, 7)) {
        let p = SymmetryParams::from_coords(2, &c).unwrap();
        prop_assert_eq!(p.coords(), c);
        prop_assert_eq!(p.distance(&p), 0.0);
    }

    #[test]
    fn constant_dilation_clock_is_logarithmic(a in 0.3f64..0.8, t_final in 0.1f64..10.0, frac in 0.0f64..0.99) {
        // constant a: λ² = 2a(T - t), so τ = -ln(1 - t/T) / (2a)
        let rs = build_on_s(0.01, &vec![a; 600], t_final).unwrap();
        let t = frac * t_final;
        let tau = rs.tau_of_t(t).unwrap();
        let exact = -(1.0 - frac).ln() / (2.0 * a);
        prop_assert!((tau - exact).abs() <= 1e-8 * (1.0 + exact), "{} vs {}", tau, exact);
        prop_assert!((rs.t_of_tau(tau).unwrap() - t).abs() <= 1e-9 * t_final);
    }

    #[test]
    fn remainder_vanishes_to_second_order(seed in any::<u64>(), a in 0.5f64..0.54) {
        let tr = Truncation::new(1, 8, 2);
        let xi = random_shape(&mut ChaCha8Rng::seed_from_u64(seed), tr, 0.5, 2, 0.05).unwrap();
        let big = sobolev_norm(&nonlinear_remainder(a, &xi).unwrap(), a, 0).unwrap();
        let tiny = sobolev_norm(&nonlinear_remainder(a, &xi.scaled(0.1)).unwrap(), a, 0).unwrap();
        prop_assert!(nonlinear_remainder(a, &xi.scaled(0.0)).unwrap().max_abs() == 0.0);
        // a tenth of the amplitude leaves about a hundredth of the remainder
        prop_assert!(tiny <= big / 50.0, "{} vs {}", tiny, big);
    }
}
