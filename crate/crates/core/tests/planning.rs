use pfdr_sizer::f_test::{lr_sup_f, plan_f, FEffect};
use pfdr_sizer::ldp::{legendre, n_star_general, solve_t0, CgfModel, Family, SplitSpec};
use pfdr_sizer::normal_t::{lr_sup_t, plan_t, plan_t_mixture, SnrEffect, SnrMixture};
use pfdr_sizer::{min_pfdr, Error, PfdrTarget};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn plan_t_is_the_smallest_attaining_n(alpha in 0.01f64..0.3, pi in 0.05f64..0.6, r in 0.05f64..1.0) {
        let target = PfdrTarget::new(alpha, pi).unwrap();
        let rep = plan_t(&target, SnrEffect::new(r).unwrap(), 1_000_000).unwrap();
        let n = rep.n_exact.unwrap();
        let snr = SnrEffect::new(r).unwrap();
        prop_assert!(lr_sup_t(n, snr).unwrap() >= target.q());
        if n > 1 {
            prop_assert!(lr_sup_t(n - 1, snr).unwrap() < target.q());
        }
        // the attained floor meets the level
        prop_assert!(min_pfdr(pi, lr_sup_t(n, snr).unwrap()).unwrap() <= alpha * (1.0 + 1e-12));
    }

    #[test]
    fn plan_f_is_the_smallest_attaining_n(delta in 0.2f64..2.0, p in 1u64..40) {
        let target = PfdrTarget::new(0.05, 0.1).unwrap();
        let rep = plan_f(&target, FEffect::new(delta, p).unwrap(), 1_000_000).unwrap();
        let n = rep.n_exact.unwrap();
        prop_assert!(lr_sup_f(p, n, delta).unwrap() >= target.q());
        if n > 1 {
            prop_assert!(lr_sup_f(p, n - 1, delta).unwrap() < target.q());
        }
    }

    #[test]
    fn general_n_star_scales_inversely_with_shift(sigma in 0.2f64..5.0, rho in 0.05f64..0.95, d in 0.01f64..2.0) {
        let target = PfdrTarget::new(0.05, 0.1).unwrap();
        let f = Family::normal(sigma).unwrap();
        let split = SplitSpec::new(rho).unwrap();
        let a = n_star_general(&target, &f, &f.tail_index(), split, d).unwrap().n_asymptotic;
        let b = n_star_general(&target, &f, &f.tail_index(), split, 2.0 * d).unwrap().n_asymptotic;
        prop_assert!((a / b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn legendre_is_nonnegative_and_convex(shape in 0.2f64..5.0, u in 0.01f64..3.0) {
        let f = Family::centered_gamma(shape, 1.0).unwrap();
        let (v, eta) = legendre(&f, u).unwrap();
        prop_assert!(v > 0.0 && eta > 0.0);
        let (v2, _) = legendre(&f, 1.1 * u).unwrap();
        let (v3, _) = legendre(&f, 1.2 * u).unwrap();
        prop_assert!(v2 - v <= v3 - v2 + 1e-12);
    }
}

#[test]
fn smaller_effects_need_more_samples() {
    let target = PfdrTarget::new(0.05, 0.1).unwrap();
    let mut last = 0;
    for &r in &[1.0, 0.5, 0.2, 0.1, 0.05] {
        let n = plan_t(&target, SnrEffect::new(r).unwrap(), 1_000_000).unwrap().n_exact.unwrap();
        assert!(n > last);
        last = n;
    }
}

#[test]
fn point_mass_mixture_equals_plain_t_plan() {
    let target = PfdrTarget::new(0.05, 0.2).unwrap();
    for &r in &[0.05, 0.3] {
        let plain = plan_t(&target, SnrEffect::new(r).unwrap(), 1_000_000).unwrap();
        let mix = SnrMixture::discrete(vec![(r, 1.0)], 1.0).unwrap();
        let m = plan_t_mixture(&target, &mix, 1_000_000).unwrap();
        assert_eq!(plain.n_exact, m.n_exact);
        assert!((plain.n_asymptotic / m.n_asymptotic - 1.0).abs() < 1e-12);
    }
}

#[test]
fn unattainable_targets_are_reported() {
    let target = PfdrTarget::new(0.001, 0.01).unwrap();
    match plan_t(&target, SnrEffect::new(0.01).unwrap(), 50) {
        Err(Error::NotAttainable { n_max, rho_at_max, q }) => {
            assert_eq!(n_max, 50);
            assert!(rho_at_max < q);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn tilt_root_solves_its_equation_for_every_family() {
    let families = [
        Family::normal(0.7).unwrap(),
        Family::uniform(3.0).unwrap(),
        Family::centered_gamma(0.3, 2.0).unwrap(),
        Family::centered_gamma(2.0, 0.5).unwrap(),
        Family::normal_score(1.3).unwrap(),
        Family::CauchyScore,
        Family::GammaScore,
    ];
    for f in families {
        let tail = f.tail_index();
        for &rho in &[0.1, 0.5, 0.9] {
            let t0 = solve_t0(&f, &tail, SplitSpec::new(rho).unwrap()).unwrap();
            let rhs = (1.0 + tail.lambda) * rho / (1.0 - rho);
            assert!((t0 * f.d1(t0) / rhs - 1.0).abs() < 1e-10, "{f:?} rho={rho}");
        }
    }
}
