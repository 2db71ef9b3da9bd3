use proptest::prelude::*;
use qlocal::concentration::{correlated_tail_two_term, tail_bound_correlated, tail_bound_product, F_and_sstar, F_tilde};
use qlocal::observable::LocalObservable;
use qlocal::random::{instance_rng, random_local_observable};

proptest! {
    #[test]
    fn explicit_rate_is_below_optimal(x in 0.0f64..1e3) {
        prop_assert!(F_tilde(x).unwrap() <= F_and_sstar(x).unwrap().0 * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn rate_is_monotone(x in 0.0f64..50.0, dx in 1e-6f64..5.0) {
        prop_assert!(F_and_sstar(x).unwrap().0 <= F_and_sstar(x + dx).unwrap().0);
    }

    #[test]
    fn optimal_bound_is_tighter(a in 1e-3f64..5.0, n in 1usize..200, k in 1usize..4, l in 0.1f64..10.0) {
        let opt = tail_bound_product(a, n, k, l, false).unwrap();
        let exp = tail_bound_product(a, n, k, l, true).unwrap();
        prop_assert!(opt.log_value <= exp.log_value + 1e-12 * exp.log_value.abs());
    }

    #[test]
    fn bound_weakens_with_local_norm(a in 1e-3f64..5.0, n in 1usize..200, l in 0.1f64..10.0, dl in 0.01f64..5.0) {
        for explicit in [false, true] {
            let tight = tail_bound_product(a, n, 2, l, explicit).unwrap();
            let loose = tail_bound_product(a, n, 2, l + dl, explicit).unwrap();
            prop_assert!(tight.log_value <= loose.log_value + 1e-12);
        }
    }

    #[test]
    fn two_term_chernoff_at_the_balanced_point_is_below_the_reported_bound(
        a in 0.01f64..2.0, n in 10usize..10_000, l in 0.5f64..4.0, xi in 0.2f64..3.0, c in 0.0f64..3.0,
    ) {
        let report = tail_bound_correlated(a, n, 1, l, 2.0, 1.0, xi, c, false).unwrap();
        if !report.vacuous {
            let s = report.parameters["s"];
            let ell = report.parameters["l"];
            let two = correlated_tail_two_term(a, n, 1, l, 2.0, 1.0, xi, c, s, ell);
            prop_assert!(two <= report.log_value + 1e-9 * report.log_value.abs().max(1.0));
        }
    }

    #[test]
    fn local_norm_is_subadditive(seed in 0u64..10_000, n in 1usize..6, k in 1usize..4) {
        let mut rng = instance_rng(seed, 0);
        let h1 = random_local_observable(&mut rng, n, 2, k).unwrap();
        let h2 = random_local_observable(&mut rng, n, 2, k).unwrap();
        let sum = h1.concat(&h2).unwrap();
        prop_assert!(sum.local_norm() <= h1.local_norm() + h2.local_norm() + 1e-12);
        let scaled = h1.scaled(-2.5);
        prop_assert!((scaled.local_norm() - 2.5 * h1.local_norm()).abs() < 1e-12);
    }
}

#[test]
fn zero_observable_has_zero_local_norm() {
    let h = LocalObservable::new(3, 2, 1.5, Vec::new()).unwrap();
    assert_eq!(h.local_norm(), 0.0);
    assert_eq!(h.constant(), 1.5);
}
