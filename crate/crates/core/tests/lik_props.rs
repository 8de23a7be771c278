//! Property checks for moment matching.

use ihgp_core::lik::{Likelihood, LikelihoodModel};
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn binary_likelihoods_are_label_symmetric(mu in -4.0f64..4.0, s2 in 0.01f64..9.0) {
        for kind in [Likelihood::BernoulliLogit, Likelihood::BernoulliProbit] {
            let lik = LikelihoodModel::new(kind).unwrap();
            let pos = lik.tilted_moments(1.0, mu, s2).unwrap();
            let neg = lik.tilted_moments(-1.0, -mu, s2).unwrap();
            prop_assert!(close(pos.log_z, neg.log_z, 1e-10));
            prop_assert!(close(pos.mean, -neg.mean, 1e-10));
            prop_assert!(close(pos.var, neg.var, 1e-10));
        }
    }

    #[test]
    fn tilted_variance_shrinks_for_log_concave(mu in -3.0f64..3.0, s2 in 0.01f64..5.0, y in 0u32..20) {
        let lik = LikelihoodModel::new(Likelihood::Poisson).unwrap();
        let t = lik.tilted_moments(f64::from(y), mu, s2).unwrap();
        prop_assert!(t.var > 0.0 && t.var <= s2 * (1.0 + 1e-9));
        let site = lik.moment_match(f64::from(y), mu, s2).unwrap();
        prop_assert!(site.gamma > 0.0);
    }

    #[test]
    fn quadrature_order_converged(mu in -2.0f64..2.0, s2 in 0.01f64..4.0, y in 0u32..10) {
        let lo = LikelihoodModel::with_order(Likelihood::Poisson, 31).unwrap();
        let hi = LikelihoodModel::with_order(Likelihood::Poisson, 61).unwrap();
        let a = lo.tilted_moments(f64::from(y), mu, s2).unwrap();
        let b = hi.tilted_moments(f64::from(y), mu, s2).unwrap();
        // Skewed tilted densities (y = 0 with a wide cavity) limit the
        // 31-point rule to roughly 1e−5 relative in the variance.
        prop_assert!(close(a.log_z, b.log_z, 1e-5));
        prop_assert!(close(a.mean, b.mean, 1e-5));
        prop_assert!(close(a.var, b.var, 5e-5));

        let lo = LikelihoodModel::with_order(Likelihood::BernoulliLogit, 31).unwrap();
        let hi = LikelihoodModel::with_order(Likelihood::BernoulliLogit, 61).unwrap();
        let a = lo.tilted_moments(1.0, mu, s2).unwrap();
        let b = hi.tilted_moments(1.0, mu, s2).unwrap();
        prop_assert!(close(a.mean, b.mean, 1e-8));
        prop_assert!(close(a.var, b.var, 1e-7));
    }

    #[test]
    fn gaussian_site_ignores_cavity(y in -5.0f64..5.0, mu in -5.0f64..5.0, s2 in 1e-3f64..10.0) {
        let lik = LikelihoodModel::gaussian(0.3).unwrap();
        let site = lik.moment_match(y, mu, s2).unwrap();
        prop_assert_eq!(site.eta, y);
        prop_assert_eq!(site.gamma, 0.3);
    }
}

/// Wide cavities and cavities far on the wrong side of the label are the
/// hardest cases for the 31-point rule.
#[test]
fn quadrature_matches_probit_closed_form_over_cavities() {
    let lik = LikelihoodModel::new(Likelihood::BernoulliProbit).unwrap();
    for &mu in &[-3.0, -1.0, 0.0, 0.5, 2.5] {
        for &s2 in &[0.05, 1.0, 4.0] {
            for &y in &[-1.0, 1.0] {
                let q = lik.moment_match_quadrature(y, mu, s2).unwrap();
                let c = lik.tilted_moments(y, mu, s2).unwrap();
                let tol = if s2 > 1.0 || mu * y < -2.0 { 1e-6 } else { 1e-8 };
                assert!(close(q.log_z, c.log_z, tol), "{mu} {s2} {y}");
                assert!(close(q.mean, c.mean, tol), "{mu} {s2} {y}");
                assert!(close(q.var, c.var, tol), "{mu} {s2} {y}");
            }
        }
    }
}
