mod common;

use common::trinomial_pmf;
use paired_equiv_core::hypothesis::mcnemar_statistic;
use paired_equiv_core::model::{
    joint_to_marginal, marginal_to_joint, null_discordant_prob, pi_bounds, rho_bounds,
};
use paired_equiv_core::numerics::{binom_cdf, binom_sf_inclusive, BinomialSpec};
use paired_equiv_core::{
    confidence_region, margin_pvalue, margin_test, mcnemar_test, MarginalParams, NullParams,
    PairedCounts, Variant,
};
use proptest::prelude::*;

fn marginal_params() -> impl Strategy<Value = MarginalParams> {
    (0.02f64..0.98, 0.02f64..0.98, 0.001f64..0.999).prop_map(|(a, b, t)| {
        let (lo, hi) = rho_bounds(a, b).unwrap();
        MarginalParams::new(a, b, lo + t * (hi - lo)).unwrap()
    })
}

fn counts() -> impl Strategy<Value = PairedCounts> {
    (1u32..120).prop_flat_map(|n| {
        (0..=n).prop_flat_map(move |x10| {
            (0..=(n - x10)).prop_map(move |x01| PairedCounts::new(n, x10, x01).unwrap())
        })
    })
}

proptest! {
    #[test]
    fn marginal_round_trip(m in marginal_params()) {
        let back = joint_to_marginal(&marginal_to_joint(&m).unwrap()).unwrap();
        prop_assert!((back.p1plus - m.p1plus).abs() < 1e-10);
        prop_assert!((back.pplus1 - m.pplus1).abs() < 1e-10);
        prop_assert!((back.rho - m.rho).abs() < 1e-10);
    }

    #[test]
    fn pi_bounds_are_centred(rho in -0.999f64..0.999) {
        let (lo, hi) = pi_bounds(rho);
        prop_assert!((lo + hi - 1.0).abs() < 1e-15);
    }

    #[test]
    fn discordant_probability_symmetric_in_pi(k in 1u32..1024, rho in -0.99f64..0.99) {
        // dyadic pi keeps 1 - pi exact
        let pi = f64::from(k) / 1024.0;
        prop_assume!(NullParams::contains(pi, rho) && NullParams::contains(1.0 - pi, rho));
        let a = null_discordant_prob(&NullParams::new(pi, rho).unwrap());
        let b = null_discordant_prob(&NullParams::new(1.0 - pi, rho).unwrap());
        prop_assert_eq!(a, b);
        prop_assert!(a <= null_discordant_prob(&NullParams::new(0.5, rho).unwrap()));
        prop_assert_eq!(null_discordant_prob(&NullParams::new(0.5, rho).unwrap()), (1.0 - rho) / 4.0);
    }

    #[test]
    fn cdf_decreases_in_p(n in 0u32..200, frac in 0.0f64..=1.0, p1 in 0.0f64..1.0, p2 in 0.0f64..1.0) {
        let x = (frac * f64::from(n)) as i64;
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        let a = binom_cdf(BinomialSpec::new(n, lo).unwrap(), x);
        let b = binom_cdf(BinomialSpec::new(n, hi).unwrap(), x);
        prop_assert!(a >= b - 1e-14, "n={} x={} {}:{} {}:{}", n, x, lo, a, hi, b);
    }

    #[test]
    fn cdf_smallest_at_one_half(n in 0u32..200, frac in 0.0f64..=1.0, p in 1e-9f64..=0.5) {
        let x = (frac * f64::from(n)) as i64;
        let at_p = binom_cdf(BinomialSpec::new(n, p).unwrap(), x);
        let at_half = binom_cdf(BinomialSpec::new(n, 0.5).unwrap(), x);
        prop_assert!(at_p >= at_half - 1e-14);
    }

    #[test]
    fn tails_complement(n in 0u32..300, frac in 0.0f64..=1.0, p in 0.0f64..=1.0) {
        let x = (frac * f64::from(n)) as i64;
        let b = BinomialSpec::new(n, p).unwrap();
        prop_assert!((binom_cdf(b, x) + binom_sf_inclusive(b, x + 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tests_are_swap_symmetric(c in counts(), alpha in 0.01f64..0.5) {
        let s = c.swapped();
        prop_assert_eq!(mcnemar_test(&c, alpha).unwrap(), mcnemar_test(&s, alpha).unwrap());
        prop_assert_eq!(margin_test(&c, alpha).unwrap(), margin_test(&s, alpha).unwrap());
    }

    #[test]
    fn margin_pvalue_is_dual_to_decision(c in counts(), alpha in 0.001f64..0.999) {
        let p = margin_pvalue(&c).unwrap();
        prop_assume!((p - alpha).abs() > 1e-9);
        let reject = margin_test(&c, alpha).unwrap().decision.is_reject();
        prop_assert_eq!(p < alpha, reject, "p={} alpha={}", p, alpha);
    }

    #[test]
    fn mcnemar_pvalue_is_dual_to_decision(c in counts(), alpha in 0.001f64..0.999) {
        let r = mcnemar_test(&c, alpha).unwrap();
        prop_assume!((r.p_value - alpha).abs() > 1e-9);
        prop_assert_eq!(r.p_value < alpha, r.decision.is_reject());
    }

    #[test]
    fn disturbance_never_increases_mcnemar(c in counts()) {
        prop_assume!(c.x10 != c.x01);
        let m = mcnemar_statistic(c.x10, c.x01);
        for v in Variant::ALL {
            let d = v.apply(&c).unwrap();
            prop_assert!(mcnemar_statistic(d.x10, d.x01) <= m);
        }
    }
}

#[test]
fn rho_bounds_match_feasibility_scan() {
    for i in 1..=19 {
        for j in 1..=19 {
            let (a, b) = (f64::from(i) * 0.05, f64::from(j) * 0.05);
            let (lo, hi) = rho_bounds(a, b).unwrap();
            // feasible p11 range scanned directly from the four cells
            let sigma = (a * (1.0 - a) * b * (1.0 - b)).sqrt();
            let steps = 20_000;
            let feasible: Vec<f64> = (0..=steps)
                .map(|k| f64::from(k) / f64::from(steps))
                .filter(|&p11| {
                    let cells = [1.0 - a - b + p11, b - p11, a - p11, p11];
                    cells.iter().all(|&c| c >= -1e-12)
                })
                .map(|p11| (p11 - a * b) / sigma)
                .collect();
            let scan_lo = feasible.iter().cloned().fold(f64::INFINITY, f64::min);
            let scan_hi = feasible.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(
                (scan_lo - lo).abs() < 1e-3 && (scan_hi - hi).abs() < 1e-3,
                "{a} {b}"
            );

            let inside = MarginalParams::new(a, b, 0.5 * (lo + hi)).unwrap();
            let t = marginal_to_joint(&inside).unwrap();
            assert!([t.p00, t.p01, t.p10, t.p11]
                .iter()
                .all(|&c| c > 0.0 && c < 1.0));
            if hi < 1.0 - 1e-3 {
                let p11 = a * b + (hi + 1e-3) * sigma;
                assert!(a - p11 < 0.0 || b - p11 < 0.0);
            }
            if lo > -1.0 + 1e-3 {
                let p11 = a * b + (lo - 1e-3) * sigma;
                assert!(p11 < 0.0 || 1.0 - a - b + p11 < 0.0);
            }
        }
    }
}

#[test]
fn regions_cover_at_nominal_level() {
    for n in 1..=40u32 {
        for alpha in [0.05, 0.1, 0.35] {
            for p in [0.1, 0.25, 0.45] {
                let r = confidence_region(n, p, p, alpha).unwrap();
                let mut total = 0.0;
                for a in 0..=n {
                    for b in 0..=(n - a) {
                        if r.contains(a, b) {
                            total += trinomial_pmf(n, p, p, a, b);
                        }
                    }
                }
                assert!(
                    total >= 1.0 - alpha - 1e-12,
                    "n={n} alpha={alpha} p={p}: {total}"
                );
            }
        }
    }
}
