//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use paired_equiv_core::DecisionMap;

fn binomial_coefficient(n: u32, k: u32) -> BigInt {
    let mut c = BigInt::one();
    for i in 0..k {
        c = c * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    c
}

/// `P(N <= x)` for `N ~ B(n, p)` in exact rational arithmetic; `p` is taken
/// as the exact value of the double.
pub fn rational_cdf(n: u32, p: f64, x: i64) -> f64 {
    if x < 0 {
        return 0.0;
    }
    let p = BigRational::from_float(p).unwrap();
    let q = BigRational::one() - &p;
    let mut total = BigRational::zero();
    for k in 0..=(x.min(i64::from(n)) as u32) {
        let term = BigRational::from_integer(binomial_coefficient(n, k))
            * num_traits::pow(p.clone(), k as usize)
            * num_traits::pow(q.clone(), (n - k) as usize);
        total += term;
    }
    total.to_f64().unwrap()
}

/// Joint pmf of `(N10, N01)` by the trinomial formula, `n <= 20`.
pub fn trinomial_pmf(n: u32, p10: f64, p01: f64, x10: u32, x01: u32) -> f64 {
    let fact = |m: u32| (1..=m).map(f64::from).product::<f64>();
    let rest = n - x10 - x01;
    let coefficient = fact(n) / (fact(x10) * fact(x01) * fact(rest));
    coefficient * p10.powi(x10 as i32) * p01.powi(x01 as i32) * (1.0 - p10 - p01).powi(rest as i32)
}

/// Rejection probability by full enumeration of the sample space.
pub fn brute_force_rejection(map: &DecisionMap, p10: f64, p01: f64) -> f64 {
    map.points()
        .filter(|&(_, _, r)| r)
        .map(|(a, b, _)| trinomial_pmf(map.n, p10, p01, a, b))
        .sum()
}
