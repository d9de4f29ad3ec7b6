//! Binomial and chi-square primitives.
//!
//! Probabilities are evaluated in log space (log-gamma binomial
//! coefficients) and tails are always summed on the side with the smaller
//! mass, so that sample sizes in the thousands neither overflow nor lose
//! the small tail to cancellation.

use alloc::vec::Vec;
use libm::{erfc, exp, lgamma, log, log1p, sqrt};

use crate::{Error, Result};

/// Binomial law `B(n, p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialSpec {
    pub n: u32,
    pub p: f64,
}

impl BinomialSpec {
    pub fn new(n: u32, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability {
                name: "p",
                value: p,
            });
        }
        Ok(Self { n, p })
    }

    fn mean(&self) -> f64 {
        f64::from(self.n) * self.p
    }

    /// Natural log of the pmf at `k`; `k` must be in `0..=n` and `p` in (0, 1).
    fn ln_pmf(&self, k: u32) -> f64 {
        let (n, kf) = (f64::from(self.n), f64::from(k));
        ln_choose(self.n, k) + kf * log(self.p) + (n - kf) * log1p(-self.p)
    }

    /// pmf(k - 1) / pmf(k)
    fn down_ratio(&self, k: u32) -> f64 {
        f64::from(k) * (1.0 - self.p) / (f64::from(self.n - k + 1) * self.p)
    }

    /// pmf(k + 1) / pmf(k)
    fn up_ratio(&self, k: u32) -> f64 {
        f64::from(self.n - k) * self.p / (f64::from(k + 1) * (1.0 - self.p))
    }

    /// `P(N <= x)` by direct summation, `x` in `0..=n`, `p` in (0, 1).
    fn lower_sum(&self, x: u32) -> f64 {
        let mut term = exp(self.ln_pmf(x));
        let mut acc = Neumaier::default();
        acc.add(term);
        for k in (1..=x).rev() {
            term *= self.down_ratio(k);
            if term == 0.0 {
                break;
            }
            acc.add(term);
        }
        acc.total()
    }

    /// `P(N >= x)` by direct summation, `x` in `0..=n`, `p` in (0, 1).
    fn upper_sum(&self, x: u32) -> f64 {
        let mut term = exp(self.ln_pmf(x));
        let mut acc = Neumaier::default();
        acc.add(term);
        for k in x..self.n {
            term *= self.up_ratio(k);
            if term == 0.0 {
                break;
            }
            acc.add(term);
        }
        acc.total()
    }

    fn is_degenerate(&self) -> bool {
        self.p == 0.0 || self.p == 1.0 || self.n == 0
    }

    /// Point mass location of a degenerate law.
    fn atom(&self) -> u32 {
        if self.p == 1.0 {
            self.n
        } else {
            0
        }
    }
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    compensation: f64,
}

impl Neumaier {
    fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// `ln C(n, k)` via log-gamma.
pub fn ln_choose(n: u32, k: u32) -> f64 {
    debug_assert!(k <= n);
    let (n, k) = (f64::from(n), f64::from(k));
    lgamma(n + 1.0) - lgamma(k + 1.0) - lgamma(n - k + 1.0)
}

pub fn binom_pmf(b: BinomialSpec, k: u32) -> Result<f64> {
    if k > b.n {
        return Err(Error::Domain("binomial pmf evaluated outside 0..=n"));
    }
    if b.is_degenerate() {
        return Ok(if k == b.atom() { 1.0 } else { 0.0 });
    }
    Ok(exp(b.ln_pmf(k)))
}

/// `P(N <= x)`; 0 below the support and 1 at or above `n`.
pub fn binom_cdf(b: BinomialSpec, x: i64) -> f64 {
    if x < 0 {
        return 0.0;
    }
    if x >= i64::from(b.n) {
        return 1.0;
    }
    let x = x as u32;
    if b.is_degenerate() {
        return if x >= b.atom() { 1.0 } else { 0.0 };
    }
    let value = if f64::from(x) < b.mean() {
        b.lower_sum(x)
    } else {
        1.0 - b.upper_sum(x + 1)
    };
    value.clamp(0.0, 1.0)
}

/// `P(N >= x)`, summing the upper tail directly whenever it is the smaller one.
pub fn binom_sf_inclusive(b: BinomialSpec, x: i64) -> f64 {
    if x <= 0 {
        return 1.0;
    }
    if x > i64::from(b.n) {
        return 0.0;
    }
    let x = x as u32;
    if b.is_degenerate() {
        return if b.atom() >= x { 1.0 } else { 0.0 };
    }
    let value = if f64::from(x - 1) < b.mean() {
        1.0 - b.lower_sum(x - 1)
    } else {
        b.upper_sum(x)
    };
    value.clamp(0.0, 1.0)
}

/// Largest `L` in `0..=n` with `P(N < L) <= eps`.
pub fn lower_bound_index(b: BinomialSpec, eps: f64) -> u32 {
    // P(N < 0) = 0 <= eps, and P(N < n + 1) = 1 > eps.
    let (mut lo, mut hi) = (0u32, b.n + 1);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if binom_cdf(b, i64::from(mid) - 1) <= eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Smallest `U` in `0..=n` with `P(N < U) >= 1 - eps`, tested as
/// `P(N >= U) <= eps`; capped at `n` when no such `U` exists.
pub fn upper_bound_index(b: BinomialSpec, eps: f64) -> u32 {
    let holds = |u: u32| binom_sf_inclusive(b, i64::from(u)) <= eps;
    if !holds(b.n) {
        return b.n;
    }
    let (mut lo, mut hi) = (0u32, b.n);
    if holds(lo) {
        return 0;
    }
    // invariant: !holds(lo) && holds(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// The pmf of `B(n, p)` restricted to the contiguous window around the mode
/// where it is at least `cutoff`. Returns the first index and the values.
pub fn pmf_window(b: BinomialSpec, cutoff: f64) -> (u32, Vec<f64>) {
    if b.is_degenerate() {
        return (b.atom(), alloc::vec![1.0]);
    }
    let mode = libm::floor((f64::from(b.n) + 1.0) * b.p).clamp(0.0, f64::from(b.n)) as u32;
    let peak = exp(b.ln_pmf(mode));

    let mut below = Vec::new();
    let mut term = peak;
    let mut k = mode;
    while k > 0 {
        term *= b.down_ratio(k);
        if term < cutoff || term == 0.0 {
            break;
        }
        below.push(term);
        k -= 1;
    }
    let start = mode - below.len() as u32;

    let mut values = below;
    values.reverse();
    values.push(peak);
    let mut term = peak;
    for k in mode..b.n {
        term *= b.up_ratio(k);
        if term < cutoff || term == 0.0 {
            break;
        }
        values.push(term);
    }
    (start, values)
}

/// Survival function of the chi-square law with one degree of freedom.
pub fn chi2_sf_1(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain("chi-square argument must be nonnegative"));
    }
    Ok(erfc(sqrt(x / 2.0)))
}

/// Left quantile of the chi-square law with one degree of freedom:
/// the `x` with `chi2_sf_1(x) = 1 - q`.
pub fn chi2_quantile_1(q: f64) -> Result<f64> {
    if q.is_nan() || !(0.0..1.0).contains(&q) {
        return Err(Error::Domain(
            "chi-square quantile level must lie in [0, 1)",
        ));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    let target = 1.0 - q;
    // Solve erfc(z) = target for z = sqrt(x / 2); erfc is decreasing.
    let seed = normal_upper_quantile(target / 2.0).max(0.0) / core::f64::consts::SQRT_2;
    let (mut lo, mut hi) = (0.0_f64, seed.max(0.5));
    while erfc(hi) > target {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if erfc(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut z = 0.5 * (lo + hi);
    // Newton polish on the bracketed root.
    for _ in 0..3 {
        let slope = -core::f64::consts::FRAC_2_SQRT_PI * exp(-z * z);
        let step = (erfc(z) - target) / slope;
        let next = z - step;
        if !(lo..=hi).contains(&next) {
            break;
        }
        z = next;
    }
    Ok(2.0 * z * z)
}

/// Rough upper-tail normal quantile used only to seed the bracket.
fn normal_upper_quantile(tail: f64) -> f64 {
    if tail >= 0.5 {
        return 0.0;
    }
    // Abramowitz-Stegun 26.2.23
    let t = sqrt(-2.0 * log(tail));
    t - (2.515_517 + 0.802_853 * t + 0.010_328 * t * t)
        / (1.0 + 1.432_788 * t + 0.189_269 * t * t + 0.001_308 * t * t * t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn spec(n: u32, p: f64) -> BinomialSpec {
        BinomialSpec::new(n, p).unwrap()
    }

    #[test]
    fn pmf_examples() {
        assert_eq!(binom_pmf(spec(1, 0.5), 0).unwrap(), 0.5);
        // exact rational (17/21)^21
        assert_abs_diff_eq!(
            binom_pmf(spec(21, 4.0 / 21.0), 0).unwrap(),
            0.011_825_572_078_872_59,
            epsilon = 1e-15
        );
        assert_eq!(binom_pmf(spec(0, 0.3), 0).unwrap(), 1.0);
        assert!(binom_pmf(spec(3, 0.3), 4).is_err());
        assert_eq!(binom_pmf(spec(3, 0.0), 0).unwrap(), 1.0);
        assert_eq!(binom_pmf(spec(3, 1.0), 3).unwrap(), 1.0);
        assert_eq!(binom_pmf(spec(3, 1.0), 2).unwrap(), 0.0);
    }

    #[test]
    fn cdf_examples() {
        let b = spec(21, 4.0 / 21.0);
        assert_abs_diff_eq!(binom_cdf(b, 1), 0.070_257_810_586_243_06, epsilon = 1e-14);
        assert_eq!(binom_cdf(b, 21), 1.0);
        assert_eq!(binom_cdf(b, -1), 0.0);
        assert_abs_diff_eq!(binom_cdf(spec(8, 0.5), 1), 9.0 / 256.0, epsilon = 1e-15);
    }

    #[test]
    fn sf_examples() {
        assert_abs_diff_eq!(
            binom_sf_inclusive(spec(21, 4.0 / 21.0), 7),
            0.087_994_081_499_182_14,
            epsilon = 1e-14
        );
        assert_eq!(binom_sf_inclusive(spec(5, 0.2), 0), 1.0);
        assert_abs_diff_eq!(
            binom_sf_inclusive(spec(8, 0.5), 7),
            9.0 / 256.0,
            epsilon = 1e-15
        );
        assert_eq!(binom_sf_inclusive(spec(8, 0.5), 9), 0.0);
    }

    #[test]
    fn degenerate_tails() {
        let b = spec(10, 0.0);
        assert_eq!(binom_cdf(b, 0), 1.0);
        assert_eq!(binom_sf_inclusive(b, 1), 0.0);
        let b = spec(10, 1.0);
        assert_eq!(binom_cdf(b, 9), 0.0);
        assert_eq!(binom_sf_inclusive(b, 10), 1.0);
    }

    #[test]
    fn large_n_does_not_overflow() {
        let b = spec(1600, 0.5);
        assert_abs_diff_eq!(
            binom_cdf(b, 799) + binom_sf_inclusive(b, 800),
            1.0,
            epsilon = 1e-12
        );
        let tiny = binom_cdf(b, 100);
        assert!(tiny > 0.0 && tiny < 1e-200);
    }

    #[test]
    fn bound_index_examples() {
        let b = spec(21, 4.0 / 21.0);
        let eps = (1.0 - sqrt(0.95)) / 2.0;
        assert_eq!(lower_bound_index(b, eps), 1);
        assert_eq!(lower_bound_index(b, 0.0), 0);
        assert_eq!(upper_bound_index(b, eps), 9);
        assert_eq!(upper_bound_index(b, 0.5), 5);
        // P(N < 10) = 1023/1024 > 0.999, P(N < 9) = 1013/1024 <= 0.999
        assert_eq!(lower_bound_index(spec(10, 0.5), 0.999), 9);
        // P(N < 1) = 1/1024 < 0.001 <= P(N < 2)
        assert_eq!(upper_bound_index(spec(10, 0.5), 0.999), 2);
    }

    #[test]
    fn window_covers_mass() {
        let b = spec(1600, 0.27);
        let (start, values) = pmf_window(b, 1e-30);
        let total: f64 = values.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        assert!(start > 0);
        let (start, full) = pmf_window(spec(12, 0.3), 0.0);
        assert_eq!(start, 0);
        assert_eq!(full.len(), 13);
        for (k, v) in full.iter().enumerate() {
            assert_relative_eq!(
                *v,
                binom_pmf(spec(12, 0.3), k as u32).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn chi2_examples() {
        assert_abs_diff_eq!(chi2_sf_1(4.5).unwrap(), 0.0339, epsilon = 5e-5);
        assert_abs_diff_eq!(chi2_sf_1(9.0).unwrap(), 0.0027, epsilon = 5e-5);
        assert_eq!(chi2_sf_1(0.0).unwrap(), 1.0);
        assert!(chi2_sf_1(-1.0).is_err());
    }

    #[test]
    fn chi2_quantile_examples() {
        assert_abs_diff_eq!(chi2_quantile_1(0.95).unwrap(), 3.841_459, epsilon = 1e-5);
        assert_eq!(chi2_quantile_1(0.0).unwrap(), 0.0);
        let x = chi2_quantile_1(0.65).unwrap();
        assert_abs_diff_eq!(chi2_sf_1(x).unwrap(), 0.35, epsilon = 1e-10);
        assert!(chi2_quantile_1(1.0).is_err());
        assert!(chi2_quantile_1(-0.1).is_err());
    }

    #[test]
    fn chi2_round_trip() {
        for i in 1..100 {
            let q = f64::from(i) / 100.0;
            let x = chi2_quantile_1(q).unwrap();
            assert_abs_diff_eq!(chi2_sf_1(x).unwrap(), 1.0 - q, epsilon = 1e-9);
        }
    }
}
