//! The McNemar test, the margin test, the two-stage confidence region and
//! the unit sample-disturbance diagnostic.

use alloc::vec::Vec;
use core::fmt;
use libm::sqrt;

use crate::error::check_alpha;
use crate::model::AltParams;
use crate::numerics::{
    binom_cdf, binom_sf_inclusive, chi2_quantile_1, chi2_sf_1, lower_bound_index, pmf_window,
    upper_bound_index, BinomialSpec,
};
use crate::{Error, Result};

/// Observed paired table. Only the discordant counts enter the tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairedCounts {
    pub n: u32,
    pub x10: u32,
    pub x01: u32,
    /// `(x00, x11)` when the concordant cells are known individually.
    pub concordant: Option<(u32, u32)>,
}

impl PairedCounts {
    pub fn new(n: u32, x10: u32, x01: u32) -> Result<Self> {
        if u64::from(x10) + u64::from(x01) > u64::from(n) {
            return Err(Error::InvalidCounts("x10 + x01 exceeds n"));
        }
        Ok(Self {
            n,
            x10,
            x01,
            concordant: None,
        })
    }

    pub fn from_table(x00: u32, x01: u32, x10: u32, x11: u32) -> Result<Self> {
        let n = [x00, x01, x10, x11]
            .iter()
            .try_fold(0u32, |acc, &x| acc.checked_add(x))
            .ok_or(Error::InvalidCounts("table total overflows"))?;
        Ok(Self {
            n,
            x10,
            x01,
            concordant: Some((x00, x11)),
        })
    }

    pub fn discordant_total(&self) -> u32 {
        self.x10 + self.x01
    }

    /// Pooled estimate `(x10 + x01) / (2n)` of the common discordant probability.
    pub fn p_hat(&self) -> f64 {
        pooled_estimate(self.n, self.discordant_total())
    }

    pub fn swapped(&self) -> Self {
        Self {
            x10: self.x01,
            x01: self.x10,
            concordant: self.concordant.map(|(a, b)| (b, a)),
            ..*self
        }
    }
}

fn pooled_estimate(n: u32, total: u32) -> f64 {
    if n == 0 {
        0.0
    } else {
        f64::from(total) / (2.0 * f64::from(n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    McNemar,
    Margin,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::McNemar, Method::Margin];

    pub fn name(&self) -> &'static str {
        match self {
            Method::McNemar => "mcnemar",
            Method::Margin => "margin",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::McNemar => "McNemar",
            Method::Margin => "Margin",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    AcceptH0,
    RejectH0,
}

impl Decision {
    fn from_reject(reject: bool) -> Self {
        if reject {
            Decision::RejectH0
        } else {
            Decision::AcceptH0
        }
    }

    pub fn is_reject(&self) -> bool {
        matches!(self, Decision::RejectH0)
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::AcceptH0 => "H0",
            Decision::RejectH0 => "H1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub method: Method,
    pub alpha: f64,
    /// McNemar statistic; `None` for the margin test.
    pub statistic: Option<f64>,
    pub p_value: f64,
    pub decision: Decision,
    /// `(L, U)` used by the margin test.
    pub bounds: Option<(u32, u32)>,
    pub p_hat: f64,
}

/// `(x10 - x01)^2 / (x10 + x01)`, defined as 0 when both counts are 0.
pub fn mcnemar_statistic(x10: u32, x01: u32) -> f64 {
    let total = x10 + x01;
    if total == 0 {
        return 0.0;
    }
    let diff = f64::from(x10) - f64::from(x01);
    diff * diff / f64::from(total)
}

/// Critical value `chi2_{1-alpha}(1)` of the McNemar rejection region.
pub fn mcnemar_critical_value(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    chi2_quantile_1(1.0 - alpha)
}

pub(crate) fn mcnemar_rejects(x10: u32, x01: u32, critical: f64) -> bool {
    mcnemar_statistic(x10, x01) > critical
}

pub fn mcnemar_test(c: &PairedCounts, alpha: f64) -> Result<TestResult> {
    let critical = mcnemar_critical_value(alpha)?;
    let statistic = mcnemar_statistic(c.x10, c.x01);
    Ok(TestResult {
        method: Method::McNemar,
        alpha,
        statistic: Some(statistic),
        p_value: chi2_sf_1(statistic)?,
        decision: Decision::from_reject(mcnemar_rejects(c.x10, c.x01, critical)),
        bounds: None,
        p_hat: c.p_hat(),
    })
}

/// Pooled estimate and the bound pair `(L, U)` of the margin test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginBounds {
    pub p_hat: f64,
    pub lower: u32,
    pub upper: u32,
}

impl MarginBounds {
    pub fn rejects(&self, x10: u32, x01: u32) -> bool {
        x10.min(x01) < self.lower || x10.max(x01) > self.upper
    }
}

/// Per-stage tail mass `(1 - sqrt(1 - alpha)) / 2`.
pub fn stage_tail(alpha: f64) -> f64 {
    (1.0 - sqrt(1.0 - alpha)) / 2.0
}

/// Bounds for a sample of size `n` with `total = x10 + x01` discordant pairs.
/// They depend on the counts only through the total.
pub(crate) fn margin_bounds_for_total(n: u32, total: u32, alpha: f64) -> MarginBounds {
    let p_hat = pooled_estimate(n, total);
    let law = BinomialSpec { n, p: p_hat };
    let eps = stage_tail(alpha);
    MarginBounds {
        p_hat,
        lower: lower_bound_index(law, eps),
        upper: upper_bound_index(law, eps),
    }
}

pub fn margin_bounds(n: u32, x10: u32, x01: u32, alpha: f64) -> Result<MarginBounds> {
    check_alpha(alpha)?;
    let c = PairedCounts::new(n, x10, x01)?;
    Ok(margin_bounds_for_total(n, c.discordant_total(), alpha))
}

pub fn margin_test(c: &PairedCounts, alpha: f64) -> Result<TestResult> {
    let bounds = margin_bounds(c.n, c.x10, c.x01, alpha)?;
    Ok(TestResult {
        method: Method::Margin,
        alpha,
        statistic: None,
        p_value: margin_pvalue(c)?,
        decision: Decision::from_reject(bounds.rejects(c.x10, c.x01)),
        bounds: Some((bounds.lower, bounds.upper)),
        p_hat: bounds.p_hat,
    })
}

/// Smallest level at which the margin test rejects.
///
/// With `N ~ B(n, p_hat)` the test rejects at stage tail `eps` exactly when
/// `P(N <= min) <= eps` (lower branch) or `P(N >= max - 1) <= eps` (upper
/// branch, from `max > U`). Inverting `eps = (1 - sqrt(1 - alpha)) / 2` at
/// the smaller of the two tail masses gives the level.
pub fn margin_pvalue(c: &PairedCounts) -> Result<f64> {
    let c = PairedCounts::new(c.n, c.x10, c.x01)?;
    let law = BinomialSpec {
        n: c.n,
        p: c.p_hat(),
    };
    let (lo, hi) = (c.x10.min(c.x01), c.x10.max(c.x01));
    let eps_low = binom_cdf(law, i64::from(lo));
    let eps_high = binom_sf_inclusive(law, i64::from(hi) - 1);
    let eps = eps_low.min(eps_high);
    if eps >= 0.5 {
        return Ok(1.0);
    }
    let keep = 1.0 - 2.0 * eps;
    Ok((1.0 - keep * keep).clamp(0.0, 1.0))
}

/// Two-stage confidence region for `(N10, N01)`: marginal bounds on `N10`
/// and, for every admissible `n10`, conditional bounds on `N01`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceRegion {
    pub n: u32,
    pub alpha: f64,
    /// Per-stage coverage `sqrt(1 - alpha)`.
    pub omega: f64,
    pub params: AltParams,
    pub l10: u32,
    pub u10: u32,
    conditional: Vec<(u32, u32)>,
}

impl ConfidenceRegion {
    pub fn conditional_bounds(&self, n10: u32) -> Option<(u32, u32)> {
        if n10 < self.l10 || n10 > self.u10 {
            return None;
        }
        self.conditional.get((n10 - self.l10) as usize).copied()
    }

    pub fn contains(&self, x10: u32, x01: u32) -> bool {
        self.conditional_bounds(x10)
            .is_some_and(|(lo, hi)| lo <= x01 && x01 <= hi)
    }

    /// Exact probability of the region under the parameters it was built for.
    pub fn coverage(&self) -> f64 {
        let q01 = self.params.conditional_p01();
        let (start, outer) = pmf_window(
            BinomialSpec {
                n: self.n,
                p: self.params.p10,
            },
            0.0,
        );
        let mut total = 0.0;
        for (i, weight) in outer.iter().enumerate() {
            let n10 = start + i as u32;
            let Some((lo, hi)) = self.conditional_bounds(n10) else {
                continue;
            };
            let inner = BinomialSpec {
                n: self.n - n10,
                p: q01,
            };
            let inside = binom_cdf(inner, i64::from(hi)) - binom_cdf(inner, i64::from(lo) - 1);
            total += weight * inside;
        }
        total
    }
}

pub fn confidence_region(n: u32, p10: f64, p01: f64, alpha: f64) -> Result<ConfidenceRegion> {
    check_alpha(alpha)?;
    let params = AltParams::new(p10, p01)?;
    let eps = stage_tail(alpha);
    let outer = BinomialSpec { n, p: params.p10 };
    let l10 = lower_bound_index(outer, eps);
    let u10 = upper_bound_index(outer, eps);
    let q01 = params.conditional_p01();
    let conditional = (l10..=u10)
        .map(|n10| {
            let inner = BinomialSpec { n: n - n10, p: q01 };
            (lower_bound_index(inner, eps), upper_bound_index(inner, eps))
        })
        .collect();
    Ok(ConfidenceRegion {
        n,
        alpha,
        omega: sqrt(1.0 - alpha),
        params,
        l10,
        u10,
        conditional,
    })
}

/// Unit disturbances in favour of H0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Original,
    AddOne,
    ReduceOne,
    AdjustOne,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Original,
        Variant::AddOne,
        Variant::ReduceOne,
        Variant::AdjustOne,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Variant::Original => "Original Data",
            Variant::AddOne => "Add One",
            Variant::ReduceOne => "Reduce One",
            Variant::AdjustOne => "Adjust One",
        }
    }

    /// Applies the disturbance. `None` if the scheme cannot be applied.
    pub fn apply(&self, c: &PairedCounts) -> Option<PairedCounts> {
        let flipped = c.x10 < c.x01;
        let (hi, lo) = if flipped {
            (c.x01, c.x10)
        } else {
            (c.x10, c.x01)
        };
        let (n, hi, lo) = match self {
            Variant::Original => (c.n, hi, lo),
            Variant::AddOne => (c.n.checked_add(1)?, hi, lo + 1),
            Variant::ReduceOne => (c.n.checked_sub(1)?, hi.checked_sub(1)?, lo),
            Variant::AdjustOne => (c.n, hi.checked_sub(1)?, lo + 1),
        };
        let (x10, x01) = if flipped { (lo, hi) } else { (hi, lo) };
        Some(PairedCounts {
            n,
            x10,
            x01,
            concordant: c.concordant,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariantOutcome {
    pub variant: Variant,
    pub counts: PairedCounts,
    pub mcnemar: TestResult,
    pub margin: TestResult,
}

impl VariantOutcome {
    fn run(variant: Variant, counts: PairedCounts, alpha: f64) -> Result<Self> {
        Ok(Self {
            variant,
            counts,
            mcnemar: mcnemar_test(&counts, alpha)?,
            margin: margin_test(&counts, alpha)?,
        })
    }

    pub fn accepted_by_both(&self) -> bool {
        !self.mcnemar.decision.is_reject() && !self.margin.decision.is_reject()
    }

    pub fn rejected_by_any(&self) -> bool {
        self.mcnemar.decision.is_reject() || self.margin.decision.is_reject()
    }

    pub fn rejected_by_both(&self) -> bool {
        self.mcnemar.decision.is_reject() && self.margin.decision.is_reject()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Recommendation {
    AcceptH0,
    RejectH0,
    IncreaseSample,
}

impl fmt::Display for Recommendation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Recommendation::AcceptH0 => "accept H0 (data lie on the rejection boundary)",
            Recommendation::RejectH0 => "reject H0",
            Recommendation::IncreaseSample => "increase the sample size",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceReport {
    pub alpha: f64,
    pub original: VariantOutcome,
    pub add_one: Option<VariantOutcome>,
    pub reduce_one: Option<VariantOutcome>,
    pub adjust_one: Option<VariantOutcome>,
    pub recommendation: Recommendation,
}

impl DisturbanceReport {
    pub fn get(&self, variant: Variant) -> Option<&VariantOutcome> {
        match variant {
            Variant::Original => Some(&self.original),
            Variant::AddOne => self.add_one.as_ref(),
            Variant::ReduceOne => self.reduce_one.as_ref(),
            Variant::AdjustOne => self.adjust_one.as_ref(),
        }
    }

    /// Outcomes in table order, skipping schemes that could not be applied.
    pub fn outcomes(&self) -> impl Iterator<Item = &VariantOutcome> {
        Variant::ALL.into_iter().filter_map(|v| self.get(v))
    }
}

/// Re-runs both tests on the three unit disturbances in favour of H0.
///
/// Recommendation: reject H0 when both tests reject the original data and
/// every disturbed dataset is still rejected by at least one test; accept
/// H0 when every disturbed dataset is accepted by both tests; otherwise
/// collect more data.
pub fn disturb(c: &PairedCounts, alpha: f64) -> Result<DisturbanceReport> {
    check_alpha(alpha)?;
    let c = if c.concordant.is_some() {
        *c
    } else {
        PairedCounts::new(c.n, c.x10, c.x01)?
    };
    if c.x10 == c.x01 {
        return Err(Error::TiedDiscordant);
    }
    let original = VariantOutcome::run(Variant::Original, c, alpha)?;
    let mut disturbed = [None; 3];
    for (slot, variant) in disturbed.iter_mut().zip(&Variant::ALL[1..]) {
        if let Some(counts) = variant.apply(&c) {
            *slot = Some(VariantOutcome::run(*variant, counts, alpha)?);
        }
    }
    let present: Vec<&VariantOutcome> = disturbed.iter().flatten().collect();

    let recommendation =
        if original.rejected_by_both() && present.iter().all(|o| o.rejected_by_any()) {
            Recommendation::RejectH0
        } else if !present.is_empty() && present.iter().all(|o| o.accepted_by_both()) {
            Recommendation::AcceptH0
        } else {
            Recommendation::IncreaseSample
        };
    let [add_one, reduce_one, adjust_one] = disturbed;
    Ok(DisturbanceReport {
        alpha,
        original,
        add_one,
        reduce_one,
        adjust_one,
        recommendation,
    })
}
