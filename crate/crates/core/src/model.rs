//! Parametrizations of the bivariate binary distribution.
//!
//! A paired binary observation `(X1, X2)` is described either by its joint
//! table `(p00, p01, p10, p11)`, by the marginals plus correlation
//! `(p1+, p+1, rho)`, or, under the null hypothesis `p1+ = p+1 = pi`, by the
//! pair `(pi, rho)`. Only the discordant pair `(p10, p01)` matters for the
//! tests; [`AltParams`] carries it directly.

use libm::sqrt;

use crate::{Error, Result, TOLERANCE};

fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (-TOLERANCE..=1.0 + TOLERANCE).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidProbability { name, value })
    }
}

fn check_open_marginal(value: f64) -> Result<()> {
    check_probability("marginal", value)?;
    if value <= 0.0 || value >= 1.0 {
        return Err(Error::ZeroVariance(value));
    }
    Ok(())
}

/// Snap values that drift past the unit interval by rounding back inside it.
fn snap(value: f64) -> f64 {
    value.clamp(0.0, 1.0)
}

/// Joint cell probabilities of the 2x2 table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointTable {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

impl JointTable {
    pub fn new(p00: f64, p01: f64, p10: f64, p11: f64) -> Result<Self> {
        check_probability("p00", p00)?;
        check_probability("p01", p01)?;
        check_probability("p10", p10)?;
        check_probability("p11", p11)?;
        let total = p00 + p01 + p10 + p11;
        if (total - 1.0).abs() > TOLERANCE {
            return Err(Error::ProbabilitySum(total));
        }
        Ok(Self {
            p00: snap(p00),
            p01: snap(p01),
            p10: snap(p10),
            p11: snap(p11),
        })
    }

    pub fn p1plus(&self) -> f64 {
        self.p10 + self.p11
    }

    pub fn pplus1(&self) -> f64 {
        self.p01 + self.p11
    }

    pub fn discordant(&self) -> AltParams {
        AltParams {
            p10: self.p10,
            p01: self.p01,
        }
    }
}

/// Marginal positive probabilities and their Pearson correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalParams {
    pub p1plus: f64,
    pub pplus1: f64,
    pub rho: f64,
}

impl MarginalParams {
    /// Validates the marginals and that `rho` is feasible for them
    /// (boundary values within [`TOLERANCE`] are accepted).
    pub fn new(p1plus: f64, pplus1: f64, rho: f64) -> Result<Self> {
        let (lower, upper) = rho_bounds(p1plus, pplus1)?;
        if !rho.is_finite() || rho < lower - TOLERANCE || rho > upper + TOLERANCE {
            return Err(Error::InfeasibleCorrelation { rho, lower, upper });
        }
        Ok(Self {
            p1plus,
            pplus1,
            rho,
        })
    }

    /// Standard deviations `(sigma1, sigma2)` of the two binary coordinates.
    pub fn sigmas(&self) -> (f64, f64) {
        (
            sqrt(self.p1plus * (1.0 - self.p1plus)),
            sqrt(self.pplus1 * (1.0 - self.pplus1)),
        )
    }
}

/// A point `(pi, rho)` of the null parameter space, where both marginals
/// equal `pi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullParams {
    pub pi: f64,
    pub rho: f64,
}

impl NullParams {
    pub fn new(pi: f64, rho: f64) -> Result<Self> {
        if !rho.is_finite() || rho <= -1.0 || rho >= 1.0 {
            return Err(Error::OutsideNullSpace { rho, pi });
        }
        let (lower, upper) = pi_bounds(rho);
        if !pi.is_finite() || pi < lower - TOLERANCE || pi > upper + TOLERANCE {
            return Err(Error::OutsideNullSpace { rho, pi });
        }
        Ok(Self { pi, rho })
    }

    pub fn contains(pi: f64, rho: f64) -> bool {
        Self::new(pi, rho).is_ok()
    }

    pub fn discordant_prob(&self) -> f64 {
        null_discordant_prob(self)
    }
}

/// Discordant probabilities `(p10, p01)`; an alternative point whenever
/// they differ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AltParams {
    pub p10: f64,
    pub p01: f64,
}

impl AltParams {
    pub fn new(p10: f64, p01: f64) -> Result<Self> {
        check_probability("p10", p10)?;
        check_probability("p01", p01)?;
        if p10 + p01 >= 1.0 {
            return Err(Error::Domain("p10 + p01 must be below 1"));
        }
        Ok(Self {
            p10: snap(p10),
            p01: snap(p01),
        })
    }

    pub fn is_alternative(&self) -> bool {
        self.p10 != self.p01
    }

    /// Success probability of `N01` given `N10`: `p01 / (1 - p10)`.
    pub fn conditional_p01(&self) -> f64 {
        snap(self.p01 / (1.0 - self.p10))
    }
}

impl From<NullParams> for AltParams {
    fn from(p: NullParams) -> Self {
        let d = null_discordant_prob(&p);
        AltParams { p10: d, p01: d }
    }
}

pub fn joint_to_marginal(t: &JointTable) -> Result<MarginalParams> {
    let p1plus = t.p1plus();
    let pplus1 = t.pplus1();
    check_open_marginal(p1plus)?;
    check_open_marginal(pplus1)?;
    let sigma1 = sqrt(p1plus * (1.0 - p1plus));
    let sigma2 = sqrt(pplus1 * (1.0 - pplus1));
    let rho = (t.p11 - p1plus * pplus1) / (sigma1 * sigma2);
    MarginalParams::new(p1plus, pplus1, rho.clamp(-1.0, 1.0))
}

pub fn marginal_to_joint(m: &MarginalParams) -> Result<JointTable> {
    let (lower, upper) = rho_bounds(m.p1plus, m.pplus1)?;
    if m.rho < lower - TOLERANCE || m.rho > upper + TOLERANCE {
        return Err(Error::InfeasibleCorrelation {
            rho: m.rho,
            lower,
            upper,
        });
    }
    let (sigma1, sigma2) = m.sigmas();
    let p11 = m.p1plus * m.pplus1 + m.rho * sigma1 * sigma2;
    let p10 = m.p1plus - p11;
    let p01 = m.pplus1 - p11;
    let p00 = 1.0 - p10 - p01 - p11;
    JointTable::new(p00, p01, p10, p11)
}

/// Feasible range `(lower, upper)` of the correlation for given marginals.
pub fn rho_bounds(p1plus: f64, pplus1: f64) -> Result<(f64, f64)> {
    check_open_marginal(p1plus)?;
    check_open_marginal(pplus1)?;
    let (a, b) = (p1plus, pplus1);
    let upper = if a > b {
        sqrt(b * (1.0 - a) / (a * (1.0 - b)))
    } else if a < b {
        sqrt(a * (1.0 - b) / (b * (1.0 - a)))
    } else {
        1.0
    };
    // At a + b = 1 both lower-bound branches reduce to -1.
    let lower = if a + b >= 1.0 {
        -sqrt((1.0 - a) * (1.0 - b) / (a * b))
    } else {
        -sqrt(a * b / ((1.0 - a) * (1.0 - b)))
    };
    Ok((lower.clamp(-1.0, 1.0), upper.clamp(-1.0, 1.0)))
}

/// Admissible range of the common positive probability at correlation `rho`.
pub fn pi_bounds(rho: f64) -> (f64, f64) {
    if rho >= 0.0 {
        (0.0, 1.0)
    } else {
        (-rho / (1.0 - rho), 1.0 / (1.0 - rho))
    }
}

/// `p10 = p01 = pi (1 - pi) (1 - rho)` under the null hypothesis.
pub fn null_discordant_prob(p: &NullParams) -> f64 {
    p.pi * (1.0 - p.pi) * (1.0 - p.rho)
}
