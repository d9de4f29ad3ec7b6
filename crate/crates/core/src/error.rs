use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is not a probability in [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("joint probabilities sum to {0}, expected 1")]
    ProbabilitySum(f64),
    #[error("zero variance: marginal probability {0} lies at 0 or 1")]
    ZeroVariance(f64),
    #[error("infeasible correlation {rho}: must lie in [{lower}, {upper}]")]
    InfeasibleCorrelation { rho: f64, lower: f64, upper: f64 },
    #[error("(rho = {rho}, pi = {pi}) is outside the null parameter space")]
    OutsideNullSpace { rho: f64, pi: f64 },
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("significance level {0} must lie strictly inside (0, 1)")]
    InvalidAlpha(f64),
    #[error("invalid counts: {0}")]
    InvalidCounts(&'static str),
    #[error("discordant counts are tied; unit disturbance in favour of H0 is undefined")]
    TiedDiscordant,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}
