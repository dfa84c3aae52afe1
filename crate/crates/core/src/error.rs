use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A scalar argument lies outside the domain of the function.
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("input of length {len} must be a multiple of {multiple}")]
    InputShape { len: usize, multiple: usize },

    #[error("unphysical covariance triple (a={a}, b={b}, c={c}): {reason}")]
    Unphysical {
        a: f64,
        b: f64,
        c: f64,
        reason: &'static str,
    },

    #[error("symplectic radicand {radicand} is negative beyond tolerance")]
    NumericalDegeneracy { radicand: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations")]
    Convergence { iterations: usize },

    /// The bad-event constants are only valid when the combined correction
    /// factor stays below the one used by the gamma estimators.
    #[error("n = {n} is outside the regime where the bad-event bound applies (eps = {eps})")]
    RegimeViolation { n: u64, eps: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Configuration(String),
}

pub(crate) fn ensure_domain(
    ok: bool,
    name: &'static str,
    value: f64,
    expected: &'static str,
) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            expected,
        })
    }
}
