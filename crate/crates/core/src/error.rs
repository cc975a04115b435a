//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value must be positive, got {0}")]
    NonPositive(f64),

    #[error("value must be finite")]
    NotFinite,

    #[error("empty term sequence")]
    EmptySequence,

    #[error("zero base for complex power")]
    ZeroBase,

    #[error("input lies on the branch cut")]
    BranchCut,

    #[error("point outside domain: {0}")]
    OutsideDomain(&'static str),

    #[error("pole of the conformal map (w = tau)")]
    Pole,

    #[error("angle out of range: {0}")]
    AngleRange(f64),

    #[error("invalid angle interval: a={a}, b={b}")]
    InvalidAngleInterval { a: f64, b: f64 },

    #[error("malformed tail certificate: ratio_bound={0} must lie in (0, 1)")]
    MalformedCertificate(f64),

    #[error("tail certificate start index {l0} exceeds term count {terms}")]
    CertificateIndex { l0: usize, terms: usize },

    #[error("schedule has no term with index {0}")]
    TermIndex(usize),

    #[error("schedule overflow: no coefficient assignment within exponent bounds")]
    ScheduleOverflow,

    #[error("schedule must have at least {min} terms, got {got}")]
    TooFewTerms { min: usize, got: usize },

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("insufficient transit: {0} region events (need at least 2)")]
    InsufficientTransit(usize),

    #[error("quadrature failed to converge; worst panel [{lo}, {hi}] error {err}")]
    QuadratureFailure { lo: f64, hi: f64, err: f64 },

    #[error("operation unsupported for this map variant: {0}")]
    UnsupportedVariant(&'static str),

    #[error("density invariant violated: density({t}) = {value} < -1e-12")]
    NegativeDensity { t: f64, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
