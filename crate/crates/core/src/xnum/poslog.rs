//! Log-domain positive reals.
//!
//! A `PosLog` stores the natural log of a positive real, so products, quotients
//! and real powers are exact at the level of the stored logarithm while the
//! represented values may span thousands of orders of magnitude. Zero and
//! negative values are unrepresentable by construction.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::xnum::XReal;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosLog {
    ln: f64,
}

impl PosLog {
    pub const ONE: Self = Self { ln: 0.0 };

    /// From a positive real value.
    pub fn new(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::NotFinite);
        }
        if x <= 0.0 {
            return Err(Error::NonPositive(x));
        }
        Ok(Self { ln: x.ln() })
    }

    /// Directly from a natural logarithm.
    pub fn from_ln(ln: f64) -> Result<Self> {
        if !ln.is_finite() {
            return Err(Error::NotFinite);
        }
        Ok(Self { ln })
    }

    pub fn from_xreal(x: &XReal) -> Result<Self> {
        if x.is_zero() || !x.is_sign_positive() {
            return Err(Error::NonPositive(x.to_f64()));
        }
        Ok(Self { ln: x.ln_abs() })
    }

    #[inline]
    pub fn ln(&self) -> f64 {
        self.ln
    }

    /// May overflow to +inf or underflow to 0 outside the f64 range.
    #[inline]
    pub fn to_f64(&self) -> f64 {
        self.ln.exp()
    }

    pub fn to_xreal(&self) -> XReal {
        XReal::exp_of(self.ln)
    }

    #[inline]
    pub fn mul(&self, other: &Self) -> Self {
        Self { ln: self.ln + other.ln }
    }

    #[inline]
    pub fn div(&self, other: &Self) -> Self {
        Self { ln: self.ln - other.ln }
    }

    #[inline]
    pub fn recip(&self) -> Self {
        Self { ln: -self.ln }
    }

    /// x^e: a single multiply in the log domain.
    #[inline]
    pub fn powf(&self, e: f64) -> Self {
        Self { ln: self.ln * e }
    }

    #[inline]
    pub fn max(&self, other: &Self) -> Self {
        if self.ln >= other.ln { *self } else { *other }
    }
}

impl Eq for PosLog {}

impl PartialOrd for PosLog {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PosLog {
    fn cmp(&self, other: &Self) -> Ordering {
        self.ln.partial_cmp(&other.ln).expect("PosLog logs are always finite")
    }
}

/// log(sum of values), computed against the max term so no exp overflows.
///
/// The result is never below the max term.
pub fn plog_sum(terms: &[PosLog]) -> Result<PosLog> {
    let max = terms.iter().max().ok_or(Error::EmptySequence)?;
    let mut acc = 0.0;
    for t in terms {
        acc += (t.ln - max.ln).exp();
    }
    // acc >= 1 because the max term contributes exactly 1
    Ok(PosLog { ln: max.ln + acc.ln() })
}

/// log(a + b) without materializing either value.
pub fn plog_add(a: PosLog, b: PosLog) -> PosLog {
    let (hi, lo) = if a.ln >= b.ln { (a, b) } else { (b, a) };
    PosLog { ln: hi.ln + (lo.ln - hi.ln).exp().ln_1p() }
}
