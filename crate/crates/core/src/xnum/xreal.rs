//! Extended-range real numbers: f64 mantissa + wide power-of-two exponent.

use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

const EXP_MASK: u64 = 0x7FF0_0000_0000_0000;
const EXP_BIAS: i64 = 1023;

/// Builds 2^e as an f64 for e in [-1022, 1023] (normal range), exactly.
#[inline]
fn pow2(e: i64) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + EXP_BIAS) as u64) << 52)
}

/// Splits a nonzero finite f64 into (m, e) with m in ±[1, 2) and x = m * 2^e.
#[inline]
fn split(x: f64) -> (f64, i64) {
    debug_assert!(x != 0.0 && x.is_finite());
    let bits = x.to_bits();
    let raw_exp = ((bits >> 52) & 0x7FF) as i64;
    if raw_exp == 0 {
        // subnormal: rescale into the normal range first
        let (m, e) = split(x * pow2(64));
        return (m, e - 64);
    }
    let m = f64::from_bits((bits & !EXP_MASK) | ((EXP_BIAS as u64) << 52));
    (m, raw_exp - EXP_BIAS)
}

/// Extended-range real: `mantissa * 2^exp2` with mantissa in ±[1, 2) or 0.
///
/// Alignment in addition follows IEEE-style semantics: when the exponents
/// differ by more than the mantissa width the smaller operand is absorbed
/// into the larger one.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct XReal {
    mantissa: f64,
    exp2: i64,
}

impl XReal {
    pub const ZERO: Self = Self { mantissa: 0.0, exp2: 0 };
    pub const ONE: Self = Self { mantissa: 1.0, exp2: 0 };

    /// Builds from mantissa and exponent, normalizing. Panics on non-finite mantissa.
    pub fn from_parts(mantissa: f64, exp2: i64) -> Self {
        assert!(mantissa.is_finite(), "XReal mantissa must be finite");
        if mantissa == 0.0 {
            return Self::ZERO;
        }
        let (m, e) = split(mantissa);
        Self { mantissa: m, exp2: exp2 + e }
    }

    /// Panics on non-finite input.
    pub fn from_f64(x: f64) -> Self {
        Self::from_parts(x, 0)
    }

    /// 2^t for arbitrary t (|t| up to ~9e18), as an extended-range value.
    pub fn exp2_of(t: f64) -> Self {
        assert!(t.is_finite() && t.abs() < 9e18, "exp2_of: exponent out of range");
        let e = t.floor();
        let frac = t - e;
        Self { mantissa: frac.exp2(), exp2: e as i64 }.normalized()
    }

    /// e^t for arbitrary t, as an extended-range value.
    pub fn exp_of(t: f64) -> Self {
        Self::exp2_of(t * std::f64::consts::LOG2_E)
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    #[inline]
    pub fn is_sign_positive(&self) -> bool {
        self.mantissa > 0.0
    }

    #[inline]
    pub fn mantissa(&self) -> f64 {
        self.mantissa
    }

    #[inline]
    pub fn exp2(&self) -> i64 {
        self.exp2
    }

    /// Converts to f64; overflows to ±inf and underflows to ±0 outside the standard range.
    pub fn to_f64(&self) -> f64 {
        if self.mantissa == 0.0 {
            return 0.0;
        }
        if self.exp2 > 1023 {
            return if self.mantissa > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
        }
        if self.exp2 < -1075 {
            return if self.mantissa > 0.0 { 0.0 } else { -0.0 };
        }
        if self.exp2 >= -1022 {
            self.mantissa * pow2(self.exp2)
        } else {
            // subnormal result: scale in two exact-power steps, rounding once
            (self.mantissa * pow2(-1022)) * pow2(self.exp2 + 1022)
        }
    }

    #[inline]
    fn normalized(self) -> Self {
        if self.mantissa == 0.0 {
            return Self::ZERO;
        }
        let am = self.mantissa.abs();
        if (1.0..2.0).contains(&am) {
            return self;
        }
        let (m, e) = split(self.mantissa);
        Self { mantissa: m, exp2: self.exp2 + e }
    }

    #[inline]
    pub fn abs(&self) -> Self {
        Self { mantissa: self.mantissa.abs(), exp2: self.exp2 }
    }

    /// Exact multiplication by 2^j.
    #[inline]
    pub fn mul_pow2(&self, j: i64) -> Self {
        if self.mantissa == 0.0 {
            return Self::ZERO;
        }
        Self { mantissa: self.mantissa, exp2: self.exp2 + j }
    }

    pub fn sqrt(&self) -> Self {
        assert!(self.mantissa >= 0.0, "sqrt of negative XReal");
        if self.mantissa == 0.0 {
            return Self::ZERO;
        }
        if self.exp2 % 2 == 0 {
            Self { mantissa: self.mantissa.sqrt(), exp2: self.exp2 / 2 }
        } else {
            Self { mantissa: (2.0 * self.mantissa).sqrt(), exp2: (self.exp2 - 1) / 2 }
        }
    }

    pub fn recip(&self) -> Self {
        assert!(self.mantissa != 0.0, "reciprocal of zero XReal");
        Self::from_parts(1.0 / self.mantissa, -self.exp2)
    }

    /// Natural log of |self|. Loses absolute precision ~|exp2|*eps for huge exponents.
    pub fn ln_abs(&self) -> f64 {
        assert!(self.mantissa != 0.0, "log of zero XReal");
        self.mantissa.abs().ln() + self.exp2 as f64 * std::f64::consts::LN_2
    }

    /// log2 of |self|.
    pub fn log2_abs(&self) -> f64 {
        assert!(self.mantissa != 0.0, "log of zero XReal");
        self.mantissa.abs().log2() + self.exp2 as f64
    }

    /// log10 of |self|.
    pub fn log10_abs(&self) -> f64 {
        self.log2_abs() * std::f64::consts::LOG10_2
    }
}

impl Default for XReal {
    fn default() -> Self {
        Self::ZERO
    }
}

impl Add for XReal {
    type Output = XReal;

    fn add(self, rhs: XReal) -> XReal {
        if self.mantissa == 0.0 {
            return rhs;
        }
        if rhs.mantissa == 0.0 {
            return self;
        }
        let (hi, lo) = if self.exp2 >= rhs.exp2 { (self, rhs) } else { (rhs, self) };
        let d = hi.exp2 - lo.exp2;
        if d >= 54 {
            return hi;
        }
        // scaling by 2^-d is exact for d <= 53; the sum then rounds once
        let m = hi.mantissa + lo.mantissa * pow2(-d);
        Self::from_parts(m, hi.exp2)
    }
}

impl Sub for XReal {
    type Output = XReal;

    #[inline]
    fn sub(self, rhs: XReal) -> XReal {
        self + (-rhs)
    }
}

impl Neg for XReal {
    type Output = XReal;

    #[inline]
    fn neg(self) -> XReal {
        XReal { mantissa: -self.mantissa, exp2: self.exp2 }
    }
}

impl Mul for XReal {
    type Output = XReal;

    fn mul(self, rhs: XReal) -> XReal {
        if self.mantissa == 0.0 || rhs.mantissa == 0.0 {
            return XReal::ZERO;
        }
        XReal::from_parts(self.mantissa * rhs.mantissa, self.exp2 + rhs.exp2)
    }
}

impl Mul<f64> for XReal {
    type Output = XReal;

    fn mul(self, rhs: f64) -> XReal {
        if self.mantissa == 0.0 || rhs == 0.0 {
            return XReal::ZERO;
        }
        XReal::from_parts(self.mantissa * rhs, self.exp2)
    }
}

impl Div for XReal {
    type Output = XReal;

    fn div(self, rhs: XReal) -> XReal {
        assert!(rhs.mantissa != 0.0, "XReal division by zero");
        if self.mantissa == 0.0 {
            return XReal::ZERO;
        }
        XReal::from_parts(self.mantissa / rhs.mantissa, self.exp2 - rhs.exp2)
    }
}

impl PartialEq for XReal {
    fn eq(&self, other: &Self) -> bool {
        self.mantissa == other.mantissa && (self.mantissa == 0.0 || self.exp2 == other.exp2)
    }
}

impl Eq for XReal {}

impl PartialOrd for XReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for XReal {
    fn cmp(&self, other: &Self) -> Ordering {
        let sa = sign_class(self.mantissa);
        let sb = sign_class(other.mantissa);
        if sa != sb {
            return sa.cmp(&sb);
        }
        match sa {
            0 => Ordering::Equal,
            1 => magnitude_cmp(self, other),
            _ => magnitude_cmp(other, self),
        }
    }
}

fn sign_class(m: f64) -> i8 {
    if m > 0.0 {
        1
    } else if m < 0.0 {
        -1
    } else {
        0
    }
}

fn magnitude_cmp(a: &XReal, b: &XReal) -> Ordering {
    match a.exp2.cmp(&b.exp2) {
        Ordering::Equal => a.mantissa.abs().partial_cmp(&b.mantissa.abs()).unwrap(),
        ord => ord,
    }
}

impl std::fmt::Display for XReal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.exp2.abs() < 900 {
            write!(f, "{}", self.to_f64())
        } else {
            write!(f, "{}*2^{}", self.mantissa, self.exp2)
        }
    }
}
