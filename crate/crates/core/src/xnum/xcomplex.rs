//! Extended-range complex numbers and principal-branch powers.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::xnum::XReal;

/// Complex number with extended-range components. The argument is always
/// reported in the principal branch (-pi, pi].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct XComplex {
    pub re: XReal,
    pub im: XReal,
}

impl XComplex {
    pub const ZERO: Self = Self { re: XReal::ZERO, im: XReal::ZERO };

    pub fn new(re: XReal, im: XReal) -> Self {
        Self { re, im }
    }

    pub fn from_f64(re: f64, im: f64) -> Self {
        Self { re: XReal::from_f64(re), im: XReal::from_f64(im) }
    }

    pub fn from_complex64(z: Complex64) -> Self {
        Self::from_f64(z.re, z.im)
    }

    /// Lossy: components overflow to ±inf / underflow to 0 outside f64 range.
    pub fn to_complex64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Self { re: self.re, im: -self.im }
    }

    /// |z|^2 as an extended-range real (no overflow).
    pub fn abs_sq(&self) -> XReal {
        self.re * self.re + self.im * self.im
    }

    /// |z| as an extended-range real (no overflow).
    pub fn abs(&self) -> XReal {
        self.abs_sq().sqrt()
    }

    /// Principal-branch argument in (-pi, pi]. Components are rescaled to a
    /// common exponent so the result is exact regardless of magnitude.
    pub fn arg(&self) -> f64 {
        let (a, b) = self.scaled_components();
        b.atan2(a)
    }

    /// Both components scaled by a common power of two into f64 range.
    fn scaled_components(&self) -> (f64, f64) {
        if self.is_zero() {
            return (0.0, 0.0);
        }
        let s = if self.re.is_zero() {
            self.im.exp2()
        } else if self.im.is_zero() {
            self.re.exp2()
        } else {
            self.re.exp2().max(self.im.exp2())
        };
        (self.re.mul_pow2(-s).to_f64(), self.im.mul_pow2(-s).to_f64())
    }

    pub fn scale(&self, s: XReal) -> Self {
        Self { re: self.re * s, im: self.im * s }
    }

    pub fn scale_f64(&self, s: f64) -> Self {
        Self { re: self.re * s, im: self.im * s }
    }

    /// Multiplication by e^{i phi}.
    pub fn rotate(&self, phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        Self {
            re: self.re * c - self.im * s,
            im: self.re * s + self.im * c,
        }
    }

    pub fn div(&self, rhs: &Self) -> Self {
        let d = rhs.abs_sq();
        assert!(!d.is_zero(), "XComplex division by zero");
        let n = *self * rhs.conj();
        Self { re: n.re / d, im: n.im / d }
    }
}

impl Add for XComplex {
    type Output = XComplex;

    fn add(self, rhs: XComplex) -> XComplex {
        XComplex { re: self.re + rhs.re, im: self.im + rhs.im }
    }
}

impl Sub for XComplex {
    type Output = XComplex;

    fn sub(self, rhs: XComplex) -> XComplex {
        XComplex { re: self.re - rhs.re, im: self.im - rhs.im }
    }
}

impl Neg for XComplex {
    type Output = XComplex;

    fn neg(self) -> XComplex {
        XComplex { re: -self.re, im: -self.im }
    }
}

impl Mul for XComplex {
    type Output = XComplex;

    fn mul(self, rhs: XComplex) -> XComplex {
        XComplex {
            re: self.re * rhs.re - self.im * rhs.im,
            im: self.re * rhs.im + self.im * rhs.re,
        }
    }
}

/// z^e with the principal branch of the argument: exp(e*(ln|z| + i arg z)).
///
/// The modulus is carried in the log domain, so |result| = |z|^e without
/// overflow. On the cut (negative real axis) the convention arg = pi applies.
pub fn principal_pow(z: &XComplex, e: f64) -> Result<XComplex> {
    if z.is_zero() {
        return Err(Error::ZeroBase);
    }
    let log2_mag = z.abs().log2_abs();
    let mag = XReal::exp2_of(e * log2_mag);
    let phase = e * z.arg();
    let (s, c) = phase.sin_cos();
    Ok(XComplex { re: mag * c, im: mag * s })
}

/// z^i with the principal log: e^{-arg z} * (cos ln|z| + i sin ln|z|).
pub fn principal_pow_imag(z: &XComplex) -> Result<XComplex> {
    if z.is_zero() {
        return Err(Error::ZeroBase);
    }
    let mag = (-z.arg()).exp();
    let (s, c) = z.abs().ln_abs().sin_cos();
    Ok(XComplex::from_f64(mag * c, mag * s))
}
