//! Extended-range real/complex arithmetic and log-domain positive reals.
//!
//! The schedule coefficients grow doubly-exponentially, so plain f64 cannot
//! hold them. Three representations cover the needs of the rest of the crate:
//!
//! - [`PosLog`]: a positive real stored as its natural log. Used for
//!   amplitudes, shifts and every condition sum; multiplication and powers
//!   are exact in the log domain.
//! - [`XReal`]: f64 mantissa in ±[1,2) plus a 64-bit power-of-two exponent.
//!   Agrees with f64 arithmetic in the standard range and keeps going when
//!   orbits reach Re(z) ~ 10^2500.
//! - [`XComplex`]: a pair of `XReal` components with principal-branch
//!   argument and overflow-free modulus.
//!
//! Values beyond the `XReal` exponent range (3^k-style shifts from the
//! factorial schedule family at large k) are handled only as `PosLog` during
//! validation; orbit evaluation never materializes them.
//!
//! All types are immutable and all operations pure.

mod poslog;
mod xcomplex;
mod xreal;

pub use poslog::{plog_add, plog_sum, PosLog};
pub use xcomplex::{principal_pow, principal_pow_imag, XComplex};
pub use xreal::XReal;
