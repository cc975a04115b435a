//! slopelab: a numerical laboratory for parabolic self-maps of the upper
//! half-plane whose orbits approach infinity with a prescribed interval of
//! directions.
//!
//! The library constructs self-maps from lacunary coefficient schedules,
//! validates the admissibility conditions in log-domain arithmetic, iterates
//! orbits with certified acceleration across astronomically many map
//! applications, estimates the resulting slope interval, and analyzes the
//! boundary measure of the map's integral representation.
//!
//! Module map:
//! - [`xnum`]: extended-range real/complex arithmetic and log-domain reals.
//! - [`geometry`]: cones, half-planes, the hyperbolic metric, disk conjugation.
//! - [`schedule`]: coefficient schedules, validation, generation, synthesis.
//! - [`holomap`]: evaluation of the series, the self-maps, and their bounds.
//! - [`orbit`]: exact and accelerated iteration with region diagnostics.
//! - [`herglotz`]: boundary density, moment integrals, reconstruction checks.

pub mod error;
pub mod geometry;
pub mod herglotz;
pub mod holomap;
pub mod orbit;
pub mod quad;
pub mod schedule;
pub mod xnum;

pub use error::{Error, Result};
