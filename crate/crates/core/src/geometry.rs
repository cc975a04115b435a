//! Cones, half-planes, the hyperbolic metric of the upper half-plane, and the
//! disk <-> half-plane conjugation with its slope correspondence.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::xnum::XComplex;

/// Three-valued membership: region boundaries matter to the transit logic,
/// so they are reported explicitly rather than folded into either side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Membership {
    Inside,
    Boundary,
    Outside,
}

/// Open symmetric cone about the positive real axis: |arg z| < half_angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    half_angle: f64,
}

impl Cone {
    pub fn new(half_angle: f64) -> Result<Self> {
        if !(half_angle.is_finite() && half_angle > 0.0 && half_angle < std::f64::consts::FRAC_PI_2) {
            return Err(Error::AngleRange(half_angle));
        }
        Ok(Self { half_angle })
    }

    #[inline]
    pub fn half_angle(&self) -> f64 {
        self.half_angle
    }

    pub fn membership(&self, z: &XComplex) -> Membership {
        if z.is_zero() {
            return Membership::Boundary;
        }
        let a = z.arg().abs();
        if a < self.half_angle {
            Membership::Inside
        } else if a == self.half_angle {
            Membership::Boundary
        } else {
            Membership::Outside
        }
    }

    pub fn contains(&self, z: &XComplex) -> bool {
        self.membership(z) == Membership::Inside
    }
}

/// Half-plane bounded by a line through the origin, described by the open
/// argument range (-theta - a, pi - theta - a). Contains `Cone(theta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    a: f64,
    theta: f64,
}

impl HalfPlane {
    pub fn new(a: f64, theta: f64) -> Result<Self> {
        let phi = a + theta;
        if !(phi.is_finite() && phi > 0.0 && phi < std::f64::consts::PI) {
            return Err(Error::AngleRange(phi));
        }
        Ok(Self { a, theta })
    }

    pub fn lower_arg(&self) -> f64 {
        -self.theta - self.a
    }

    pub fn upper_arg(&self) -> f64 {
        std::f64::consts::PI - self.theta - self.a
    }

    pub fn membership(&self, z: &XComplex) -> Membership {
        if z.is_zero() {
            return Membership::Boundary;
        }
        let arg = z.arg();
        let lo = self.lower_arg();
        let hi = self.upper_arg();
        if arg > lo && arg < hi {
            Membership::Inside
        } else if arg == lo || arg == hi {
            Membership::Boundary
        } else {
            Membership::Outside
        }
    }

    pub fn contains(&self, z: &XComplex) -> bool {
        self.membership(z) == Membership::Inside
    }
}

/// Target slope interval [a, b] with its derived quantities: half-width
/// theta = (b-a)/2, axis direction phi = a + theta, and the unimodular
/// rotation xi = e^{i phi} conjugating the cone picture to the half-plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleSpec {
    a: f64,
    b: f64,
}

impl AngleSpec {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let ok = a.is_finite()
            && b.is_finite()
            && (0.0..std::f64::consts::PI).contains(&a)
            && b > a
            && b <= std::f64::consts::PI
            && !(a == 0.0 && b == std::f64::consts::PI);
        if !ok {
            return Err(Error::InvalidAngleInterval { a, b });
        }
        Ok(Self { a, b })
    }

    #[inline]
    pub fn a(&self) -> f64 {
        self.a
    }

    #[inline]
    pub fn b(&self) -> f64 {
        self.b
    }

    /// theta = (b - a) / 2, in (0, pi/2).
    #[inline]
    pub fn theta(&self) -> f64 {
        0.5 * (self.b - self.a)
    }

    /// phi = a + theta, in (0, pi).
    #[inline]
    pub fn phi(&self) -> f64 {
        self.a + self.theta()
    }

    /// xi = e^{i phi}.
    pub fn xi(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.phi())
    }

    pub fn cone(&self) -> Cone {
        Cone::new(self.theta()).expect("theta in (0, pi/2) by construction")
    }

    pub fn half_plane(&self) -> HalfPlane {
        HalfPlane::new(self.a, self.theta()).expect("phi in (0, pi) by construction")
    }

    /// Rotate a cone-frame point into the upper half-plane frame (multiply by xi).
    pub fn to_upper_half_plane(&self, z: &XComplex) -> XComplex {
        z.rotate(self.phi())
    }

    /// Rotate an upper-half-plane point into the cone frame (multiply by conj(xi)).
    pub fn to_cone_frame(&self, z: &XComplex) -> XComplex {
        z.rotate(-self.phi())
    }
}

/// Hyperbolic distance on the upper half-plane, with metric density
/// |dz| / (2 Im z) so that d(i, 2i) = (ln 2)/2.
pub fn hyp_dist(z: &XComplex, w: &XComplex) -> Result<f64> {
    if !(z.im.is_sign_positive() && w.im.is_sign_positive()) {
        return Err(Error::OutsideDomain("hyp_dist requires Im > 0"));
    }
    let num = (*z - *w).abs();
    let den = (*z - w.conj()).abs();
    if num.is_zero() {
        return Ok(0.0);
    }
    // rho = |z-w| / |z - conj(w)| is always in [0, 1)
    let rho = (num / den).to_f64();
    Ok(rho.atanh())
}

/// Conformal map from the unit disk onto the upper half-plane sending the
/// boundary point tau to infinity: S(w) = i (tau + w) / (tau - w).
pub fn disk_to_halfplane(w: Complex64, tau: Complex64) -> Result<XComplex> {
    if (tau.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::OutsideDomain("tau must be unimodular"));
    }
    if w.norm() > 1.0 + 1e-12 {
        return Err(Error::OutsideDomain("w must lie in the closed unit disk"));
    }
    let den = tau - w;
    if den.norm() == 0.0 {
        return Err(Error::Pole);
    }
    let s = Complex64::new(0.0, 1.0) * (tau + w) / den;
    Ok(XComplex::from_f64(s.re, s.im))
}

/// Inverse of [`disk_to_halfplane`]: w = tau (z - i) / (z + i).
pub fn halfplane_to_disk(z: Complex64, tau: Complex64) -> Result<Complex64> {
    if (tau.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::OutsideDomain("tau must be unimodular"));
    }
    let den = z + Complex64::new(0.0, 1.0);
    if den.norm() == 0.0 {
        return Err(Error::Pole);
    }
    Ok(tau * (z - Complex64::new(0.0, 1.0)) / den)
}

/// Slope correspondence between the half-plane and disk pictures:
/// an orbit argument psi in [0, pi] corresponds to disk slope pi/2 - psi.
pub fn slope_halfplane_to_disk(psi: f64) -> Result<f64> {
    if !(psi.is_finite() && (0.0..=std::f64::consts::PI).contains(&psi)) {
        return Err(Error::AngleRange(psi));
    }
    Ok(std::f64::consts::FRAC_PI_2 - psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    /// Independent oracle: hyperbolic distance evaluated in the disk model
    /// after the Cayley transform, with density |dw| / (1 - |w|^2).
    fn hyp_dist_disk_oracle(z: Complex64, w: Complex64) -> f64 {
        let cayley = |v: Complex64| (v - Complex64::i()) / (v + Complex64::i());
        let u = cayley(z);
        let v = cayley(w);
        let rho = ((u - v) / (Complex64::new(1.0, 0.0) - u.conj() * v)).norm();
        rho.atanh()
    }

    #[test]
    fn dist_zero_iff_equal() {
        let i = XComplex::from_f64(0.0, 1.0);
        assert_eq!(hyp_dist(&i, &i).unwrap(), 0.0);
    }

    #[test]
    fn dist_i_to_2i_is_half_log_two() {
        let d = hyp_dist(&XComplex::from_f64(0.0, 1.0), &XComplex::from_f64(0.0, 2.0)).unwrap();
        assert!((d - 0.5 * 2f64.ln()).abs() < 1e-15);
        assert!((d - (1.0f64 / 3.0).atanh()).abs() < 1e-15);
    }

    #[test]
    fn dist_matches_disk_model_oracle() {
        // frozen from the oracle: d(1+i, 3+i) = atanh(1/sqrt(2)) = 0.8813735870195430
        let d = hyp_dist(&XComplex::from_f64(1.0, 1.0), &XComplex::from_f64(3.0, 1.0)).unwrap();
        assert!((d - 0.8813735870195430).abs() < 1e-12);
        let oracle = hyp_dist_disk_oracle(Complex64::new(1.0, 1.0), Complex64::new(3.0, 1.0));
        assert!((d - oracle).abs() < 1e-12);
    }

    #[test]
    fn dist_symmetric_and_translation_scale_invariant() {
        let z = XComplex::from_f64(0.3, 2.0);
        let w = XComplex::from_f64(-1.0, 0.5);
        let d = hyp_dist(&z, &w).unwrap();
        assert!((d - hyp_dist(&w, &z).unwrap()).abs() < 1e-15);
        // translation by a real constant
        let c = XComplex::from_f64(17.25, 0.0);
        let dt = hyp_dist(&(z + c), &(w + c)).unwrap();
        assert!((d - dt).abs() < 1e-12);
        // scaling by a positive real
        let ds = hyp_dist(&z.scale_f64(42.0), &w.scale_f64(42.0)).unwrap();
        assert!((d - ds).abs() < 1e-12);
    }

    #[test]
    fn dist_rejects_lower_half_plane() {
        let z = XComplex::from_f64(0.0, 1.0);
        let w = XComplex::from_f64(0.0, -1.0);
        assert!(hyp_dist(&z, &w).is_err());
        assert!(hyp_dist(&z, &XComplex::from_f64(1.0, 0.0)).is_err());
    }

    #[test]
    fn disk_map_trivials() {
        let tau = Complex64::new(1.0, 0.0);
        let s = disk_to_halfplane(Complex64::new(0.0, 0.0), tau).unwrap();
        assert!((s.to_complex64() - Complex64::i()).norm() < 1e-15);

        // w = -tau: numerator vanishes
        let s = disk_to_halfplane(-tau, tau).unwrap();
        assert!(s.to_complex64().norm() < 1e-15);

        let s = disk_to_halfplane(Complex64::new(0.5, 0.0), tau).unwrap();
        assert!((s.to_complex64() - Complex64::new(0.0, 3.0)).norm() < 1e-15);

        assert!(matches!(disk_to_halfplane(tau, tau), Err(Error::Pole)));
    }

    #[test]
    fn disk_map_roundtrip() {
        let tau = Complex64::from_polar(1.0, 0.7);
        for &(x, y) in &[(0.1, 0.2), (-0.5, 0.3), (0.0, -0.9), (0.77, 0.0)] {
            let w = Complex64::new(x, y);
            let z = disk_to_halfplane(w, tau).unwrap();
            assert!(z.im.is_sign_positive(), "image must be in the upper half-plane");
            let back = halfplane_to_disk(z.to_complex64(), tau).unwrap();
            assert!((back - w).norm() < 1e-12);
        }
    }

    #[test]
    fn slope_correspondence() {
        assert!((slope_halfplane_to_disk(FRAC_PI_2).unwrap() - 0.0).abs() < 1e-15);
        assert!((slope_halfplane_to_disk(0.0).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((slope_halfplane_to_disk(PI).unwrap() + FRAC_PI_2).abs() < 1e-15);
        assert!(slope_halfplane_to_disk(-0.1).is_err());
        assert!(slope_halfplane_to_disk(PI + 0.1).is_err());
    }

    #[test]
    fn cone_membership_three_valued() {
        let cone = Cone::new(FRAC_PI_4).unwrap();
        assert_eq!(cone.membership(&XComplex::from_f64(1.0, 0.0)), Membership::Inside);
        assert_eq!(cone.membership(&XComplex::from_f64(1.0, 1.0)), Membership::Boundary);
        assert_eq!(cone.membership(&XComplex::from_f64(0.0, 1.0)), Membership::Outside);
    }

    #[test]
    fn half_plane_contains_cone() {
        let spec = AngleSpec::new(FRAC_PI_4, 3.0 * FRAC_PI_4).unwrap();
        let h = spec.half_plane();
        let cone = spec.cone();
        let z = XComplex::from_f64(2.0, 1.0);
        assert!(cone.contains(&z));
        assert!(h.contains(&z));
        // a point in H but outside the cone
        let w = XComplex::from_f64(-0.5, 2.0);
        assert!(!cone.contains(&w));
        assert!(h.contains(&w));
    }

    #[test]
    fn angle_spec_validation() {
        assert!(AngleSpec::new(0.0, PI).is_err());
        assert!(AngleSpec::new(FRAC_PI_2, FRAC_PI_4).is_err());
        assert!(AngleSpec::new(-0.1, 0.5).is_err());
        let s = AngleSpec::new(FRAC_PI_4, 3.0 * FRAC_PI_4).unwrap();
        assert!((s.theta() - FRAC_PI_4).abs() < 1e-15);
        assert!((s.phi() - FRAC_PI_2).abs() < 1e-15);
        assert!((s.xi() - Complex64::i()).norm() < 1e-15);
    }

    #[test]
    fn frame_rotations_invert() {
        let spec = AngleSpec::new(0.3, 2.1).unwrap();
        let z = XComplex::from_f64(5.0, 1.25);
        let there = spec.to_upper_half_plane(&z);
        let back = spec.to_cone_frame(&there);
        assert!((back.re.to_f64() - 5.0).abs() < 1e-12);
        assert!((back.im.to_f64() - 1.25).abs() < 1e-12);
    }
}
