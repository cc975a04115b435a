//! Evaluation of the lacunary series p, the cone self-map F = id + p, its
//! half-plane restriction, the rotated upper-half-plane map, and the
//! classical z + i e^{pi/2} z^i + i e^{pi/2} benchmark map, with certified
//! series truncation bounds.

use std::f64::consts::{FRAC_PI_2, LN_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::AngleSpec;
use crate::schedule::Schedule;
use crate::xnum::{plog_sum, principal_pow, principal_pow_imag, PosLog, XComplex, XReal};

/// Shifts beyond this cannot be materialized as `XReal` (exponent overflow);
/// such schedules stay in the log-domain validation path.
const MAX_MATERIALIZABLE_LN: f64 = 4.0e18;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapVariant {
    /// F(z) = z + p(z) on the slit plane, iterated on the cone.
    FOnCone,
    /// The restriction of F to the invariant half-plane containing the cone.
    GOnHalfPlane,
    /// The rotated map on the upper half-plane: f(z) = xi g(conj(xi) z).
    FOnUpperHalfPlane,
    /// The benchmark map z + i e^{pi/2} z^i + i e^{pi/2}.
    Wolff,
}

/// A map ready for evaluation and iteration.
#[derive(Clone, Debug)]
pub struct MapHandle {
    schedule: Option<Schedule>,
    variant: MapVariant,
}

impl MapHandle {
    pub fn from_schedule(schedule: Schedule, variant: MapVariant) -> Result<Self> {
        if variant == MapVariant::Wolff {
            return Err(Error::UnsupportedVariant("Wolff map takes no schedule"));
        }
        Ok(Self { schedule: Some(schedule), variant })
    }

    pub fn wolff() -> Self {
        Self { schedule: None, variant: MapVariant::Wolff }
    }

    #[inline]
    pub fn variant(&self) -> MapVariant {
        self.variant
    }

    pub fn schedule(&self) -> Option<&Schedule> {
        self.schedule.as_ref()
    }

    pub fn angle(&self) -> Option<&AngleSpec> {
        self.schedule.as_ref().map(|s| s.angle())
    }

    /// One application of the map.
    pub fn apply(&self, z: &XComplex) -> Result<XComplex> {
        match self.variant {
            MapVariant::FOnCone => Ok(eval_big_f(self.schedule().expect("schedule-backed"), z)?.value),
            MapVariant::GOnHalfPlane => {
                let s = self.schedule().expect("schedule-backed");
                if !s.angle().half_plane().contains(z) {
                    return Err(Error::OutsideDomain("restriction domain is the invariant half-plane"));
                }
                Ok(eval_big_f(s, z)?.value)
            }
            MapVariant::FOnUpperHalfPlane => {
                let s = self.schedule().expect("schedule-backed");
                Ok(eval_f(s, s.angle(), z)?.value)
            }
            MapVariant::Wolff => eval_wolff(z),
        }
    }
}

/// How far a truncated evaluation can be from the notional infinite series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TailBound {
    /// No certificate: the finite series *is* the map; nothing was dropped.
    Exact,
    /// Certified bound on the dropped tail's modulus.
    Certified(PosLog),
    /// A certificate exists but |z| > gamma_K / 2, where its term-wise
    /// estimate does not apply; no bound is claimed.
    OutOfRange,
}

#[derive(Clone, Debug)]
pub struct EvalResult {
    pub value: XComplex,
    pub trunc_bound: TailBound,
    pub terms_used: usize,
}

/// Per-term evaluation data; the orbit engine reuses it for the dominance
/// ratio and the derivative bound without re-walking the schedule.
#[derive(Clone, Debug)]
pub struct SeriesEval {
    /// p_k(z) for k = 1..K, in schedule order.
    pub terms: Vec<XComplex>,
    /// |z + gamma_k| for k = 1..K.
    pub shift_abs: Vec<XReal>,
    /// p(z): the fixed-order sum of the terms.
    pub sum: XComplex,
}

fn gamma_as_xreal(gamma: &PosLog) -> Result<XReal> {
    if gamma.ln().abs() > MAX_MATERIALIZABLE_LN {
        return Err(Error::NumericFailure(format!(
            "shift ln(gamma) = {:.3e} exceeds the representable exponent range",
            gamma.ln()
        )));
    }
    Ok(gamma.to_xreal())
}

/// On the excluded ray (-inf, -gamma_1]?
fn on_cut(shifted: &XComplex) -> bool {
    shifted.im.is_zero() && !shifted.re.is_sign_positive()
}

/// One series term a_k e^{i theta_k} / (z + gamma_k)^{eps_k}.
pub fn eval_term(s: &Schedule, k: usize, z: &XComplex) -> Result<XComplex> {
    let t = s.term(k)?;
    let shifted = *z + XComplex::new(gamma_as_xreal(&t.gamma)?, XReal::ZERO);
    if on_cut(&shifted) {
        return Err(Error::BranchCut);
    }
    let powed = principal_pow(&shifted, -t.eps)?;
    Ok(powed.scale(t.a.to_xreal()).rotate(t.theta_k))
}

/// All terms at once. Errors if z sits on the excluded ray of any term.
pub fn eval_p_terms(s: &Schedule, z: &XComplex) -> Result<SeriesEval> {
    let mut terms = Vec::with_capacity(s.len());
    let mut shift_abs = Vec::with_capacity(s.len());
    let mut sum = XComplex::ZERO;
    for t in s.terms() {
        let shifted = *z + XComplex::new(gamma_as_xreal(&t.gamma)?, XReal::ZERO);
        if on_cut(&shifted) {
            return Err(Error::BranchCut);
        }
        let powed = principal_pow(&shifted, -t.eps)?;
        let term = powed.scale(t.a.to_xreal()).rotate(t.theta_k);
        shift_abs.push(shifted.abs());
        sum = sum + term;
        terms.push(term);
    }
    Ok(SeriesEval { terms, shift_abs, sum })
}

fn tail_bound_at(s: &Schedule, z: &XComplex) -> TailBound {
    match s.tail_bound() {
        None => TailBound::Exact,
        Some(tail) => {
            let gamma_k = s.terms().last().expect("nonempty").gamma;
            // the term-wise estimate needs |z| <= gamma_K / 2
            let in_range = if z.is_zero() {
                true
            } else {
                z.abs().ln_abs() <= gamma_k.ln() - LN_2
            };
            if in_range {
                TailBound::Certified(tail.mul(&PosLog::from_ln(LN_2).expect("finite")))
            } else {
                TailBound::OutOfRange
            }
        }
    }
}

/// p(z) = sum of the series terms, with the certified truncation bound.
pub fn eval_p(s: &Schedule, z: &XComplex) -> Result<EvalResult> {
    let parts = eval_p_terms(s, z)?;
    Ok(EvalResult { value: parts.sum, trunc_bound: tail_bound_at(s, z), terms_used: s.len() })
}

/// F(z) = z + p(z).
pub fn eval_big_f(s: &Schedule, z: &XComplex) -> Result<EvalResult> {
    let p = eval_p(s, z)?;
    Ok(EvalResult { value: *z + p.value, trunc_bound: p.trunc_bound, terms_used: p.terms_used })
}

/// The upper-half-plane map f(z) = xi (w + p(w)) with w = conj(xi) z,
/// i.e. f(z) = z + xi p(conj(xi) z).
pub fn eval_f(s: &Schedule, angle: &AngleSpec, z: &XComplex) -> Result<EvalResult> {
    if z.is_zero() || !z.im.is_sign_positive() {
        return Err(Error::OutsideDomain("eval_f requires Im z > 0"));
    }
    let w = angle.to_cone_frame(z);
    debug_assert!(angle.half_plane().contains(&w), "conj(xi) z stays in the invariant half-plane");
    let p = eval_p(s, &w)?;
    let value = *z + angle.to_upper_half_plane(&p.value);
    if !value.im.is_sign_positive() {
        return Err(Error::NumericFailure(format!(
            "rounding pushed the image off the upper half-plane at z = {} + {}i",
            z.re, z.im
        )));
    }
    Ok(EvalResult { value, trunc_bound: p.trunc_bound, terms_used: p.terms_used })
}

/// The benchmark map z + i e^{pi/2} z^i + i e^{pi/2} on the upper half-plane.
pub fn eval_wolff(z: &XComplex) -> Result<XComplex> {
    if z.is_zero() {
        return Err(Error::ZeroBase);
    }
    if !z.im.is_sign_positive() {
        return Err(Error::OutsideDomain("the benchmark map lives on Im z > 0"));
    }
    let zi = principal_pow_imag(z)?;
    let one = XComplex::from_f64(1.0, 0.0);
    // i e^{pi/2} (z^i + 1)
    let drift = (zi + one).rotate(FRAC_PI_2).scale_f64(FRAC_PI_2.exp());
    Ok(*z + drift)
}

/// |f(z)/z - 1| along a sequence of samples; tends to zero along rays to
/// infinity exactly when the map fixes infinity with derivative one there.
pub fn parabolicity_probe(map: &MapHandle, samples: &[XComplex]) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|z| {
            let fz = map.apply(z)?;
            let dev = (fz - *z).abs();
            if dev.is_zero() {
                return Ok(0.0);
            }
            Ok((dev / z.abs()).to_f64())
        })
        .collect()
}

/// Term-wise upper bound for |p'(z)|: sum of eps_k a_k / |z+gamma_k|^{1+eps_k},
/// plus the certified derivative tail when the certificate applies at z.
pub fn deriv_bound_p(s: &Schedule, z: &XComplex) -> Result<PosLog> {
    let mut bounds = Vec::with_capacity(s.len() + 1);
    for t in s.terms() {
        let shifted = *z + XComplex::new(gamma_as_xreal(&t.gamma)?, XReal::ZERO);
        if on_cut(&shifted) {
            return Err(Error::BranchCut);
        }
        let ln_mod = shifted.abs().ln_abs();
        bounds.push(PosLog::from_ln(t.eps.ln() + t.a.ln() - (1.0 + t.eps) * ln_mod)?);
    }
    if let TailBound::Certified(tail2) = tail_bound_at(s, z) {
        // each dropped term's derivative bound is at most
        // 4 eps_K t_l / gamma_K given |z| <= gamma_K / 2 and eps decreasing
        let last = s.terms().last().expect("nonempty");
        let ln_extra = (4.0f64).ln() + last.eps.ln() - last.gamma.ln() - LN_2;
        bounds.push(PosLog::from_ln(tail2.ln() + ln_extra)?);
    }
    plog_sum(&bounds)
}

/// Reuses a [`SeriesEval`] to produce the same derivative bound without
/// re-evaluating the shifts (the orbit engine's hot path).
pub fn deriv_bound_from_parts(s: &Schedule, parts: &SeriesEval) -> Result<PosLog> {
    let mut bounds = Vec::with_capacity(s.len());
    for (t, m) in s.terms().iter().zip(&parts.shift_abs) {
        let ln_mod = m.ln_abs();
        bounds.push(PosLog::from_ln(t.eps.ln() + t.a.ln() - (1.0 + t.eps) * ln_mod)?);
    }
    plog_sum(&bounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Membership;
    use crate::schedule::{synthesize, Term};
    use crate::xnum::plog_add;
    use num_complex::Complex64;
    use std::f64::consts::{E, FRAC_PI_4, PI};

    fn angle_sym() -> AngleSpec {
        AngleSpec::new(FRAC_PI_4, 3.0 * FRAC_PI_4).unwrap()
    }

    fn single_term(a: f64, gamma: f64, eps: f64, theta_k: f64) -> Schedule {
        let term =
            Term::new(1, PosLog::new(a).unwrap(), PosLog::new(gamma).unwrap(), eps, theta_k).unwrap();
        Schedule::new(angle_sym(), vec![term], None).unwrap()
    }

    fn d1() -> Schedule {
        synthesize(angle_sym(), 4, 2.0).unwrap()
    }

    /// Independent f64 log/angle oracle for a single term, avoiding the
    /// XComplex principal_pow path entirely.
    fn term_oracle(a: f64, gamma: f64, eps: f64, theta_k: f64, z: Complex64) -> Complex64 {
        let shifted = z + gamma;
        let modulus = a * (-eps * shifted.norm().ln()).exp();
        let phase = theta_k - eps * shifted.arg();
        Complex64::from_polar(modulus, phase)
    }

    #[test]
    fn term_at_origin() {
        let s = single_term(2.0, E.powi(8), 0.125, PI / 8.0);
        let v = eval_term(&s, 1, &XComplex::ZERO).unwrap().to_complex64();
        // 2 e^{i pi/8} / e
        let expected = Complex64::from_polar(2.0 / E, PI / 8.0);
        assert!((v - expected).norm() < 1e-14);
        assert!((v.re - 0.6797308398678461).abs() < 1e-12);
        assert!((v.im - 0.2815832055265719).abs() < 1e-12);
    }

    #[test]
    fn term_simple_sqrt() {
        // a=1, theta=0, eps=1/2, gamma=1 at z=3: (3+1)^{-1/2} = 1/2
        let term = Term::new(1, PosLog::ONE, PosLog::ONE, 0.5, 0.0).unwrap();
        let s = Schedule::new(angle_sym(), vec![term], None).unwrap();
        let v = eval_term(&s, 1, &XComplex::from_f64(3.0, 0.0)).unwrap().to_complex64();
        assert!((v - Complex64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn term_matches_independent_oracle() {
        let s = single_term(2.0, 1024.0, 0.125, PI / 8.0);
        for &(x, y) in &[(0.0, 0.0), (3.0, 4.0), (-2.0, 7.0), (1e8, 1.0), (0.5, -0.25)] {
            let v = eval_term(&s, 1, &XComplex::from_f64(x, y)).unwrap().to_complex64();
            let o = term_oracle(2.0, 1024.0, 0.125, PI / 8.0, Complex64::new(x, y));
            assert!((v - o).norm() < 1e-12 * o.norm().max(1.0), "mismatch at ({x},{y})");
        }
    }

    #[test]
    fn term_errors_on_cut() {
        let s = single_term(1.0, 4.0, 0.125, 0.0);
        assert!(matches!(eval_term(&s, 1, &XComplex::from_f64(-5.0, 0.0)), Err(Error::BranchCut)));
        assert!(matches!(eval_term(&s, 1, &XComplex::from_f64(-4.0, 0.0)), Err(Error::BranchCut)));
        assert!(eval_term(&s, 1, &XComplex::from_f64(-3.9, 0.0)).is_ok());
    }

    #[test]
    fn term_arg_stays_in_its_sector() {
        let s = d1();
        let theta = s.angle().theta();
        for t in s.terms() {
            for &(x, y) in &[(1.0, 0.5), (100.0, -40.0), (1e6, 1e5)] {
                let v = eval_term(&s, t.k, &XComplex::from_f64(x, y)).unwrap();
                let arg = v.arg();
                assert!(arg > t.theta_k - PI * t.eps - 1e-12 && arg < t.theta_k + PI * t.eps + 1e-12);
                assert!(arg.abs() < theta, "term {} image stays in the cone", t.k);
            }
        }
    }

    #[test]
    fn p_single_term_is_term_and_exact() {
        let s = single_term(1.0, 1024.0, 0.125, -PI / 8.0);
        let z = XComplex::from_f64(3.0, 1.0);
        let p = eval_p(&s, &z).unwrap();
        let t = eval_term(&s, 1, &z).unwrap();
        assert_eq!(p.value, t);
        assert_eq!(p.trunc_bound, TailBound::Exact);
        assert_eq!(p.terms_used, 1);
    }

    #[test]
    fn p_at_origin_matches_sum_oracle_and_step_bound() {
        let s = d1();
        let v = eval_p(&s, &XComplex::ZERO).unwrap().value;
        // independent per-term oracle summation in f64 log/arg space
        let mut expected = Complex64::new(0.0, 0.0);
        for t in s.terms() {
            let modulus = (t.a.ln() - t.eps * t.gamma.ln()).exp();
            expected += Complex64::from_polar(modulus, t.theta_k);
        }
        assert!((v.to_complex64() - expected).norm() < 1e-12);
        // step bound: |p(0)| <= gamma_1 / 2
        let gamma1 = s.terms()[0].gamma.to_f64();
        assert!(v.abs().to_f64() <= gamma1 / 2.0);
    }

    #[test]
    fn p_image_in_cone_across_magnitudes() {
        let s = d1();
        let theta = s.angle().theta();
        let cone = s.angle().cone();
        let max_ln = s.terms().last().unwrap().gamma.ln();
        let mut rng = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..1000 {
            let ln_r = next() * max_ln;
            let psi = (next() * 2.0 - 1.0) * theta;
            let r = XReal::exp_of(ln_r);
            let z = XComplex::new(r * psi.cos(), r * psi.sin());
            assert!(cone.membership(&z) != Membership::Outside);
            let p = eval_p(&s, &z).unwrap().value;
            assert!(p.arg().abs() < theta - 1e-10, "arg(p) = {} at ln r = {}", p.arg(), ln_r);
        }
    }

    #[test]
    fn big_f_increases_re_and_keeps_cone() {
        let s = d1();
        let cone = s.angle().cone();
        for &(lr, psi) in &[(0.0, 0.1), (5.0, -0.7), (50.0, 0.3), (500.0, -0.2)] {
            let r = XReal::exp_of(lr);
            let z = XComplex::new(r * f64::cos(psi), r * f64::sin(psi));
            let fz = eval_big_f(&s, &z).unwrap().value;
            assert!(fz.re > z.re, "Re F(z) > Re z");
            assert!(cone.contains(&fz));
        }
    }

    #[test]
    fn big_f_simple_value() {
        // single term (a=1, theta=0, eps=1/2, gamma=1): F(3) = 3 + 1/2
        let term = Term::new(1, PosLog::ONE, PosLog::ONE, 0.5, 0.0).unwrap();
        let s = Schedule::new(angle_sym(), vec![term], None).unwrap();
        let v = eval_big_f(&s, &XComplex::from_f64(3.0, 0.0)).unwrap().value;
        assert!((v.to_complex64() - Complex64::new(3.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn conjugation_consistency() {
        let s = d1();
        let angle = *s.angle();
        // phi = pi/2, so f(z) = z + i p(-i z)
        assert!((angle.phi() - PI / 2.0).abs() < 1e-15);
        for &(x, y) in &[(0.0, 1.0), (1.0, 1.0), (-3.0, 2.0), (50.0, 80.0)] {
            let z = XComplex::from_f64(x, y);
            let f1 = eval_f(&s, &angle, &z).unwrap().value;
            // direct route: xi * F(conj(xi) z)
            let w = angle.to_cone_frame(&z);
            let f2 = angle.to_upper_half_plane(&eval_big_f(&s, &w).unwrap().value);
            let rel = (f1 - f2).abs().to_f64() / f1.abs().to_f64();
            assert!(rel < 1e-12, "conjugation mismatch {rel} at ({x},{y})");
            assert!(f1.im.is_sign_positive());
        }
    }

    #[test]
    fn f_displacement_direction_and_bound() {
        let s = d1();
        let angle = *s.angle();
        let (a, b) = (angle.a(), angle.b());
        // bound: |f(z)-z| <= (1/sin(a+theta)) * sum of term sizes
        let sizes: Vec<PosLog> = s.terms().iter().map(Term::size).collect();
        let mut sum = sizes[0];
        for t in &sizes[1..] {
            sum = plog_add(sum, *t);
        }
        let bound = sum.to_f64() / angle.phi().sin();
        let mut rng = 0xdeadbeefcafef00du64;
        let mut next = move || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..1000 {
            let z = XComplex::from_f64(200.0 * (next() - 0.5), 1e-3 + 100.0 * next());
            let fz = eval_f(&s, &angle, &z).unwrap().value;
            let d = fz - z;
            let arg = d.arg();
            assert!(arg > a && arg < b, "displacement direction {arg} outside ({a}, {b})");
            assert!(d.abs().to_f64() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn wolff_fixed_values() {
        // f(i) = i (2 + e^{pi/2})
        let v = eval_wolff(&XComplex::from_f64(0.0, 1.0)).unwrap().to_complex64();
        let expected = Complex64::new(0.0, 2.0 + FRAC_PI_2.exp());
        assert!((v - expected).norm() < 1e-13, "got {v}");
        // f(e i) = -sin 1 + i (e + cos 1 + e^{pi/2})
        let v = eval_wolff(&XComplex::from_f64(0.0, E)).unwrap().to_complex64();
        let expected = Complex64::new(-1f64.sin(), E + 1f64.cos() + FRAC_PI_2.exp());
        assert!((v - expected).norm() < 1e-13, "got {v}");
        assert!(matches!(eval_wolff(&XComplex::ZERO), Err(Error::ZeroBase)));
        assert!(eval_wolff(&XComplex::from_f64(1.0, -1.0)).is_err());
    }

    #[test]
    fn wolff_parabolicity_along_imaginary_ray() {
        let map = MapHandle::wolff();
        let samples: Vec<XComplex> =
            [1e2, 1e4, 1e6].iter().map(|&y| XComplex::from_f64(0.0, y)).collect();
        let probes = parabolicity_probe(&map, &samples).unwrap();
        // decreasing toward zero, bounded by 2 e^{pi/2} / y
        for (i, &y) in [1e2f64, 1e4, 1e6].iter().enumerate() {
            assert!(probes[i] <= 2.0 * FRAC_PI_2.exp() / y);
        }
        assert!(probes[0] > probes[1] && probes[1] > probes[2]);
    }

    #[test]
    fn schedule_map_parabolicity_along_imaginary_ray() {
        let s = d1();
        let map = MapHandle::from_schedule(s.clone(), MapVariant::FOnUpperHalfPlane).unwrap();
        let samples: Vec<XComplex> =
            [1e3, 1e6, 1e9].iter().map(|&y| XComplex::from_f64(0.0, y)).collect();
        let probes = parabolicity_probe(&map, &samples).unwrap();
        // |p| is globally bounded by the step-bound sum, so probe <= sup|p| / y
        let sizes: Vec<PosLog> = s.terms().iter().map(Term::size).collect();
        let mut sup = sizes[0];
        for t in &sizes[1..] {
            sup = plog_add(sup, *t);
        }
        let sup = sup.to_f64() / s.angle().phi().sin();
        for (i, &y) in [1e3f64, 1e6, 1e9].iter().enumerate() {
            assert!(probes[i] <= sup / y * (1.0 + 1e-12));
        }
        assert!(probes[0] > probes[1] && probes[1] > probes[2]);
    }

    #[test]
    fn deriv_bound_single_term_value() {
        // (a=1, theta=0, eps=1/2, gamma=1) at z=3: (1/2) * 4^{-3/2} = 1/16
        let term = Term::new(1, PosLog::ONE, PosLog::ONE, 0.5, 0.0).unwrap();
        let s = Schedule::new(angle_sym(), vec![term], None).unwrap();
        let b = deriv_bound_p(&s, &XComplex::from_f64(3.0, 0.0)).unwrap();
        assert!((b.to_f64() - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn deriv_bound_dominates_finite_differences() {
        let s = d1();
        let mut rng = 0x123456789abcdefu64;
        let mut next = move || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..1000 {
            let x = 1.0 + 400.0 * next();
            let y = 200.0 * (next() - 0.5);
            let z = XComplex::from_f64(x, y);
            let h = 1e-6 * x.max(1.0);
            let zp = XComplex::from_f64(x + h, y);
            let bound = deriv_bound_p(&s, &z).unwrap().to_f64();
            let fd = (eval_p(&s, &zp).unwrap().value - eval_p(&s, &z).unwrap().value)
                .abs()
                .to_f64()
                / h;
            assert!(fd <= bound * (1.0 + 1e-6) + 1e-300, "fd {fd} > bound {bound} at ({x},{y})");
        }
    }

    #[test]
    fn deriv_bound_decays_far_beyond_last_shift() {
        let s = d1();
        let ln_gk = s.terms().last().unwrap().gamma.ln();
        let mut prev = f64::INFINITY;
        for mult in [1.0, 2.0, 4.0, 8.0] {
            let z = XComplex::new(XReal::exp_of(ln_gk * mult), XReal::ZERO);
            let b = deriv_bound_p(&s, &z).unwrap();
            assert!(b.ln() < prev);
            prev = b.ln();
        }
    }

    #[test]
    fn truncation_bound_sound_against_longer_schedule() {
        // Build K=7 and truncate to K=2 with an honest observed-ratio
        // certificate; the difference must stay within the certified bound.
        let full = synthesize(angle_sym(), 7, 2.0).unwrap();
        let sizes: Vec<f64> = full.terms().iter().map(|t| t.size().ln()).collect();
        let mut worst_ratio = f64::NEG_INFINITY;
        for w in sizes.windows(2).skip(1) {
            worst_ratio = worst_ratio.max(w[1] - w[0]);
        }
        let cert = crate::schedule::TailCertificate { l0: 2, ratio_bound: worst_ratio.exp().max(1e-300) };
        let short = Schedule::new(*full.angle(), full.terms()[..2].to_vec(), Some(cert)).unwrap();

        let gamma2 = short.terms()[1].gamma.ln();
        let mut rng = 0xabcdef0123456789u64;
        let mut next = move || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..1000 {
            let ln_r = next() * (gamma2 - LN_2);
            let psi = (next() * 2.0 - 1.0) * 0.7;
            let r = XReal::exp_of(ln_r);
            let z = XComplex::new(r * psi.cos(), r * psi.sin());
            let short_eval = eval_p(&short, &z).unwrap();
            let full_eval = eval_p(&full, &z).unwrap();
            let diff = (short_eval.value - full_eval.value).abs();
            match short_eval.trunc_bound {
                TailBound::Certified(bound) => {
                    if !diff.is_zero() {
                        assert!(
                            diff.ln_abs() <= bound.ln() + 1e-9,
                            "tail bound violated: diff {} vs bound {}",
                            diff.ln_abs(),
                            bound.ln()
                        );
                    }
                }
                other => panic!("expected certified bound inside range, got {other:?}"),
            }
        }
    }

    #[test]
    fn eval_p_errors_on_excluded_ray() {
        let s = single_term(1.0, 4.0, 0.125, -PI / 8.0);
        assert!(matches!(eval_p(&s, &XComplex::from_f64(-4.0, 0.0)), Err(Error::BranchCut)));
        assert!(eval_p(&s, &XComplex::from_f64(-3.99, 0.0)).is_ok());
    }
}
