//! Boundary measure analysis: the density of the representing measure, its
//! absolute moment with per-term analytic tail bounds, the drift constant,
//! and reconstruction of the map from its integral representation as a
//! two-route consistency oracle.
//!
//! The measure's density is v*(t) / (pi (1 + t^2)) where v*(t) is the
//! boundary value of Im(f(t) - t) = Im(xi p(conj(xi) t)). Every improper
//! integral is evaluated on a symmetric log-scaled range [-T, T]; beyond the
//! cut the per-term analytic estimates (central / right / left split at each
//! shift) certify the remainder. T never sits below max(gamma_K^2, 1e6) and
//! is pushed further out until the certified remainder is small against the
//! requested tolerance, which the log-variable quadrature makes nearly free.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::AngleSpec;
use crate::holomap::{eval_f, eval_p, MapHandle};
use crate::quad::{breakpoint_chain, integrate_piecewise, QuadResult, QuadValue};
use crate::schedule::{check_l1_condition, L1Report, L1Verdict, Schedule};
use crate::xnum::{plog_sum, PosLog, XComplex, XReal};

/// Density values this far below zero are clamped (rounding noise); anything
/// lower is an invariant violation.
const DENSITY_CLAMP: f64 = 1e-12;

/// Everything below |t| = T_MIN_CORE is covered by an analytic neglect bound
/// instead of quadrature in the moment integrals.
const T_MIN_CORE: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Boundary density
// ---------------------------------------------------------------------------

fn v_star_at(s: &Schedule, angle: &AngleSpec, t: &XComplex) -> Result<f64> {
    let w = angle.to_cone_frame(t);
    let p = eval_p(s, &w)?;
    Ok(angle.to_upper_half_plane(&p.value).im.to_f64())
}

/// Boundary value v*(t) = Im(xi p(conj(xi) t)) for real t given as ln|t| and
/// a sign, usable far beyond the f64 range.
pub fn v_star_ln(s: &Schedule, angle: &AngleSpec, ln_abs_t: f64, negative: bool) -> Result<f64> {
    let mag = XReal::exp_of(ln_abs_t);
    let re = if negative { -mag } else { mag };
    v_star_at(s, angle, &XComplex::new(re, XReal::ZERO))
}

fn density_from_v(v: f64, one_plus_t2_ln: f64, t_for_error: f64) -> Result<f64> {
    let d = v * (-one_plus_t2_ln).exp() / PI;
    if d >= 0.0 {
        Ok(d)
    } else if d >= -DENSITY_CLAMP {
        Ok(0.0)
    } else {
        Err(Error::NegativeDensity { t: t_for_error, value: d })
    }
}

/// The measure's density against Lebesgue measure at a real point t:
/// v*(t) / (pi (1 + t^2)), clamped at -1e-12.
pub fn boundary_density(s: &Schedule, angle: &AngleSpec, t: f64) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::NotFinite);
    }
    let v = v_star_at(s, angle, &XComplex::from_f64(t, 0.0))?;
    density_from_v(v, t.mul_add(t, 1.0).ln(), t)
}

/// Extended-range variant of [`boundary_density`]: t = ±e^{ln_abs_t}.
pub fn boundary_density_ln(s: &Schedule, angle: &AngleSpec, ln_abs_t: f64, negative: bool) -> Result<f64> {
    let v = v_star_ln(s, angle, ln_abs_t, negative)?;
    // ln(1 + t^2) stable for any magnitude
    let l = if ln_abs_t > 0.0 {
        2.0 * ln_abs_t + (-2.0 * ln_abs_t).exp().ln_1p()
    } else {
        (2.0 * ln_abs_t).exp().ln_1p()
    };
    let sign_t = if negative { -1.0 } else { 1.0 };
    density_from_v(v, l, sign_t * ln_abs_t.exp())
}

// ---------------------------------------------------------------------------
// Density sources (schedule-backed or injected for tests)
// ---------------------------------------------------------------------------

/// Boundary data the improper integrals consume: v* at moderate t, v* in the
/// log variable for the wings, and a global sup bound for neglect estimates.
pub(crate) trait VStarSource {
    fn at_t(&self, t: f64) -> Result<f64>;
    fn at_u(&self, u: f64, negative: bool) -> Result<f64>;
    fn sup(&self) -> f64;
}

struct ScheduleVStar<'a> {
    s: &'a Schedule,
    angle: &'a AngleSpec,
}

impl VStarSource for ScheduleVStar<'_> {
    fn at_t(&self, t: f64) -> Result<f64> {
        v_star_at(self.s, self.angle, &XComplex::from_f64(t, 0.0))
    }

    fn at_u(&self, u: f64, negative: bool) -> Result<f64> {
        v_star_ln(self.s, self.angle, u, negative)
    }

    fn sup(&self) -> f64 {
        // v* <= sum a_k / (gamma_k sin phi)^{eps_k} <= (1/sin phi) sum t_k
        let sizes: Vec<PosLog> = self.s.terms().iter().map(|t| t.size()).collect();
        match plog_sum(&sizes) {
            Ok(total) => total.to_f64() / self.angle.phi().sin(),
            Err(_) => f64::INFINITY,
        }
    }
}

/// Collects the first evaluation error raised inside a quadrature closure so
/// the closure itself can stay infallible.
struct Poison(RefCell<Option<Error>>);

impl Poison {
    fn new() -> Self {
        Self(RefCell::new(None))
    }

    fn guard<V: QuadValue>(&self, r: Result<V>) -> V {
        match r {
            Ok(v) => v,
            Err(e) => {
                let mut slot = self.0.borrow_mut();
                if slot.is_none() {
                    *slot = Some(e);
                }
                V::zero()
            }
        }
    }

    fn check(self) -> Result<()> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

// ---------------------------------------------------------------------------
// Tail machinery
// ---------------------------------------------------------------------------

/// Side factors of the integral estimates: on one side of the real line the
/// shifted modulus is at least |t| outright, on the other it degrades by
/// 1 - |cos phi|. For phi <= pi/2 the weak side is the left one; past pi/2
/// the roles swap.
fn side_factors(phi: f64) -> (f64, f64) {
    let c = phi.cos();
    if c >= 0.0 {
        (1.0, 1.0 / (1.0 - c))
    } else {
        (1.0 / (1.0 + c), 1.0)
    }
}

/// Certified remainder of the |t|-weighted measure integral beyond T, summed
/// per term: a_k (s_r + s_l) / (pi eps_k T^{eps_k}), valid for T >= gamma_K.
fn moment_remainder_beyond(s: &Schedule, angle: &AngleSpec, ln_t_cut: f64) -> f64 {
    let (sr, sl) = side_factors(angle.phi());
    let mut total = 0.0;
    for t in s.terms() {
        let ln_r = t.a.ln() + (sr + sl).ln() - PI.ln() - t.eps.ln() - t.eps * ln_t_cut;
        total += ln_r.exp();
    }
    total
}

/// ln T needed so the per-term remainders sum below `target`.
fn ln_t_for_target(s: &Schedule, angle: &AngleSpec, target: f64) -> f64 {
    let (sr, sl) = side_factors(angle.phi());
    let k_count = s.len() as f64;
    let mut ln_t: f64 = 0.0;
    for t in s.terms() {
        let needed =
            (t.a.ln() + (sr + sl).ln() + k_count.ln() - PI.ln() - t.eps.ln() - target.ln()) / t.eps;
        ln_t = ln_t.max(needed);
    }
    ln_t
}

/// The quadrature cut: never below max(gamma_K^2, 1e6), extended until the
/// certified remainder fits the target.
fn ln_t_cut(s: &Schedule, angle: &AngleSpec, target: f64) -> f64 {
    let g_last = s.terms().last().expect("nonempty").gamma.ln();
    (2.0 * g_last).max(1e6f64.ln()).max(ln_t_for_target(s, angle, target))
}

fn u_breakpoints(s: &Schedule, angle: &AngleSpec, u_lo: f64, u_hi: f64) -> Vec<f64> {
    let mut pts = Vec::new();
    // doubling ladder covers the slow log-scale variation
    let mut u = 1.0;
    while u < u_hi {
        pts.push(u);
        u *= 2.0;
    }
    let cos_mag = angle.phi().cos().abs();
    for t in s.terms() {
        let lg = t.gamma.ln();
        pts.extend_from_slice(&[lg - 1.0, lg, lg + 1.0, 2.0 * lg]);
        if cos_mag > 0.0 {
            // density bump where |conj(xi) t + gamma_k| is smallest
            pts.push(lg + cos_mag.ln());
        }
    }
    breakpoint_chain(u_lo, u_hi, &pts)
}

// ---------------------------------------------------------------------------
// Moment integral and drift
// ---------------------------------------------------------------------------

/// One term's analytic bound pieces for the |t|-moment, split at its own
/// shift as central / right / left (all including the 1/pi of the measure).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MomentTermBound {
    pub k: usize,
    pub central: f64,
    pub right_tail: f64,
    pub left_tail: f64,
}

impl MomentTermBound {
    pub fn total(&self) -> f64 {
        self.central + self.right_tail + self.left_tail
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentReport {
    /// Numeric integral of |t| against the measure over [-T, T].
    pub value: f64,
    /// Accumulated quadrature error estimate.
    pub quad_error: f64,
    /// Certified remainder beyond the cut plus the central neglect.
    pub remainder: f64,
    /// ln of the cut T.
    pub ln_t_cut: f64,
    /// Both moment-condition sums converge (certificate present).
    pub certified: bool,
    /// Per-term analytic bounds anchored at each term's own shift.
    pub per_term: Vec<MomentTermBound>,
}

impl MomentReport {
    /// Assembled analytic bound on the full integral.
    pub fn analytic_bound(&self) -> f64 {
        self.per_term.iter().map(MomentTermBound::total).sum()
    }
}

fn per_term_bounds(s: &Schedule, angle: &AngleSpec) -> Vec<MomentTermBound> {
    let phi = angle.phi();
    let (sr, sl) = side_factors(phi);
    s.terms()
        .iter()
        .map(|t| {
            let lg = t.gamma.ln();
            let ln_logterm = if lg > 0.0 {
                (2.0 * lg + (-2.0 * lg).exp().ln_1p()).ln()
            } else {
                (2.0 * lg).exp().ln_1p().ln()
            };
            let base = t.a.ln() - t.eps * lg - PI.ln();
            MomentTermBound {
                k: t.k,
                central: (base + ln_logterm - phi.sin().ln()).exp(),
                right_tail: (base - t.eps.ln() + sr.ln()).exp(),
                left_tail: (base - t.eps.ln() + sl.ln()).exp(),
            }
        })
        .collect()
}

/// Weight applied to v* on the wings: du-integrand = v* * w(u) / pi.
enum WingWeight {
    /// |t| d mu: w = 1 / (1 + e^{-2u}).
    AbsMoment,
    /// t d mu: signed moment.
    SignedMoment,
}

fn wing_moment_integral(
    src: &dyn VStarSource,
    s: &Schedule,
    angle: &AngleSpec,
    weight: WingWeight,
    u_lo: f64,
    u_hi: f64,
    tol: f64,
) -> Result<QuadResult<f64>> {
    let pts = u_breakpoints(s, angle, u_lo, u_hi);
    let poison = Poison::new();
    let mut value = 0.0;
    let mut err = 0.0;
    let mut evals = 0;
    for negative in [false, true] {
        let sign = match weight {
            WingWeight::AbsMoment => 1.0,
            WingWeight::SignedMoment => {
                if negative {
                    -1.0
                } else {
                    1.0
                }
            }
        };
        let mut f = |u: f64| {
            let v = poison.guard(src.at_u(u, negative));
            sign * v / (PI * (1.0 + (-2.0 * u).exp()))
        };
        let r = integrate_piecewise(&mut f, &pts, tol / 2.0)?;
        value += r.value;
        err += r.err_est;
        evals += r.evals;
    }
    poison.check()?;
    Ok(QuadResult { value, err_est: err, evals })
}

fn moment_abs_impl(
    src: &dyn VStarSource,
    s: &Schedule,
    angle: &AngleSpec,
    tol: f64,
    l1: &L1Report,
) -> Result<MomentReport> {
    let target = 0.25 * tol;
    let u_hi = ln_t_cut(s, angle, target);
    let u_lo = T_MIN_CORE.ln();
    let quad = wing_moment_integral(src, s, angle, WingWeight::AbsMoment, u_lo, u_hi, 0.5 * tol)?;
    let neglect = T_MIN_CORE * T_MIN_CORE * src.sup() / PI;
    let remainder = moment_remainder_beyond(s, angle, u_hi) + neglect;
    Ok(MomentReport {
        value: quad.value,
        quad_error: quad.err_est,
        remainder,
        ln_t_cut: u_hi,
        certified: l1.verdict == L1Verdict::Pass,
        per_term: per_term_bounds(s, angle),
    })
}

/// Absolute moment of the boundary measure, with the proof-style per-term
/// analytic bounds and a certified remainder beyond the cut. When the
/// moment-condition sums are not certified the value is still returned,
/// flagged `certified: false`.
pub fn moment_abs(s: &Schedule, angle: &AngleSpec, tol: f64) -> Result<MomentReport> {
    let l1 = check_l1_condition(s)?;
    let src = ScheduleVStar { s, angle };
    moment_abs_impl(&src, s, angle, tol, &l1)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BetaEstimate {
    /// Signed first moment of the measure: the drift constant.
    pub value: f64,
    pub quad_error: f64,
    /// Certified bound on everything outside the quadrature range.
    pub tail_bound: f64,
}

impl BetaEstimate {
    /// Total error budget the estimate claims.
    pub fn error_estimate(&self) -> f64 {
        self.quad_error + self.tail_bound
    }
}

fn beta_impl(src: &dyn VStarSource, s: &Schedule, angle: &AngleSpec, tol: f64) -> Result<BetaEstimate> {
    let target = 0.25 * tol;
    let u_hi = ln_t_cut(s, angle, target);
    let u_lo = T_MIN_CORE.ln();
    let quad = wing_moment_integral(src, s, angle, WingWeight::SignedMoment, u_lo, u_hi, 0.5 * tol)?;
    let neglect = T_MIN_CORE * T_MIN_CORE * src.sup() / PI;
    let tail = moment_remainder_beyond(s, angle, u_hi) + neglect;
    Ok(BetaEstimate { value: quad.value, quad_error: quad.err_est, tail_bound: tail })
}

/// The drift constant beta = integral of t against the measure.
pub fn beta_of(s: &Schedule, angle: &AngleSpec, tol: f64) -> Result<BetaEstimate> {
    let src = ScheduleVStar { s, angle };
    beta_impl(&src, s, angle, tol)
}

/// The representing pair: drift plus the moment diagnostics. The measure
/// itself is exposed through [`boundary_density`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HerglotzPair {
    pub beta: BetaEstimate,
    pub moment: MomentReport,
}

pub fn herglotz_pair(s: &Schedule, angle: &AngleSpec, tol: f64) -> Result<HerglotzPair> {
    Ok(HerglotzPair { beta: beta_of(s, angle, tol)?, moment: moment_abs(s, angle, tol)? })
}

// ---------------------------------------------------------------------------
// Reconstruction
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointCheck {
    pub z: (f64, f64),
    /// f(z) - z evaluated through the series.
    pub direct: (f64, f64),
    /// The same displacement recovered from the boundary measure.
    pub integral: (f64, f64),
    pub rel_error: f64,
    /// Certified truncation slack relative to |direct|.
    pub tail_slack_rel: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReconstructReport {
    pub max_rel_error: f64,
    pub tol: f64,
    pub points: Vec<PointCheck>,
}

impl ReconstructReport {
    /// The acceptance predicate: every point within tol plus its tail slack.
    pub fn within_tolerance(&self) -> bool {
        self.points.iter().all(|p| p.rel_error <= self.tol + p.tail_slack_rel)
    }
}

/// Compares f(z) - z against the Cauchy-type integral of the boundary
/// density at each sample point and returns the worst relative error.
///
/// The integrand combines the kernel with the density so the polynomial
/// factors cancel: (1 + t^2) / (t - z) * density(t) = v*(t) / (pi (t - z)),
/// which is the form integrated here.
pub fn reconstruct_check(
    s: &Schedule,
    angle: &AngleSpec,
    zs: &[Complex64],
    tol: f64,
) -> Result<ReconstructReport> {
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be nonnegative, got {tol}")));
    }
    let src = ScheduleVStar { s, angle };
    let mut points = Vec::with_capacity(zs.len());
    let mut max_rel = 0.0f64;

    for &z in zs {
        if z.im < 1.0 {
            return Err(Error::OutsideDomain("reconstruction samples need Im z >= 1"));
        }
        let zx = XComplex::from_f64(z.re, z.im);
        let direct = (eval_f(s, angle, &zx)?.value - zx).to_complex64();
        let scale = direct.norm();

        // effective tolerance: never ask the quadrature for more than the
        // point's share of the relative target
        let tol_eff = tol.max(1e-9);
        let target_abs = 0.5 * tol_eff * scale;
        let u_hi = ln_t_cut(s, angle, 0.5 * target_abs);

        let poison = Poison::new();
        // core [-2, 2] in t-space
        let core_pts = breakpoint_chain(-2.0, 2.0, &[-1.0, 0.0, z.re.clamp(-1.9, 1.9), 1.0]);
        let mut core_f = |t: f64| {
            let v = poison.guard(src.at_t(t));
            Complex64::new(v, 0.0) / (PI * (Complex64::new(t, 0.0) - z))
        };
        let core = integrate_piecewise(&mut core_f, &core_pts, target_abs / 3.0)?;

        // wings in the log variable
        let pts = u_breakpoints(s, angle, 2f64.ln(), u_hi);
        let mut value = core.value;
        let mut err = core.err_est;
        for negative in [false, true] {
            let sigma = if negative { -1.0 } else { 1.0 };
            let mut f = |u: f64| {
                let v = poison.guard(src.at_u(u, negative));
                let scale_back = z * sigma * (-u).exp();
                Complex64::new(sigma * v, 0.0) / (PI * (Complex64::new(1.0, 0.0) - scale_back))
            };
            let r = integrate_piecewise(&mut f, &pts, target_abs / 3.0)?;
            value += r.value;
            err += r.err_est;
        }
        poison.check()?;

        let t_cut = u_hi.exp(); // may be +inf, handled below
        let geometry_factor = if t_cut.is_finite() { 1.0 / (1.0 - z.norm() / t_cut) } else { 1.0 };
        let tail = moment_remainder_beyond(s, angle, u_hi) * geometry_factor;

        let rel = (value - direct).norm() / scale;
        max_rel = max_rel.max(rel);
        points.push(PointCheck {
            z: (z.re, z.im),
            direct: (direct.re, direct.im),
            integral: (value.re, value.im),
            rel_error: rel,
            tail_slack_rel: (tail + err) / scale,
        });
    }

    Ok(ReconstructReport { max_rel_error: max_rel, tol, points })
}

/// Reconstruction for a map handle; only schedule-backed maps have a
/// representing measure to integrate.
pub fn reconstruct_check_for(map: &MapHandle, zs: &[Complex64], tol: f64) -> Result<ReconstructReport> {
    match map.schedule() {
        Some(s) => reconstruct_check(s, map.angle().expect("schedule-backed"), zs, tol),
        None => Err(Error::UnsupportedVariant("reconstruction needs a schedule-backed map")),
    }
}
