//! Orbit iteration with region transit diagnostics.
//!
//! Two engines share the bookkeeping: `iterate_exact` applies the map one
//! application at a time; `iterate_accelerated` advances m applications per
//! landing via the first-order freezing step z <- z + m p(z), with m chosen
//! as a power of two so application counts stay exact in big-integer
//! arithmetic. The freezing error is controlled by the certified derivative
//! bound (m * bound <= eta), and supersteps never skip a region boundary:
//! landings approach each boundary geometrically and cross it with a single
//! exact application, so entry/exit counts are exact.

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::geometry::{hyp_dist, AngleSpec};
use crate::holomap::{
    deriv_bound_from_parts, eval_p_terms, MapHandle, MapVariant, SeriesEval,
};
use crate::schedule::Schedule;
use crate::xnum::{XComplex, XReal};

/// Slack applied to the per-application step bound and the cone membership
/// assertions, covering float rounding only.
const ASSERT_SLACK: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrbitDomain {
    /// Schedule-backed map iterated on the invariant cone.
    Cone,
    /// Map of the upper half-plane (benchmark map, rotated variants).
    UpperHalfPlane,
    /// Test stubs with no domain assertions.
    Free,
}

/// Anything the engines can iterate. Schedule-backed handles enable region
/// tracking and acceleration; stubs get plain iteration.
pub trait OrbitMap {
    fn apply(&self, z: &XComplex) -> Result<XComplex>;
    fn domain(&self) -> OrbitDomain;
    fn schedule(&self) -> Option<&Schedule> {
        None
    }
    fn angle(&self) -> Option<&AngleSpec> {
        None
    }
}

impl OrbitMap for MapHandle {
    fn apply(&self, z: &XComplex) -> Result<XComplex> {
        MapHandle::apply(self, z)
    }

    fn domain(&self) -> OrbitDomain {
        match self.variant() {
            MapVariant::FOnCone | MapVariant::GOnHalfPlane => OrbitDomain::Cone,
            MapVariant::FOnUpperHalfPlane | MapVariant::Wolff => OrbitDomain::UpperHalfPlane,
        }
    }

    fn schedule(&self) -> Option<&Schedule> {
        MapHandle::schedule(self)
    }

    fn angle(&self) -> Option<&AngleSpec> {
        MapHandle::angle(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrbitMode {
    Exact,
    Accelerated,
}

#[derive(Clone, Debug)]
pub struct OrbitConfig {
    /// Start point; defaults to gamma_1 / 2 on the cone axis for
    /// schedule-backed maps and is required otherwise.
    pub z0: Option<XComplex>,
    pub mode: OrbitMode,
    /// Argument tolerance used by the slope report.
    pub tol_arg: f64,
    /// Relative-change cap per accelerated landing: m * |p'| bound <= eta.
    pub eta: f64,
    /// Application budget. Required for maps without regions.
    pub max_applications: Option<BigUint>,
    /// Exact-mode checkpoint stride; 0 selects geometric (doubling) marks.
    pub checkpoint_stride: u64,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self {
            z0: None,
            mode: OrbitMode::Accelerated,
            tol_arg: 1e-6,
            eta: 1e-3,
            max_applications: None,
            checkpoint_stride: 0,
        }
    }
}

impl OrbitConfig {
    pub fn validated(self) -> Result<Self> {
        if !(self.eta > 0.0 && self.eta <= 0.1) {
            return Err(Error::InvalidConfig(format!("eta must be in (0, 0.1], got {}", self.eta)));
        }
        if !(self.tol_arg > 0.0) {
            return Err(Error::InvalidConfig(format!("tol_arg must be positive, got {}", self.tol_arg)));
        }
        Ok(self)
    }
}

/// First entry / first exit record for one transit region.
#[derive(Clone, Debug)]
pub struct RegionEvent {
    pub k: usize,
    pub entry_count: BigUint,
    pub entry_z: XComplex,
    pub exit_count: Option<BigUint>,
    pub exit_z: Option<XComplex>,
    /// Largest dominance ratio |R_k| observed at landings inside the region.
    pub max_abs_rk: f64,
    /// Worst margin of the step-quotient band over exact steps inside the
    /// region (sign-adjusted so nonnegative means the band held). None when
    /// no exact step started inside or the band angle is out of tan range.
    pub min_quotient_margin: Option<f64>,
    /// Re(entry_z) - gamma_k.
    pub entry_overshoot: f64,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub count: BigUint,
    pub z: XComplex,
    pub region_k: Option<usize>,
    pub abs_rk: Option<f64>,
    pub hyp_step: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceFrame {
    Cone,
    UpperHalfPlane,
}

#[derive(Clone, Debug)]
pub struct OrbitTrace {
    pub checkpoints: Vec<Checkpoint>,
    pub events: Vec<RegionEvent>,
    pub total_applications: BigUint,
    /// All K regions transited (schedule maps) or the budget ran to the end.
    pub complete: bool,
    /// Set when the run stopped early (budget exhausted mid-transit).
    pub incomplete_reason: Option<String>,
    pub frame: TraceFrame,
    pub angle: Option<AngleSpec>,
    pub has_regions: bool,
    /// Running extremes of arg(z) over the trace tail (from the first region
    /// entry, or from a tenth of the budget for region-free maps).
    pub arg_min_tail: f64,
    pub arg_max_tail: f64,
    /// Count of supersteps (accelerated) or applications (exact) performed.
    pub landings: u64,
    /// Largest per-application real step observed.
    pub max_step_re: f64,
}

struct Boundary {
    x: XReal,
    k: usize,
    is_entry: bool,
}

struct Engine<'a> {
    map: &'a dyn OrbitMap,
    schedule: Option<&'a Schedule>,
    angle: Option<AngleSpec>,
    domain: OrbitDomain,
    theta: f64,
    step_cap: f64,
    boundaries: Vec<Boundary>,
    next_boundary: usize,
    open_region: Option<usize>,
    events: Vec<RegionEvent>,
    checkpoints: Vec<Checkpoint>,
    count: BigUint,
    landings: u64,
    tail_started: bool,
    tail_start_count: Option<BigUint>,
    arg_min: f64,
    arg_max: f64,
    next_mark: BigUint,
    stride: u64,
    since_ckpt: u64,
    max_step_re: f64,
}

impl<'a> Engine<'a> {
    fn new(map: &'a dyn OrbitMap, cfg: &OrbitConfig) -> Result<Self> {
        let schedule = map.schedule();
        let domain = map.domain();
        let angle = map.angle().copied();
        let (theta, step_cap) = match (domain, schedule) {
            (OrbitDomain::Cone, Some(s)) => {
                let gamma1 = s.terms()[0].gamma;
                (s.angle().theta(), gamma1.to_f64() / 2.0)
            }
            _ => (f64::INFINITY, f64::INFINITY),
        };
        let boundaries = match (domain, schedule) {
            (OrbitDomain::Cone, Some(s)) => {
                let mut b = Vec::with_capacity(2 * s.len());
                for t in s.terms() {
                    if t.gamma.ln() * 2.0 > 4.0e18 {
                        return Err(Error::NumericFailure(format!(
                            "region boundary gamma_{}^2 exceeds the representable exponent range",
                            t.k
                        )));
                    }
                    b.push(Boundary { x: t.gamma.to_xreal(), k: t.k, is_entry: true });
                    b.push(Boundary { x: XReal::exp_of(2.0 * t.gamma.ln()), k: t.k, is_entry: false });
                }
                // gamma growth puts these in ascending order already; sort anyway
                b.sort_by(|p, q| p.x.cmp(&q.x));
                b
            }
            _ => Vec::new(),
        };
        let tail_start_count = match (schedule, &cfg.max_applications) {
            (Some(_), _) => None, // tail starts at first region entry
            (None, Some(budget)) => Some(budget / 10u32),
            (None, None) => None,
        };
        Ok(Self {
            map,
            schedule,
            angle,
            domain,
            theta,
            step_cap,
            boundaries,
            next_boundary: 0,
            open_region: None,
            events: Vec::new(),
            checkpoints: Vec::new(),
            count: BigUint::from(0u32),
            landings: 0,
            tail_started: false,
            tail_start_count,
            arg_min: f64::INFINITY,
            arg_max: f64::NEG_INFINITY,
            next_mark: BigUint::from(1u32),
            stride: cfg.checkpoint_stride,
            since_ckpt: 0,
            max_step_re: 0.0,
        })
    }

    fn assert_domain(&self, z: &XComplex) -> Result<()> {
        match self.domain {
            OrbitDomain::Cone => {
                if z.arg().abs() > self.theta + ASSERT_SLACK {
                    return Err(Error::NumericFailure(format!(
                        "iterate left the cone at application {}: arg = {}",
                        self.count,
                        z.arg()
                    )));
                }
            }
            OrbitDomain::UpperHalfPlane => {
                if !z.im.is_sign_positive() {
                    return Err(Error::NumericFailure(format!(
                        "iterate left the upper half-plane at application {}",
                        self.count
                    )));
                }
            }
            OrbitDomain::Free => {}
        }
        Ok(())
    }

    /// Per-application real displacement check: 0 < dx <= gamma_1 / 2.
    fn assert_step(&mut self, step_re: f64) -> Result<()> {
        if self.domain != OrbitDomain::Cone {
            return Ok(());
        }
        if step_re <= 0.0 {
            return Err(Error::NumericFailure(format!(
                "real part not increasing at application {}: dx = {step_re}",
                self.count
            )));
        }
        if step_re > self.step_cap * (1.0 + ASSERT_SLACK) {
            return Err(Error::NumericFailure(format!(
                "step bound violated at application {}: dx = {step_re} > gamma_1/2 = {}",
                self.count, self.step_cap
            )));
        }
        self.max_step_re = self.max_step_re.max(step_re);
        Ok(())
    }

    /// |R_k| = |(p - p_k) / p_k| inside region k.
    fn dominance_ratio(parts: &SeriesEval, k: usize) -> f64 {
        let pk = parts.terms[k - 1];
        let rest = parts.sum - pk;
        if rest.is_zero() {
            return 0.0;
        }
        (rest.abs() / pk.abs()).to_f64()
    }

    /// Fires entry/exit events for any boundary crossed at the new landing.
    fn update_regions(&mut self, z: &XComplex, parts: Option<&SeriesEval>) -> Result<()> {
        while self.next_boundary < self.boundaries.len() {
            let b = &self.boundaries[self.next_boundary];
            let crossed = if b.is_entry { z.re >= b.x } else { z.re > b.x };
            if !crossed {
                break;
            }
            if b.is_entry {
                let overshoot = (z.re - b.x).to_f64();
                if overshoot > self.step_cap * (1.0 + ASSERT_SLACK) {
                    return Err(Error::NumericFailure(format!(
                        "entry overshoot {} exceeds gamma_1/2 at region {}",
                        overshoot, b.k
                    )));
                }
                self.events.push(RegionEvent {
                    k: b.k,
                    entry_count: self.count.clone(),
                    entry_z: *z,
                    exit_count: None,
                    exit_z: None,
                    max_abs_rk: 0.0,
                    min_quotient_margin: None,
                    entry_overshoot: overshoot,
                });
                self.open_region = Some(b.k);
                self.tail_started = true;
            } else {
                let ev = self
                    .events
                    .iter_mut()
                    .rev()
                    .find(|e| e.k == b.k)
                    .expect("exit follows entry");
                ev.exit_count = Some(self.count.clone());
                ev.exit_z = Some(*z);
                self.open_region = None;
            }
            self.next_boundary += 1;
        }
        if let (Some(k), Some(parts)) = (self.open_region, parts) {
            let r = Self::dominance_ratio(parts, k);
            let ev = self.events.iter_mut().rev().find(|e| e.k == k).expect("open region has event");
            if r > ev.max_abs_rk {
                ev.max_abs_rk = r;
            }
        }
        Ok(())
    }

    /// Step-quotient band margin for exact steps that started inside a region.
    fn update_quotient_margin(&mut self, region_before: Option<usize>, step: &XComplex) {
        let Some(k) = region_before else { return };
        let Some(s) = self.schedule else { return };
        let Ok(term) = s.term(k) else { return };
        let band = self.theta - 2.0 * std::f64::consts::PI * term.eps - 2.0 / k as f64;
        // tan is only meaningful when the band angle is inside (-pi/2, pi/2)
        if band.abs() >= 1.5 {
            return;
        }
        let ratio = (step.im / step.re).to_f64();
        let margin = if k % 2 == 0 { ratio - band.tan() } else { -band.tan() - ratio };
        let ev = self.events.iter_mut().rev().find(|e| e.k == k).expect("inside region");
        ev.min_quotient_margin = Some(match ev.min_quotient_margin {
            Some(m) => m.min(margin),
            None => margin,
        });
    }

    fn update_tail_args(&mut self, z: &XComplex) {
        let in_tail = if self.tail_started {
            true
        } else if let Some(ts) = &self.tail_start_count {
            &self.count >= ts
        } else {
            self.schedule.is_none()
        };
        if in_tail {
            self.tail_started = true;
            let a = z.arg();
            if a < self.arg_min {
                self.arg_min = a;
            }
            if a > self.arg_max {
                self.arg_max = a;
            }
        }
    }

    fn hyp_step_at(&self, z: &XComplex) -> Option<f64> {
        let (zh, fh) = match self.domain {
            OrbitDomain::Cone => {
                let angle = self.angle?;
                let fz = self.map.apply(z).ok()?;
                (angle.to_upper_half_plane(z), angle.to_upper_half_plane(&fz))
            }
            _ => {
                let fz = self.map.apply(z).ok()?;
                (*z, fz)
            }
        };
        hyp_dist(&fh, &zh).ok()
    }

    fn record_checkpoint(&mut self, z: &XComplex, parts: Option<&SeriesEval>, force: bool) {
        let due = force
            || if self.stride > 0 {
                self.since_ckpt >= self.stride
            } else {
                self.count >= self.next_mark
            };
        if !due {
            return;
        }
        self.since_ckpt = 0;
        while self.stride == 0 && self.next_mark <= self.count {
            self.next_mark = &self.next_mark * 2u32;
        }
        let abs_rk = match (self.open_region, parts) {
            (Some(k), Some(p)) => Some(Self::dominance_ratio(p, k)),
            _ => None,
        };
        self.checkpoints.push(Checkpoint {
            count: self.count.clone(),
            z: *z,
            region_k: self.open_region,
            abs_rk,
            hyp_step: self.hyp_step_at(z),
        });
    }

    fn finish(mut self, z: &XComplex, complete: bool, reason: Option<String>) -> OrbitTrace {
        let force = match self.checkpoints.last() {
            Some(c) => c.count != self.count,
            None => true,
        };
        if force {
            self.record_checkpoint(z, None, true);
        }
        OrbitTrace {
            checkpoints: self.checkpoints,
            events: self.events,
            total_applications: self.count,
            complete,
            incomplete_reason: reason,
            frame: match self.domain {
                OrbitDomain::Cone => TraceFrame::Cone,
                _ => TraceFrame::UpperHalfPlane,
            },
            angle: self.angle,
            has_regions: !self.boundaries.is_empty(),
            arg_min_tail: self.arg_min,
            arg_max_tail: self.arg_max,
            landings: self.landings,
            max_step_re: self.max_step_re,
        }
    }

    fn all_regions_closed(&self) -> bool {
        self.schedule.map_or(false, |s| {
            self.events.len() == s.len() && self.events.iter().all(|e| e.exit_count.is_some())
        })
    }
}

fn default_z0(map: &dyn OrbitMap, cfg: &OrbitConfig) -> Result<XComplex> {
    if let Some(z0) = cfg.z0 {
        return Ok(z0);
    }
    match (map.domain(), map.schedule()) {
        (OrbitDomain::Cone, Some(s)) => {
            let g1 = s.terms()[0].gamma.to_xreal();
            Ok(XComplex::new(g1.mul_pow2(-1), XReal::ZERO))
        }
        _ => Err(Error::InvalidConfig("z0 is required for maps without a schedule".into())),
    }
}

/// One application at a time. Enforces the per-step runtime assertions and
/// records region events at boundary crossings.
pub fn iterate_exact(map: &dyn OrbitMap, cfg: &OrbitConfig) -> Result<OrbitTrace> {
    let cfg = cfg.clone().validated()?;
    if map.schedule().is_none() && cfg.max_applications.is_none() {
        return Err(Error::InvalidConfig("an application budget is required without regions".into()));
    }
    let mut engine = Engine::new(map, &cfg)?;
    let mut z = default_z0(map, &cfg)?;
    engine.assert_domain(&z)?;
    engine.record_checkpoint(&z, None, true);

    let one = BigUint::from(1u32);
    loop {
        if engine.all_regions_closed() {
            return Ok(engine.finish(&z, true, None));
        }
        if let Some(budget) = &cfg.max_applications {
            if &engine.count >= budget {
                let complete = engine.schedule.is_none() || engine.all_regions_closed();
                let reason = if complete { None } else { Some("application budget exhausted".into()) };
                return Ok(engine.finish(&z, complete, reason));
            }
        }
        let region_before = engine.open_region;
        let z_next = map.apply(&z)?;
        engine.count += &one;
        engine.landings += 1;
        engine.since_ckpt += 1;
        let step = z_next - z;
        engine.assert_step(step.re.to_f64())?;
        engine.assert_domain(&z_next)?;
        engine.update_quotient_margin(region_before, &step);

        // R_k only at checkpoints in exact mode: the extra series evaluation
        // is not worth paying on every application
        let parts = match (engine.domain, engine.schedule) {
            (OrbitDomain::Cone, Some(s)) => Some(eval_p_terms(s, &z_next)?),
            _ => None,
        };
        engine.update_regions(&z_next, parts.as_ref())?;
        engine.update_tail_args(&z_next);
        engine.record_checkpoint(&z_next, parts.as_ref(), false);
        z = z_next;
    }
}

/// Aggregated iteration: z <- z + m p(z) with m a power of two satisfying
/// m * (derivative bound) <= eta, shortened so region boundaries are crossed
/// by single exact applications. Counts advance by exactly m.
pub fn iterate_accelerated(map: &dyn OrbitMap, cfg: &OrbitConfig) -> Result<OrbitTrace> {
    let cfg = cfg.clone().validated()?;
    let schedule = map
        .schedule()
        .ok_or(Error::UnsupportedVariant("acceleration requires a schedule-backed map"))?;
    if map.domain() != OrbitDomain::Cone {
        return Err(Error::UnsupportedVariant("acceleration runs in the cone frame"));
    }

    let mut engine = Engine::new(map, &cfg)?;
    let mut z = default_z0(map, &cfg)?;
    engine.assert_domain(&z)?;
    engine.record_checkpoint(&z, None, true);

    let ln2 = std::f64::consts::LN_2;
    loop {
        if engine.all_regions_closed() {
            return Ok(engine.finish(&z, true, None));
        }
        if let Some(budget) = &cfg.max_applications {
            if &engine.count >= budget {
                let complete = engine.all_regions_closed();
                let reason = if complete { None } else { Some("application budget exhausted".into()) };
                return Ok(engine.finish(&z, complete, reason));
            }
        }
        let region_before = engine.open_region;
        let parts = eval_p_terms(schedule, &z)?;
        let p = parts.sum;
        engine.assert_step(p.re.to_f64())?;

        // eta cap: m * deriv_bound <= eta
        let bound = deriv_bound_from_parts(schedule, &parts)?;
        let mut j: i64 = ((cfg.eta.ln() - bound.ln()) / ln2).floor() as i64;
        if j < 0 {
            j = 0; // derivative bound too large: fall back to exact stepping
        }

        // budget cap: count + 2^j <= budget
        if let Some(budget) = &cfg.max_applications {
            let rem = budget - &engine.count;
            let max_j = (rem.bits() - 1) as i64;
            j = j.min(max_j);
        }

        // boundary cap: land at or before the next boundary, then cross it
        // with a single application
        if j > 0 && engine.next_boundary < engine.boundaries.len() {
            let b = &engine.boundaries[engine.next_boundary];
            let gap = b.x - z.re;
            if gap.is_zero() || !gap.is_sign_positive() {
                j = 0;
            } else {
                let jb = (gap.log2_abs() - p.re.log2_abs()).floor() as i64;
                if jb < j {
                    j = jb.max(0);
                }
                // log arithmetic can be off by an ulp; verify against the
                // exact extended-range product and back off if needed
                while j > 0 && XReal::from_parts(1.0, j) * p.re > gap {
                    j -= 1;
                }
            }
        }

        let m = XReal::from_parts(1.0, j);
        let z_next = z + p.scale(m);
        engine.count += BigUint::from(1u32) << (j as u64);
        engine.landings += 1;
        engine.assert_domain(&z_next)?;
        if j == 0 {
            engine.update_quotient_margin(region_before, &p);
        }
        engine.update_regions(&z_next, Some(&parts))?;
        engine.update_tail_args(&z_next);
        engine.record_checkpoint(&z_next, Some(&parts), false);
        z = z_next;

        if engine.landings == u64::MAX {
            return Err(Error::NumericFailure("landing budget exhausted".into()));
        }
    }
}

pub fn iterate(map: &dyn OrbitMap, cfg: &OrbitConfig) -> Result<OrbitTrace> {
    match cfg.mode {
        OrbitMode::Exact => iterate_exact(map, cfg),
        OrbitMode::Accelerated => iterate_accelerated(map, cfg),
    }
}

/// Dominance ratio R_k(z) = (sum_{l != k} p_l(z)) / p_k(z).
pub fn ratio_rk(s: &Schedule, k: usize, z: &XComplex) -> Result<num_complex::Complex64> {
    let parts = eval_p_terms(s, z)?;
    let pk = *parts
        .terms
        .get(k.wrapping_sub(1))
        .ok_or(Error::TermIndex(k))?;
    let rest = parts.sum - pk;
    Ok(rest.div(&pk).to_complex64())
}

// ---------------------------------------------------------------------------
// Slope report
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct RegionExitSummary {
    pub k: usize,
    pub even: bool,
    pub exit_arg: f64,
    /// Band angle theta - 2 pi eps_k - 2/k; the exit argument must be at
    /// least this (even k) or at most its negative (odd k).
    pub band_angle: f64,
    pub band_ok: bool,
    pub max_abs_rk: f64,
    pub entry_overshoot: f64,
}

#[derive(Clone, Debug)]
pub struct SlopeReport {
    pub exits: Vec<RegionExitSummary>,
    /// Tail extremes of arg(z) in the trace's own frame.
    pub arg_min: f64,
    pub arg_max: f64,
    /// Estimated slope interval in upper-half-plane coordinates.
    pub a_hat: f64,
    pub b_hat: f64,
    /// All tail arguments stayed within [a - tol, b + tol] (half-plane frame).
    pub containment_ok: bool,
    pub hyp_first: Option<f64>,
    pub hyp_last: Option<f64>,
    pub complete: bool,
}

/// Builds the slope report from a trace. Schedule-backed traces need at
/// least two closed region events; region-free traces (benchmark map, stubs)
/// report tail extremes only.
pub fn slope_report(trace: &OrbitTrace, tol_arg: f64) -> Result<SlopeReport> {
    let closed: Vec<&RegionEvent> = trace.events.iter().filter(|e| e.exit_count.is_some()).collect();
    if trace.has_regions && closed.len() < 2 {
        return Err(Error::InsufficientTransit(closed.len()));
    }

    let (theta, phi) = match &trace.angle {
        Some(a) => (a.theta(), a.phi()),
        None => (f64::NAN, 0.0),
    };

    let arg_min = trace.arg_min_tail;
    let arg_max = trace.arg_max_tail;
    let (a_hat, b_hat) = match trace.frame {
        TraceFrame::Cone => (phi + arg_min, phi + arg_max),
        TraceFrame::UpperHalfPlane => (arg_min, arg_max),
    };

    let containment_ok = match (&trace.angle, trace.frame) {
        (Some(_), TraceFrame::Cone) => arg_min >= -theta - tol_arg && arg_max <= theta + tol_arg,
        (Some(angle), TraceFrame::UpperHalfPlane) => {
            a_hat >= angle.a() - tol_arg && b_hat <= angle.b() + tol_arg
        }
        (None, _) => true,
    };

    let hyp_first = trace.checkpoints.first().and_then(|c| c.hyp_step);
    let hyp_last = trace.checkpoints.iter().rev().find_map(|c| c.hyp_step);

    let summaries = closed
        .iter()
        .map(|e| RegionExitSummary {
            k: e.k,
            even: e.k % 2 == 0,
            exit_arg: e.exit_z.as_ref().expect("closed event").arg(),
            // bands need the schedule's eps_k; slope_report_for fills them
            band_angle: f64::NAN,
            band_ok: true,
            max_abs_rk: e.max_abs_rk,
            entry_overshoot: e.entry_overshoot,
        })
        .collect();

    Ok(SlopeReport {
        exits: summaries,
        arg_min,
        arg_max,
        a_hat,
        b_hat,
        containment_ok,
        hyp_first,
        hyp_last,
        complete: trace.complete,
    })
}

/// Slope report with the exit-argument bands evaluated against a schedule.
pub fn slope_report_for(trace: &OrbitTrace, s: &Schedule, tol_arg: f64) -> Result<SlopeReport> {
    let mut report = slope_report(trace, tol_arg)?;
    let theta = s.angle().theta();
    for ex in &mut report.exits {
        let term = s.term(ex.k)?;
        let band = theta - 2.0 * std::f64::consts::PI * term.eps - 2.0 / ex.k as f64;
        ex.band_angle = band;
        ex.band_ok = if ex.even {
            ex.exit_arg >= band - tol_arg
        } else {
            ex.exit_arg <= -band + tol_arg
        };
    }
    Ok(report)
}

/// Hyperbolic step length k(f(z), z) at each checkpoint, mapping cone-frame
/// points into the upper half-plane through the schedule's rotation.
pub fn hyp_step_series(map: &dyn OrbitMap, trace: &OrbitTrace) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(trace.checkpoints.len());
    for c in &trace.checkpoints {
        let (zh, fh) = match trace.frame {
            TraceFrame::Cone => {
                let angle = trace.angle.as_ref().ok_or(Error::UnsupportedVariant(
                    "cone-frame trace without an angle cannot be measured",
                ))?;
                let fz = map.apply(&c.z)?;
                (angle.to_upper_half_plane(&c.z), angle.to_upper_half_plane(&fz))
            }
            TraceFrame::UpperHalfPlane => (c.z, map.apply(&c.z)?),
        };
        out.push(hyp_dist(&fh, &zh)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Trace serialization
// ---------------------------------------------------------------------------

fn fmt17(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub const TRACE_CSV_HEADER: &str =
    "application_count,re_mantissa,re_exp2,im_mantissa,im_exp2,arg,log10_abs,region_k,abs_Rk,hyp_step";

fn checkpoint_fields(c: &Checkpoint) -> (String, f64, i64, f64, i64, f64, f64) {
    let z = &c.z;
    let log10_abs = if z.is_zero() { f64::NEG_INFINITY } else { z.abs().log10_abs() };
    (
        c.count.to_string(),
        z.re.mantissa(),
        z.re.exp2(),
        z.im.mantissa(),
        z.im.exp2(),
        z.arg(),
        log10_abs,
    )
}

/// CSV trace: one row per checkpoint, floats at 17 significant digits.
pub fn write_trace_csv(trace: &OrbitTrace, w: &mut dyn std::io::Write) -> std::io::Result<()> {
    writeln!(w, "{TRACE_CSV_HEADER}")?;
    for c in &trace.checkpoints {
        let (count, rm, re, im_m, im_e, arg, l10) = checkpoint_fields(c);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            count,
            fmt17(rm),
            re,
            fmt17(im_m),
            im_e,
            fmt17(arg),
            fmt17(l10),
            c.region_k.map(|k| k.to_string()).unwrap_or_default(),
            c.abs_rk.map(fmt17).unwrap_or_default(),
            c.hyp_step.map(fmt17).unwrap_or_default(),
        )?;
    }
    Ok(())
}

/// JSONL trace: one object per checkpoint line, floats at 17 significant digits.
pub fn write_trace_jsonl(trace: &OrbitTrace, w: &mut dyn std::io::Write) -> std::io::Result<()> {
    for c in &trace.checkpoints {
        let (count, rm, re, im_m, im_e, arg, l10) = checkpoint_fields(c);
        let region = c.region_k.map(|k| k.to_string()).unwrap_or_else(|| "null".into());
        let rk = c.abs_rk.map(fmt17).unwrap_or_else(|| "null".into());
        let hyp = c.hyp_step.map(fmt17).unwrap_or_else(|| "null".into());
        writeln!(
            w,
            "{{\"application_count\":\"{}\",\"re\":{{\"mantissa\":{},\"exp2\":{}}},\"im\":{{\"mantissa\":{},\"exp2\":{}}},\"arg\":{},\"log10_abs\":{},\"region_k\":{},\"abs_Rk\":{},\"hyp_step\":{}}}",
            count,
            fmt17(rm),
            re,
            fmt17(im_m),
            im_e,
            fmt17(arg),
            fmt17(l10),
            region,
            rk,
            hyp,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{synthesize, Term};
    use crate::xnum::PosLog;
    use std::f64::consts::FRAC_PI_4;

    fn angle_sym() -> AngleSpec {
        AngleSpec::new(FRAC_PI_4, 3.0 * FRAC_PI_4).unwrap()
    }

    /// z -> z + c stub.
    struct Affine {
        c: XComplex,
    }

    impl OrbitMap for Affine {
        fn apply(&self, z: &XComplex) -> Result<XComplex> {
            Ok(*z + self.c)
        }
        fn domain(&self) -> OrbitDomain {
            OrbitDomain::Free
        }
    }

    /// z -> 2z stub.
    struct Doubling;

    impl OrbitMap for Doubling {
        fn apply(&self, z: &XComplex) -> Result<XComplex> {
            Ok(z.scale_f64(2.0))
        }
        fn domain(&self) -> OrbitDomain {
            OrbitDomain::Free
        }
    }

    fn single_term_schedule() -> Schedule {
        // a=1, gamma=1024, eps=1/8, theta_1 by parity
        let term = Term::new(
            1,
            PosLog::new(1.0).unwrap(),
            PosLog::new(1024.0).unwrap(),
            0.125,
            Term::theta_for_parity(1, FRAC_PI_4, 0.125),
        )
        .unwrap();
        Schedule::new(angle_sym(), vec![term], None).unwrap()
    }

    #[test]
    fn affine_stub_five_steps() {
        let map = Affine { c: XComplex::from_f64(1.0, 0.0) };
        let cfg = OrbitConfig {
            z0: Some(XComplex::from_f64(0.0, 1.0)),
            mode: OrbitMode::Exact,
            max_applications: Some(BigUint::from(5u32)),
            ..Default::default()
        };
        let trace = iterate_exact(&map, &cfg).unwrap();
        let z = trace.checkpoints.last().unwrap().z.to_complex64();
        assert!((z - num_complex::Complex64::new(5.0, 1.0)).norm() < 1e-14);
        assert!(trace.complete);
        assert_eq!(trace.total_applications, BigUint::from(5u32));
    }

    #[test]
    fn exact_single_term_step_bound() {
        let s = single_term_schedule();
        let map = MapHandle::from_schedule(s, MapVariant::FOnCone).unwrap();
        let cfg = OrbitConfig {
            mode: OrbitMode::Exact,
            max_applications: Some(BigUint::from(1000u32)),
            checkpoint_stride: 100,
            ..Default::default()
        };
        let trace = iterate_exact(&map, &cfg).unwrap();
        // default z0 = gamma_1/2 = 512; per-application dx <= 0.5
        assert!(trace.max_step_re <= 0.5);
        assert!(trace.max_step_re > 0.0);
        // tighter bound from the step-sum: 1/1024^{1/8}
        assert!(trace.max_step_re <= (-(1024f64.ln()) / 8.0).exp() + 1e-12);
        assert!(trace.incomplete_reason.is_some(), "1000 applications cannot finish the region");
    }

    #[test]
    fn accelerated_matches_exact_when_unit_steps_forced() {
        let s = single_term_schedule();
        let map = MapHandle::from_schedule(s, MapVariant::FOnCone).unwrap();
        let budget = BigUint::from(64u32);
        // deriv bound ~ 1e-4 at z0=512, so eta <= 1e-4 forces m = 1 at first;
        // use a budget small enough that m stays 1 throughout
        let cfg_a = OrbitConfig {
            mode: OrbitMode::Accelerated,
            eta: 1e-4,
            max_applications: Some(budget.clone()),
            ..Default::default()
        };
        let cfg_e = OrbitConfig {
            mode: OrbitMode::Exact,
            max_applications: Some(budget),
            ..Default::default()
        };
        let ta = iterate_accelerated(&map, &cfg_a).unwrap();
        let te = iterate_exact(&map, &cfg_e).unwrap();
        // with eta this small every landing is m=1 and the arithmetic
        // expression is identical, so final points agree bit-for-bit
        assert_eq!(ta.landings, 64);
        let za = ta.checkpoints.last().unwrap().z;
        let ze = te.checkpoints.last().unwrap().z;
        assert_eq!(za, ze);
    }

    #[test]
    fn accelerated_count_conservation() {
        let s = synthesize(angle_sym(), 2, 2.0).unwrap();
        let map = MapHandle::from_schedule(s, MapVariant::FOnCone).unwrap();
        let cfg = OrbitConfig::default();
        let trace = iterate_accelerated(&map, &cfg).unwrap();
        assert!(trace.complete);
        assert_eq!(trace.events.len(), 2);
        // counts are consistent: entry < exit within each region, ordered across
        let e1 = &trace.events[0];
        let e2 = &trace.events[1];
        assert!(e1.entry_count < *e1.exit_count.as_ref().unwrap());
        assert!(e1.exit_count.as_ref().unwrap() <= &e2.entry_count);
        assert!(e2.exit_count.as_ref().unwrap() <= &trace.total_applications);
    }

    #[test]
    fn ratio_rk_single_term_is_zero() {
        let s = single_term_schedule();
        let r = ratio_rk(&s, 1, &XComplex::from_f64(2000.0, 100.0)).unwrap();
        assert_eq!(r.norm(), 0.0);
    }

    #[test]
    fn ratio_rk_bounded_in_regions() {
        let s = synthesize(angle_sym(), 4, 2.0).unwrap();
        // sample inside region 2: gamma_2 <= x <= gamma_2^2
        let g2 = s.terms()[1].gamma.ln();
        let x = XReal::exp_of(g2 * 1.5);
        let z = XComplex::new(x, x * 0.2);
        let r = ratio_rk(&s, 2, &z).unwrap();
        assert!(r.norm() <= 0.5, "|R_2| = {} > 1/2", r.norm());
        // dominant-term lower estimate
        let t2 = s.terms()[1];
        let dth = crate::schedule::delta_theta(FRAC_PI_4).unwrap();
        let p2 = crate::holomap::eval_term(&s, 2, &z).unwrap();
        let lower = dth.ln() + t2.a.ln() - 2.0 * t2.eps * t2.gamma.ln();
        assert!(p2.abs().ln_abs() >= lower - 1e-12);
    }

    #[test]
    fn doubling_stub_constant_hyp_step() {
        let map = Doubling;
        let cfg = OrbitConfig {
            z0: Some(XComplex::from_f64(0.0, 1.0)),
            mode: OrbitMode::Exact,
            max_applications: Some(BigUint::from(50u32)),
            checkpoint_stride: 5,
            ..Default::default()
        };
        let trace = iterate_exact(&map, &cfg).unwrap();
        let steps = hyp_step_series(&map, &trace).unwrap();
        let expected = (1.0f64 / 3.0).atanh();
        for s in steps {
            assert!((s - expected).abs() < 1e-12, "hyp step {s} != atanh(1/3)");
        }
    }

    #[test]
    fn affine_stub_decreasing_hyp_step() {
        let map = Affine { c: XComplex::from_f64(1.0, 0.0) };
        let cfg = OrbitConfig {
            z0: Some(XComplex::from_f64(0.0, 1.0)),
            mode: OrbitMode::Exact,
            max_applications: Some(BigUint::from(2000u32)),
            checkpoint_stride: 0,
            ..Default::default()
        };
        let trace = iterate_exact(&map, &cfg).unwrap();
        let steps = hyp_step_series(&map, &trace).unwrap();
        for w in steps.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "hyp steps must decrease");
        }
        assert!(*steps.last().unwrap() < 0.01);
    }

    #[test]
    fn constant_direction_stub_degenerate_slope() {
        let dir = 0.6f64;
        let map = Affine { c: XComplex::from_f64(dir.cos(), dir.sin()) };
        let cfg = OrbitConfig {
            z0: Some(XComplex::from_f64(1.0, 1.0)),
            mode: OrbitMode::Exact,
            max_applications: Some(BigUint::from(200_000u32)),
            ..Default::default()
        };
        let trace = iterate_exact(&map, &cfg).unwrap();
        let report = slope_report(&trace, 1e-6).unwrap();
        // orbit direction converges to the step direction
        assert!((report.arg_min - dir).abs() < 0.05);
        assert!((report.arg_max - dir).abs() < 0.05);
        assert!(report.arg_max - report.arg_min < 0.05);
    }

    #[test]
    fn slope_report_requires_two_events() {
        let s = single_term_schedule();
        let map = MapHandle::from_schedule(s, MapVariant::FOnCone).unwrap();
        let cfg = OrbitConfig {
            mode: OrbitMode::Exact,
            max_applications: Some(BigUint::from(10u32)),
            ..Default::default()
        };
        let trace = iterate_exact(&map, &cfg).unwrap();
        assert!(matches!(slope_report(&trace, 1e-6), Err(Error::InsufficientTransit(_))));
    }

    #[test]
    fn trace_csv_roundtrip_shape() {
        let map = Affine { c: XComplex::from_f64(1.0, 0.0) };
        let cfg = OrbitConfig {
            z0: Some(XComplex::from_f64(0.0, 1.0)),
            mode: OrbitMode::Exact,
            max_applications: Some(BigUint::from(16u32)),
            ..Default::default()
        };
        let trace = iterate_exact(&map, &cfg).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TRACE_CSV_HEADER);
        assert_eq!(lines.len(), trace.checkpoints.len() + 1);
        let mut buf2 = Vec::new();
        write_trace_jsonl(&trace, &mut buf2).unwrap();
        let jl = String::from_utf8(buf2).unwrap();
        for line in jl.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v.get("application_count").is_some());
            assert!(v.get("re").and_then(|r| r.get("mantissa")).is_some());
        }
    }
}
