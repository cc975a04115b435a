//! Coefficient schedules: the sequences (a_k, gamma_k, eps_k, theta_k) that
//! define the lacunary series, validation of the admissibility conditions,
//! the factorial-growth generator, and synthesis of desk-scale schedules
//! whose orbits stay within extended-range arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::AngleSpec;
use crate::xnum::{plog_sum, PosLog};

/// Tolerance for the parity phase-law equality check.
pub const PHASE_LAW_TOL: f64 = 1e-12;

/// Largest ln(gamma) the synthesizer will emit; beyond this the orbit engine's
/// power-of-two exponents would no longer be comfortable.
const MAX_LN_GAMMA: f64 = 1e15;

/// One series term: a_k e^{i theta_k} / (z + gamma_k)^{eps_k}.
///
/// Amplitude and shift are stored in the log domain, since the admissibility
/// conditions force gamma_k to grow at least like gamma_{k-1}^2.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Term {
    pub k: usize,
    pub a: PosLog,
    pub gamma: PosLog,
    pub eps: f64,
    pub theta_k: f64,
}

impl Term {
    pub fn new(k: usize, a: PosLog, gamma: PosLog, eps: f64, theta_k: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::TermIndex(0));
        }
        if !(eps.is_finite() && eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidConfig(format!("eps must be in (0,1), got {eps}")));
        }
        if !theta_k.is_finite() {
            return Err(Error::NotFinite);
        }
        Ok(Self { k, a, gamma, eps, theta_k })
    }

    /// The parity phase law: even k puts the term's sector flush against the
    /// upper cone edge, odd k against the lower edge.
    pub fn theta_for_parity(k: usize, theta: f64, eps: f64) -> f64 {
        if k % 2 == 0 {
            theta - std::f64::consts::PI * eps
        } else {
            -theta + std::f64::consts::PI * eps
        }
    }

    /// t_k = a_k / gamma_k^{eps_k}, the term's size at the shift scale.
    pub fn size(&self) -> PosLog {
        self.a.div(&self.gamma.powf(self.eps))
    }
}

/// Asserts that the (hypothetical) terms beyond the explicit list keep
/// shrinking: t_{l+1} <= ratio_bound * t_l for all l >= l0. The tail beyond
/// the list is then bounded by t_{l0} * ratio / (1 - ratio).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TailCertificate {
    pub l0: usize,
    pub ratio_bound: f64,
}

/// A finite coefficient schedule with an optional tail certificate.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ScheduleFile", into = "ScheduleFile")]
pub struct Schedule {
    angle: AngleSpec,
    terms: Vec<Term>,
    tail_certificate: Option<TailCertificate>,
}

impl Schedule {
    /// Structural construction. Admissibility conditions are *not* enforced
    /// here — `validate` reports on them, and tests need to build violating
    /// schedules on purpose.
    pub fn new(angle: AngleSpec, terms: Vec<Term>, tail_certificate: Option<TailCertificate>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::EmptySequence);
        }
        for (i, t) in terms.iter().enumerate() {
            if t.k != i + 1 {
                return Err(Error::TermIndex(t.k));
            }
        }
        if let Some(cert) = &tail_certificate {
            if !(cert.ratio_bound > 0.0 && cert.ratio_bound < 1.0) {
                return Err(Error::MalformedCertificate(cert.ratio_bound));
            }
            if cert.l0 == 0 || cert.l0 > terms.len() {
                return Err(Error::CertificateIndex { l0: cert.l0, terms: terms.len() });
            }
        }
        Ok(Self { angle, terms, tail_certificate })
    }

    #[inline]
    pub fn angle(&self) -> &AngleSpec {
        &self.angle
    }

    #[inline]
    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term(&self, k: usize) -> Result<&Term> {
        self.terms.get(k.wrapping_sub(1)).ok_or(Error::TermIndex(k))
    }

    #[inline]
    pub fn tail_certificate(&self) -> Option<&TailCertificate> {
        self.tail_certificate.as_ref()
    }

    pub fn gamma(&self, k: usize) -> Result<PosLog> {
        Ok(self.term(k)?.gamma)
    }

    /// Certified bound on the sum of term sizes beyond the explicit list,
    /// t_{l0} * ratio / (1 - ratio). None without a certificate.
    pub fn tail_bound(&self) -> Option<PosLog> {
        let cert = self.tail_certificate.as_ref()?;
        let t_l0 = self.terms[cert.l0 - 1].size();
        let r = cert.ratio_bound;
        Some(t_l0.mul(&PosLog::from_ln((r / (1.0 - r)).ln()).expect("finite ratio")))
    }

    /// Returns a copy with one amplitude multiplied by `factor` (log domain).
    /// Used to probe how the validator reacts to a broken schedule.
    pub fn with_scaled_amplitude(&self, k: usize, ln_factor: f64) -> Result<Self> {
        let mut s = self.clone();
        let idx = k.checked_sub(1).filter(|&i| i < s.terms.len()).ok_or(Error::TermIndex(k))?;
        s.terms[idx].a = PosLog::from_ln(s.terms[idx].a.ln() + ln_factor)?;
        Ok(s)
    }

    /// Returns a copy with gamma_k replaced (log domain).
    pub fn with_gamma_ln(&self, k: usize, gamma_ln: f64) -> Result<Self> {
        let mut s = self.clone();
        let idx = k.checked_sub(1).filter(|&i| i < s.terms.len()).ok_or(Error::TermIndex(k))?;
        s.terms[idx].gamma = PosLog::from_ln(gamma_ln)?;
        Ok(s)
    }
}

/// On-disk schedule format: amplitudes and shifts as natural logs.
#[derive(Serialize, Deserialize)]
struct ScheduleFile {
    angle: AngleFile,
    terms: Vec<TermFile>,
    tail_certificate: Option<TailCertificate>,
}

#[derive(Serialize, Deserialize)]
struct AngleFile {
    a: f64,
    b: f64,
}

#[derive(Serialize, Deserialize)]
struct TermFile {
    k: usize,
    a_ln: f64,
    gamma_ln: f64,
    eps: f64,
    theta_k: f64,
}

impl From<Schedule> for ScheduleFile {
    fn from(s: Schedule) -> Self {
        ScheduleFile {
            angle: AngleFile { a: s.angle.a(), b: s.angle.b() },
            terms: s
                .terms
                .iter()
                .map(|t| TermFile {
                    k: t.k,
                    a_ln: t.a.ln(),
                    gamma_ln: t.gamma.ln(),
                    eps: t.eps,
                    theta_k: t.theta_k,
                })
                .collect(),
            tail_certificate: s.tail_certificate,
        }
    }
}

impl TryFrom<ScheduleFile> for Schedule {
    type Error = Error;

    fn try_from(f: ScheduleFile) -> Result<Self> {
        let angle = AngleSpec::new(f.angle.a, f.angle.b)?;
        let terms = f
            .terms
            .into_iter()
            .map(|t| Term::new(t.k, PosLog::from_ln(t.a_ln)?, PosLog::from_ln(t.gamma_ln)?, t.eps, t.theta_k))
            .collect::<Result<Vec<_>>>()?;
        Schedule::new(angle, terms, f.tail_certificate)
    }
}

/// Delta(theta) = 1 / sqrt(4 + tan^2 theta), the cone-geometry constant in the
/// dominant-term lower estimate. Lies in (0, 1/2).
pub fn delta_theta(theta: f64) -> Result<f64> {
    if !(theta.is_finite() && theta > 0.0 && theta < std::f64::consts::FRAC_PI_2) {
        return Err(Error::AngleRange(theta));
    }
    Ok(1.0 / (4.0 + theta.tan().powi(2)).sqrt())
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Identifier for each admissibility condition in the report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionId {
    /// Positivity, eps angle caps, eps strictly decreasing.
    Positivity,
    /// Parity phase law for theta_k.
    PhaseLaw,
    /// Sum of term sizes bounded by gamma_1 / 2.
    StepBound,
    /// gamma_1 >= 2 and gamma_{k+1} > gamma_k^2.
    GammaGrowth,
    /// Prefix/suffix domination by each term on its own region.
    Domination,
}

/// One condition's verdict. `slack_ln` is the log-domain margin: positive
/// means the binding inequality holds with room to spare, +inf means vacuous.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub id: ConditionId,
    pub pass: bool,
    pub slack_ln: f64,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Horizon {
    /// Tail certificate present: infinite-sum conditions carry certified tails.
    Certified,
    /// No certificate: sums checked over the explicit terms only.
    FiniteHorizonOnly,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub conditions: Vec<ConditionCheck>,
    pub horizon: Horizon,
    pub pass: bool,
}

impl ValidationReport {
    pub fn condition(&self, id: ConditionId) -> &ConditionCheck {
        self.conditions.iter().find(|c| c.id == id).expect("all conditions reported")
    }
}

/// Checks the admissibility conditions in log-domain arithmetic and reports
/// per-condition slack. With a tail certificate the infinite-sum conditions
/// include the certified tail; otherwise they are finite-horizon only.
pub fn validate(s: &Schedule) -> Result<ValidationReport> {
    let theta = s.angle().theta();
    let big_k = s.len();
    let dth = delta_theta(theta)?;
    let sizes: Vec<PosLog> = s.terms().iter().map(Term::size).collect();
    let tail = s.tail_bound();
    let horizon = if tail.is_some() { Horizon::Certified } else { Horizon::FiniteHorizonOnly };

    let mut conditions = Vec::new();

    // Positivity and eps caps. Amplitudes/shifts are positive by construction
    // (PosLog), so the binding parts are pi*eps_k <= theta and strict decrease.
    {
        let mut slack = f64::INFINITY;
        let mut pass = true;
        for t in s.terms() {
            let cap_slack = theta.ln() - (std::f64::consts::PI * t.eps).ln();
            slack = slack.min(cap_slack);
            if cap_slack < 0.0 {
                pass = false;
            }
        }
        for w in s.terms().windows(2) {
            let dec_slack = (w[0].eps / w[1].eps).ln();
            slack = slack.min(dec_slack);
            if dec_slack <= 0.0 {
                pass = false;
            }
        }
        conditions.push(ConditionCheck {
            id: ConditionId::Positivity,
            pass,
            slack_ln: slack,
            detail: format!("pi*eps_k <= theta and eps strictly decreasing over {big_k} terms"),
        });
    }

    // Parity phase law, as an equality to within PHASE_LAW_TOL.
    {
        let mut worst = 0.0f64;
        for t in s.terms() {
            let residual = (t.theta_k - Term::theta_for_parity(t.k, theta, t.eps)).abs();
            worst = worst.max(residual);
        }
        let pass = worst <= PHASE_LAW_TOL;
        let slack = if worst == 0.0 { f64::INFINITY } else { (PHASE_LAW_TOL / worst).ln() };
        conditions.push(ConditionCheck {
            id: ConditionId::PhaseLaw,
            pass,
            slack_ln: slack,
            detail: format!("worst phase residual {worst:.3e} (tol {PHASE_LAW_TOL:.0e})"),
        });
    }

    // Step bound: sum of sizes (+ tail) <= gamma_1 / 2.
    {
        let mut all = sizes.clone();
        if let Some(t) = tail {
            all.push(t);
        }
        let lhs = plog_sum(&all)?;
        let rhs_ln = s.terms()[0].gamma.ln() - std::f64::consts::LN_2;
        let slack = rhs_ln - lhs.ln();
        conditions.push(ConditionCheck {
            id: ConditionId::StepBound,
            pass: slack >= 0.0,
            slack_ln: slack,
            detail: format!("ln(sum sizes) = {:.6}, ln(gamma_1/2) = {:.6}", lhs.ln(), rhs_ln),
        });
    }

    // Gamma growth: gamma_1 >= 2 (non-strict), gamma_{k+1} > gamma_k^2 (strict).
    {
        let mut slack = s.terms()[0].gamma.ln() - std::f64::consts::LN_2;
        let mut pass = slack >= 0.0;
        for w in s.terms().windows(2) {
            let g_slack = w[1].gamma.ln() - 2.0 * w[0].gamma.ln();
            slack = slack.min(g_slack);
            if g_slack <= 0.0 {
                pass = false;
            }
        }
        conditions.push(ConditionCheck {
            id: ConditionId::GammaGrowth,
            pass,
            slack_ln: slack,
            detail: format!("min over gamma_1 >= 2 and gamma_k+1 > gamma_k^2, {big_k} terms"),
        });
    }

    // Domination: for each k, prefix and suffix sums are small against the
    // k-th term's worst-case size on its own region.
    {
        let mut slack = f64::INFINITY;
        let mut pass = true;
        let mut details = Vec::new();
        for (i, t) in s.terms().iter().enumerate() {
            let k = i + 1;
            let rhs_ln =
                dth.ln() + t.a.ln() - (2.0 * k as f64).ln() - 2.0 * t.eps * t.gamma.ln();

            // prefix: sum_{l<k} a_l / gamma_k^{eps_l}
            let prefix_slack = if i == 0 {
                f64::INFINITY
            } else {
                let parts: Vec<PosLog> = s.terms()[..i]
                    .iter()
                    .map(|l| l.a.div(&t.gamma.powf(l.eps)))
                    .collect();
                rhs_ln - plog_sum(&parts)?.ln()
            };

            // suffix: sum_{l>k} t_l plus the certified tail
            let mut suffix_parts: Vec<PosLog> = sizes[i + 1..].to_vec();
            if let Some(tl) = tail {
                suffix_parts.push(tl);
            }
            let suffix_slack = if suffix_parts.is_empty() {
                f64::INFINITY
            } else {
                rhs_ln - plog_sum(&suffix_parts)?.ln()
            };

            let k_slack = prefix_slack.min(suffix_slack);
            slack = slack.min(k_slack);
            if k_slack < 0.0 {
                pass = false;
            }
            details.push(format!("k={k}: prefix {prefix_slack:.3}, suffix {suffix_slack:.3}"));
        }
        conditions.push(ConditionCheck {
            id: ConditionId::Domination,
            pass,
            slack_ln: slack,
            detail: details.join("; "),
        });
    }

    let pass = conditions.iter().all(|c| c.pass);
    Ok(ValidationReport { conditions, horizon, pass })
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// ln(k!) via lgamma-free summation; exact enough for schedule logs.
fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// The factorial-growth schedule family:
/// eps_k = (theta/pi) 2^{-k}, a_k = C1^k (k!)^2, gamma_k^{eps_k} = (C2 k!)^{3^k}.
///
/// Phases follow the parity law. The attached tail certificate records the
/// observed decay ratio of the first hypothetical continuation step, which is
/// an upper bound for all later ratios in this family.
pub fn example21(theta: f64, c1: f64, c2: f64, big_k: usize) -> Result<Schedule> {
    if !(theta.is_finite() && theta > 0.0 && theta < std::f64::consts::FRAC_PI_2) {
        return Err(Error::AngleRange(theta));
    }
    if !(c1 > 1.0 && c2 > 1.0) {
        return Err(Error::InvalidConfig(format!("constants must exceed 1, got C1={c1}, C2={c2}")));
    }
    if big_k < 1 {
        return Err(Error::TooFewTerms { min: 1, got: big_k });
    }

    let ln_t_at = |k: usize| -> Result<f64> {
        let eps = (theta / std::f64::consts::PI) * 0.5f64.powi(k as i32);
        let ln_a = k as f64 * c1.ln() + 2.0 * ln_factorial(k);
        let ln_gamma_eps = 3f64.powi(k as i32) * (c2.ln() + ln_factorial(k));
        if !(ln_a.is_finite() && ln_gamma_eps.is_finite() && (ln_gamma_eps / eps).is_finite()) {
            return Err(Error::ScheduleOverflow);
        }
        Ok(ln_a - ln_gamma_eps)
    };

    let mut terms = Vec::with_capacity(big_k);
    for k in 1..=big_k {
        let eps = (theta / std::f64::consts::PI) * 0.5f64.powi(k as i32);
        let ln_a = k as f64 * c1.ln() + 2.0 * ln_factorial(k);
        let ln_gamma = 3f64.powi(k as i32) * (c2.ln() + ln_factorial(k)) / eps;
        if !ln_gamma.is_finite() {
            return Err(Error::ScheduleOverflow);
        }
        terms.push(Term::new(
            k,
            PosLog::from_ln(ln_a)?,
            PosLog::from_ln(ln_gamma)?,
            eps,
            Term::theta_for_parity(k, theta, eps),
        )?);
    }

    // observed decay ratio t_{K+1} / t_K of the continuation
    let ln_ratio = ln_t_at(big_k + 1)? - ln_t_at(big_k)?;
    let certificate = if ln_ratio < 0.0 {
        Some(TailCertificate { l0: big_k, ratio_bound: ln_ratio.exp().max(1e-300) })
    } else {
        None
    };

    // Default interval [0, 2 theta]; callers wanting a specific [a, b] with
    // the same half-width re-attach it via `with_angle`.
    Schedule::new(AngleSpec::new(0.0, 2.0 * theta)?, terms, certificate)
}

/// Re-attach a target interval to a schedule with matching half-width.
pub fn with_angle(s: &Schedule, angle: AngleSpec) -> Result<Schedule> {
    if (angle.theta() - s.angle().theta()).abs() > 1e-12 {
        return Err(Error::InvalidConfig(format!(
            "interval half-width {} does not match schedule theta {}",
            angle.theta(),
            s.angle().theta()
        )));
    }
    Schedule::new(angle, s.terms().to_vec(), s.tail_certificate().copied())
}

/// Synthesizes a desk-scale schedule for the target interval: K terms whose
/// shifts stay within extended-range arithmetic, every condition passing with
/// multiplicative margin `safety`.
///
/// eps follows the halving law eps_k = (theta/pi) 2^{-k}. Amplitudes are
/// forced by the prefix inequality (for l = k-1 the exponents match, so it is
/// a pure amplitude ratio); shifts are then the smallest satisfying the
/// growth condition and a geometric budget split of every suffix constraint,
/// which leaves exactly enough room for the later terms and the tail.
pub fn synthesize(angle: AngleSpec, big_k: usize, safety: f64) -> Result<Schedule> {
    if big_k < 2 {
        return Err(Error::TooFewTerms { min: 2, got: big_k });
    }
    if !(safety.is_finite() && safety > 1.0) {
        return Err(Error::InvalidConfig(format!("safety must exceed 1, got {safety}")));
    }
    let theta = angle.theta();
    let dth = delta_theta(theta)?;
    let ln2 = std::f64::consts::LN_2;

    let eps: Vec<f64> = (1..=big_k).map(|k| (theta / std::f64::consts::PI) * 0.5f64.powi(k as i32)).collect();

    let mut ln_a = vec![0.0f64; big_k];
    let mut ln_g = vec![0.0f64; big_k];
    let mut ln_t = vec![0.0f64; big_k];

    // First term: amplitude 1; shift sized so the step bound holds with the
    // whole-sum budget t_1 <= gamma_1 / (4 safety) (half the budget is
    // reserved for the later terms and the tail).
    ln_g[0] = ln2.max((4.0 * safety).ln() / (1.0 + eps[0]));
    ln_t[0] = -eps[0] * ln_g[0];

    for i in 1..big_k {
        let k = (i + 1) as f64;
        // amplitude from the prefix inequality with slack `safety`
        let sum_a = plog_sum(&ln_a[..i].iter().map(|&l| PosLog::from_ln(l).unwrap()).collect::<Vec<_>>())?;
        ln_a[i] = safety.ln() + (2.0 * k).ln() + sum_a.ln() - dth.ln();

        // size cap: geometric split of the step-bound budget and of every
        // earlier suffix budget
        let mut cap = ln_t[0] - (i as f64) * ln2;
        for j in 0..i {
            let rhs_j = dth.ln() + ln_a[j] - (2.0 * (j + 1) as f64).ln() - 2.0 * eps[j] * ln_g[j];
            cap = cap.min(rhs_j - safety.ln() - ((i - j) as f64) * ln2);
        }

        ln_g[i] = (safety.ln() + 2.0 * ln_g[i - 1]).max((ln_a[i] - cap) / eps[i]);
        ln_t[i] = ln_a[i] - eps[i] * ln_g[i];

        if !(ln_a[i].is_finite() && ln_g[i].is_finite()) || ln_g[i] > MAX_LN_GAMMA {
            return Err(Error::ScheduleOverflow);
        }
    }

    let mut terms = Vec::with_capacity(big_k);
    for i in 0..big_k {
        terms.push(Term::new(
            i + 1,
            PosLog::from_ln(ln_a[i])?,
            PosLog::from_ln(ln_g[i])?,
            eps[i],
            Term::theta_for_parity(i + 1, theta, eps[i]),
        )?);
    }

    // observed final decay ratio; far below 1/2 by the budget split
    let ratio = (ln_t[big_k - 1] - ln_t[big_k - 2]).exp().clamp(1e-300, 0.5);
    Schedule::new(angle, terms, Some(TailCertificate { l0: big_k, ratio_bound: ratio }))
}

// ---------------------------------------------------------------------------
// Moment-condition sums
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum L1Verdict {
    /// Both sums finite including certified tails.
    Pass,
    /// Finite over the explicit terms; no certificate (or one too weak for
    /// the weighted tails), so nothing is claimed beyond the horizon.
    FiniteHorizonOnly,
    /// A finite-horizon sum overflowed.
    Fail,
}

/// Report for the two moment-condition sums:
/// sum_log = sum a_k log(1 + gamma_k^2) / gamma_k^{eps_k},
/// sum_eps = sum a_k / (eps_k gamma_k^{eps_k}).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct L1Report {
    pub verdict: L1Verdict,
    /// ln of the log-weighted partial sum.
    pub sum_log_ln: f64,
    /// ln of the eps-weighted partial sum.
    pub sum_eps_ln: f64,
    /// Certified tail bounds (ln), when the certificate covers them.
    pub tail_log_ln: Option<f64>,
    pub tail_eps_ln: Option<f64>,
    /// Per-term ln values of the log-weighted summand.
    pub terms_log_ln: Vec<f64>,
    /// Per-term ln values of the eps-weighted summand.
    pub terms_eps_ln: Vec<f64>,
}

impl L1Report {
    pub fn sum_log(&self) -> f64 {
        self.sum_log_ln.exp()
    }

    pub fn sum_eps(&self) -> f64 {
        self.sum_eps_ln.exp()
    }
}

/// ln(log(1 + gamma^2)) from ln(gamma), stable for huge gamma.
fn ln_log1p_gamma_sq(ln_gamma: f64) -> f64 {
    if ln_gamma > 0.0 {
        // log(1+g^2) = 2 ln g + log1p(g^-2)
        (2.0 * ln_gamma + (-2.0 * ln_gamma).exp().ln_1p()).ln()
    } else {
        ((2.0 * ln_gamma).exp().ln_1p()).ln()
    }
}

/// Evaluates the two moment-condition sums in the log domain, with certified
/// tails when possible.
///
/// The weighted tails need one growth assumption beyond the certificate: the
/// shifts keep squaring (the minimal growth the admissibility conditions
/// allow), so each weighted summand decays by at most q = 2 * ratio_bound per
/// index. With q >= 1 the tails are not claimed and the verdict degrades to
/// finite-horizon.
pub fn check_l1_condition(s: &Schedule) -> Result<L1Report> {
    let mut terms_log = Vec::with_capacity(s.len());
    let mut terms_eps = Vec::with_capacity(s.len());
    for t in s.terms() {
        let base = t.a.ln() - t.eps * t.gamma.ln();
        terms_log.push(base + ln_log1p_gamma_sq(t.gamma.ln()));
        terms_eps.push(base - t.eps.ln());
    }
    let sum_log = plog_sum(&terms_log.iter().map(|&l| PosLog::from_ln(l).unwrap()).collect::<Vec<_>>())?;
    let sum_eps = plog_sum(&terms_eps.iter().map(|&l| PosLog::from_ln(l).unwrap()).collect::<Vec<_>>())?;

    if !(sum_log.ln().is_finite() && sum_eps.ln().is_finite()) {
        return Ok(L1Report {
            verdict: L1Verdict::Fail,
            sum_log_ln: sum_log.ln(),
            sum_eps_ln: sum_eps.ln(),
            tail_log_ln: None,
            tail_eps_ln: None,
            terms_log_ln: terms_log,
            terms_eps_ln: terms_eps,
        });
    }

    let (verdict, tail_log, tail_eps) = match s.tail_certificate() {
        Some(cert) => {
            let q = 2.0 * cert.ratio_bound;
            if q < 1.0 {
                let geo = (q / (1.0 - q)).ln();
                (
                    L1Verdict::Pass,
                    Some(terms_log[cert.l0 - 1] + geo),
                    Some(terms_eps[cert.l0 - 1] + geo),
                )
            } else {
                (L1Verdict::FiniteHorizonOnly, None, None)
            }
        }
        None => (L1Verdict::FiniteHorizonOnly, None, None),
    };

    Ok(L1Report {
        verdict,
        sum_log_ln: sum_log.ln(),
        sum_eps_ln: sum_eps.ln(),
        tail_log_ln: tail_log,
        tail_eps_ln: tail_eps,
        terms_log_ln: terms_log,
        terms_eps_ln: terms_eps,
    })
}
