//! Panel-based adaptive Simpson quadrature over real and complex integrands.
//!
//! Panels are refined recursively with Richardson-corrected acceptance; the
//! summation order is fixed by the breakpoint list, so results are
//! deterministic for a given configuration.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Values an integrand may produce.
pub trait QuadValue: Copy {
    fn zero() -> Self;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn scale(self, s: f64) -> Self;
    fn norm(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn norm(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn norm(self) -> f64 {
        Complex64::norm(self)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult<V> {
    pub value: V,
    pub err_est: f64,
    pub evals: usize,
}

const MAX_DEPTH: u32 = 48;

struct Runner<'a, V> {
    f: &'a mut dyn FnMut(f64) -> V,
    err_acc: f64,
    evals: usize,
}

impl<V: QuadValue> Runner<'_, V> {
    fn eval(&mut self, x: f64) -> V {
        self.evals += 1;
        (self.f)(x)
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(
        &mut self,
        a: f64,
        fa: V,
        b: f64,
        fb: V,
        m: f64,
        fm: V,
        whole: V,
        tol: f64,
        depth: u32,
    ) -> Result<V> {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = self.eval(lm);
        let frm = self.eval(rm);
        let left = simpson(a, m, fa, flm, fm);
        let right = simpson(m, b, fm, frm, fb);
        let refined = left.add(right);
        let delta = refined.sub(whole).norm();
        // width floor: give up splitting once panels reach float resolution
        let width_floor = (b - a).abs() <= 1e-14 * (a.abs().max(b.abs()).max(1.0));
        if delta <= 15.0 * tol || width_floor {
            self.err_acc += delta / 15.0;
            // Richardson correction
            return Ok(refined.add(refined.sub(whole).scale(1.0 / 15.0)));
        }
        if depth == 0 {
            return Err(Error::QuadratureFailure { lo: a, hi: b, err: delta / 15.0 });
        }
        let l = self.refine(a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)?;
        let r = self.refine(m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)?;
        Ok(l.add(r))
    }
}

fn simpson<V: QuadValue>(a: f64, b: f64, fa: V, fm: V, fb: V) -> V {
    fa.add(fm.scale(4.0)).add(fb).scale((b - a) / 6.0)
}

/// Adaptive integral over [a, b] with absolute tolerance `tol`.
pub fn integrate<V: QuadValue>(f: &mut dyn FnMut(f64) -> V, a: f64, b: f64, tol: f64) -> Result<QuadResult<V>> {
    if a == b {
        return Ok(QuadResult { value: V::zero(), err_est: 0.0, evals: 0 });
    }
    let mut runner = Runner { f, err_acc: 0.0, evals: 0 };
    let fa = runner.eval(a);
    let fb = runner.eval(b);
    let m = 0.5 * (a + b);
    let fm = runner.eval(m);
    let whole = simpson(a, b, fa, fm, fb);
    let value = runner.refine(a, fa, b, fb, m, fm, whole, tol, MAX_DEPTH)?;
    Ok(QuadResult { value, err_est: runner.err_acc, evals: runner.evals })
}

/// Adaptive integral over a breakpoint chain, each panel getting an equal
/// share of the tolerance. Breakpoints must be strictly increasing.
pub fn integrate_piecewise<V: QuadValue>(
    f: &mut dyn FnMut(f64) -> V,
    points: &[f64],
    tol: f64,
) -> Result<QuadResult<V>> {
    assert!(points.len() >= 2, "need at least one panel");
    let panels = points.len() - 1;
    let per_panel = tol / panels as f64;
    let mut value = V::zero();
    let mut err = 0.0;
    let mut evals = 0;
    for w in points.windows(2) {
        let r = integrate(f, w[0], w[1], per_panel)?;
        value = value.add(r.value);
        err += r.err_est;
        evals += r.evals;
    }
    Ok(QuadResult { value, err_est: err, evals })
}

/// Sorted, deduplicated breakpoint chain clamped to [lo, hi], always
/// containing both ends.
pub fn breakpoint_chain(lo: f64, hi: f64, interior: &[f64]) -> Vec<f64> {
    let mut pts = vec![lo];
    let mut interior: Vec<f64> = interior.iter().copied().filter(|&x| x > lo && x < hi).collect();
    interior.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for x in interior {
        if x - pts.last().unwrap() > 1e-12 {
            pts.push(x);
        }
    }
    if hi - pts.last().unwrap() > 1e-12 {
        pts.push(hi);
    } else {
        *pts.last_mut().unwrap() = hi;
    }
    pts
}
