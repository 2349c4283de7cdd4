//! Adaptive Simpson quadrature.

/// Outcome of [`adaptive_simpson`].
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    /// False when some panel hit the depth limit before meeting its share of
    /// the tolerance.
    pub converged: bool,
}

const MAX_DEPTH: u32 = 50;
const INITIAL_PANELS: usize = 8;

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// The interval is first cut into a few panels so that a lucky agreement on
/// the coarsest Simpson pair cannot end the recursion early.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Quadrature {
    if a == b {
        return Quadrature { value: 0.0, converged: true };
    }
    let width = (b - a) / INITIAL_PANELS as f64;
    let panel_tol = tol / INITIAL_PANELS as f64;
    let mut value = 0.0;
    let mut converged = true;
    for p in 0..INITIAL_PANELS {
        let lo = a + p as f64 * width;
        let hi = if p + 1 == INITIAL_PANELS { b } else { lo + width };
        let (flo, fhi, fmid) = (f(lo), f(hi), f(0.5 * (lo + hi)));
        let whole = simpson(lo, hi, flo, fmid, fhi);
        let mut ok = true;
        value += refine(f, lo, hi, flo, fmid, fhi, whole, panel_tol, MAX_DEPTH, &mut ok);
        converged &= ok;
    }
    Quadrature { value, converged }
}

#[inline]
fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    ok: &mut bool,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    if depth == 0 || m <= a || m >= b {
        *ok = false;
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, ok)
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, ok)
}
