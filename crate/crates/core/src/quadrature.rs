//! Adaptive Simpson integration.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 48;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Fails with [`Error::Quadrature`] if some subinterval still misses its
/// share of the tolerance at the recursion limit.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<Integral> {
    if !(b > a) {
        return Ok(Integral { value: 0.0, error_estimate: 0.0 });
    }
    // Seed with a few panels so narrow features are not skipped by a lucky
    // first Simpson estimate.
    const PANELS: usize = 8;
    let width = (b - a) / PANELS as f64;
    let mut total = Integral { value: 0.0, error_estimate: 0.0 };
    let mut converged = true;
    for k in 0..PANELS {
        let lo = a + k as f64 * width;
        let hi = if k + 1 == PANELS { b } else { lo + width };
        let (flo, fhi) = (f(lo), f(hi));
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        let whole = simpson(lo, hi, flo, fmid, fhi);
        let part = recurse(&f, lo, hi, flo, fmid, fhi, whole, tol / PANELS as f64, MAX_DEPTH, &mut converged);
        total.value += part.value;
        total.error_estimate += part.error_estimate;
    }
    if !converged {
        return Err(Error::Quadrature { estimate: total.error_estimate, tolerance: tol });
    }
    Ok(total)
}

#[inline]
fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    converged: &mut bool,
) -> Integral {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Integral { value: left + right + delta / 15.0, error_estimate: delta.abs() / 15.0 };
    }
    if depth == 0 {
        *converged = false;
        return Integral { value: left + right + delta / 15.0, error_estimate: delta.abs() / 15.0 };
    }
    let l = recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1, converged);
    let r = recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1, converged);
    Integral { value: l.value + r.value, error_estimate: l.error_estimate + r.error_estimate }
}
