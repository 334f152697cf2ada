//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 50;

/// Integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("quadrature tolerance must be positive"));
    }
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut achieved = 0.0;
    let value = recurse(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH, &mut achieved);
    if achieved > tol {
        return Err(Error::NumericalFailure(format!(
            "adaptive Simpson reached depth limit on [{a}, {b}] with error estimate {achieved:e} > {tol:e}"
        )));
    }
    Ok(value)
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
    achieved: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        if depth == 0 {
            *achieved += delta.abs() / 15.0;
        }
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, achieved)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, achieved)
}
